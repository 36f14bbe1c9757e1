"""Reading and writing instance and menu documents.

An instance is a JSON document tagged `mrf/1`: the MRF's supports,
hyperedges and potential tables, optionally a nested `val/1` valuation, and
optional prophet (`order`) or OCRS (`x`, `active_label`) fields. Potential
and value tables are stored as lists of entries so that integer and string
labels survive the round trip. Documents are written with a fixed key order,
so the same instance always produces the same bytes.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from .exceptions import InstanceFormatError
from .mechanisms import Menu
from .mrf import Label, Mrf, joint_table
from .ocrs import ACTIVE_LABEL, OcrsInstance, activity_marginals
from .prophet import ProphetInstance
from .valuation import SetValuation, ValuationDistribution, ValuationKind

#: Schema tag of instance documents.
MRF_SCHEMA = "mrf/1"

#: Schema tag of the nested valuation.
VALUATION_SCHEMA = "val/1"

#: Schema tag of menu documents.
MENU_SCHEMA = "menu/1"


@dataclass(frozen=True, eq=False)
class InstanceDocument:
    """Everything an instance file holds.

    Attributes:
        instance_id (str): A stable identifier used in result rows.
        mrf (Mrf): The type distribution.
        valuation (Optional[SetValuation]): The buyer's valuation (or, for prophet
            instances, the per-vertex value maps as additive singletons).
        delta_nominal (Optional[float]): The edge magnitude the generator aimed for.
        order (Optional[tuple[int, ...]]): Arrival order for prophet and OCRS instances.
        x (Optional[tuple[float, ...]]): OCRS activity probabilities.
        active_label (Label): OCRS active label.
    """

    instance_id: str
    mrf: Mrf
    valuation: Optional[SetValuation] = None
    delta_nominal: Optional[float] = None
    order: Optional[tuple[int, ...]] = None
    x: Optional[tuple[float, ...]] = None
    active_label: Label = ACTIVE_LABEL

    def valuation_distribution(self) -> ValuationDistribution:
        """Returns the buyer's distribution over all items.

        Raises:
            InstanceFormatError: If the document has no valuation.
        """
        if self.valuation is None:
            raise InstanceFormatError(f"Instance {self.instance_id!r} has no valuation.")
        return ValuationDistribution(joint=joint_table(self.mrf), g=self.valuation)

    def prophet_instance(self) -> ProphetInstance:
        """Reads the valuation's singleton values as the value maps g_i.

        Raises:
            InstanceFormatError: If the document has no valuation.
        """
        if self.valuation is None:
            raise InstanceFormatError(f"Instance {self.instance_id!r} has no value maps.")
        singles = self.valuation.singleton_values
        value_maps = tuple(
            {lab: singles.get((i, lab), 0.0) for lab in labels} for i, labels in enumerate(self.mrf.supports)
        )
        return ProphetInstance(
            mrf=self.mrf, value_maps=value_maps, order=self.order, delta_nominal=self.delta_nominal
        )

    def ocrs_instance(self) -> OcrsInstance:
        """Returns the OCRS problem; x defaults to the exact activity marginals.

        Raises:
            InstanceFormatError: If the MRF is not binary.
        """
        try:
            x = self.x if self.x is not None else tuple(activity_marginals(self.mrf, self.active_label))
            return OcrsInstance(
                mrf=self.mrf,
                x=x,
                order=self.order,
                active_label=self.active_label,
                delta_nominal=self.delta_nominal,
            )
        except ValueError as exc:
            raise InstanceFormatError(f"Instance {self.instance_id!r} is not a valid OCRS instance: {exc}") from exc

    @classmethod
    def from_prophet(cls, instance_id: str, inst: ProphetInstance) -> "InstanceDocument":
        singles = {(i, lab): v for i, g in enumerate(inst.value_maps) for lab, v in g.items()}
        return cls(
            instance_id=instance_id,
            mrf=inst.mrf,
            valuation=SetValuation(kind=ValuationKind.ADDITIVE, singleton_values=singles),
            delta_nominal=inst.delta_nominal,
            order=inst.order,
        )

    @classmethod
    def from_ocrs(cls, instance_id: str, inst: OcrsInstance) -> "InstanceDocument":
        return cls(
            instance_id=instance_id,
            mrf=inst.mrf,
            delta_nominal=inst.delta_nominal,
            order=inst.order,
            x=inst.x,
            active_label=inst.active_label,
        )


def _check_label(label: Any, where: str) -> Label:
    if isinstance(label, bool) or not isinstance(label, (str, int)):
        raise InstanceFormatError(f"Labels must be strings or integers, got {label!r} in {where}.")
    return label


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFormatError(f"Expected a number in {where}, got {value!r}.")
    if not math.isfinite(value):
        raise InstanceFormatError(f"Expected a finite number in {where}, got {value!r}.")
    return float(value)


def _valuation_to_json(g: SetValuation) -> dict:
    document: dict[str, Any] = {"schema": VALUATION_SCHEMA, "kind": g.kind.value}
    if g.kind is ValuationKind.SUBADDITIVE_TABLE:
        entries = []
        for key, v in g.full_table.items():
            pairs = sorted(key, key=lambda pair: (pair[0], repr(pair[1])))
            entries.append([[[i, lab] for i, lab in pairs], v])
        entries.sort(key=lambda entry: (len(entry[0]), repr(entry[0])))
        document["table"] = entries
    else:
        singles = sorted(g.singleton_values.items(), key=lambda item: (item[0][0], repr(item[0][1])))
        document["singletons"] = [[i, lab, v] for (i, lab), v in singles]
    return document


def _valuation_from_json(document: Any) -> SetValuation:
    if not isinstance(document, dict) or document.get("schema") != VALUATION_SCHEMA:
        raise InstanceFormatError(f"Expected a {VALUATION_SCHEMA!r} valuation document.")
    try:
        kind = ValuationKind(document["kind"])
        if kind is ValuationKind.SUBADDITIVE_TABLE:
            table = {}
            for pairs, v in document["table"]:
                key = frozenset((int(i), _check_label(lab, "valuation table")) for i, lab in pairs)
                table[key] = _number(v, "valuation table")
            return SetValuation(kind=kind, singleton_values={}, full_table=table)
        singles = {
            (int(i), _check_label(lab, "singletons")): _number(v, "singletons")
            for i, lab, v in document["singletons"]
        }
        return SetValuation(kind=kind, singleton_values=singles)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"Malformed valuation: {exc}") from exc


def to_json(document: InstanceDocument) -> dict:
    """Converts an instance document into plain JSON data."""
    mrf = document.mrf
    data: dict[str, Any] = {
        "schema": MRF_SCHEMA,
        "instance_id": document.instance_id,
        "delta_nominal": document.delta_nominal,
        "supports": [list(labels) for labels in mrf.supports],
        "hyperedges": [list(edge) for edge in mrf.hyperedges],
        "vertex_potentials": [
            [[lab, mrf.vertex_potentials[i][lab]] for lab in labels] for i, labels in enumerate(mrf.supports)
        ],
        "edge_potentials": [
            [[list(key), value] for key, value in sorted(table.items(), key=lambda item: repr(item[0]))]
            for table in mrf.edge_potentials
        ],
    }
    if document.valuation is not None:
        data["valuation"] = _valuation_to_json(document.valuation)
    if document.order is not None:
        data["order"] = list(document.order)
    if document.x is not None:
        data["x"] = list(document.x)
        data["active_label"] = document.active_label
    return data


def from_json(data: Any) -> InstanceDocument:
    """Builds an instance document from parsed JSON data.

    Raises:
        InstanceFormatError: If the data is not a valid `mrf/1` document.
    """
    if not isinstance(data, dict):
        raise InstanceFormatError("An instance document must be a JSON object.")
    if data.get("schema") != MRF_SCHEMA:
        raise InstanceFormatError(f"Unknown schema {data.get('schema')!r}; expected {MRF_SCHEMA!r}.")
    try:
        supports = tuple(tuple(_check_label(lab, "supports") for lab in labels) for labels in data["supports"])
        vertex_potentials = tuple(
            {_check_label(lab, "vertex potentials"): _number(v, "vertex potentials") for lab, v in table}
            for table in data.get("vertex_potentials", [])
        )
        edge_potentials = tuple(
            {
                tuple(_check_label(lab, "edge potentials") for lab in key): _number(v, "edge potentials")
                for key, v in table
            }
            for table in data.get("edge_potentials", [])
        )
        mrf = Mrf(
            supports=supports,
            hyperedges=tuple(tuple(int(m) for m in edge) for edge in data.get("hyperedges", [])),
            vertex_potentials=vertex_potentials,
            edge_potentials=edge_potentials,
        )
        delta = data.get("delta_nominal")
        order = data.get("order")
        x = data.get("x")
        return InstanceDocument(
            instance_id=str(data.get("instance_id", "")),
            mrf=mrf,
            valuation=_valuation_from_json(data["valuation"]) if "valuation" in data else None,
            delta_nominal=None if delta is None else _number(delta, "delta_nominal"),
            order=None if order is None else tuple(int(i) for i in order),
            x=None if x is None else tuple(_number(v, "x") for v in x),
            active_label=_check_label(data.get("active_label", ACTIVE_LABEL), "active_label"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"Malformed instance document: {exc}") from exc


def dumps_instance(document: InstanceDocument) -> str:
    return json.dumps(to_json(document), indent=2, ensure_ascii=False) + "\n"


def loads_instance(text: str) -> InstanceDocument:
    """Parses an instance document from a string.

    Raises:
        InstanceFormatError: If the text is not valid JSON or not a valid document.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"Instance document is not valid JSON: {exc}") from exc
    return from_json(data)


def write_instance(document: InstanceDocument, path: Union[str, Path]):
    Path(path).write_text(dumps_instance(document), encoding="utf-8")


def read_instance(path: Union[str, Path]) -> InstanceDocument:
    """Reads an instance document from disk.

    Raises:
        InstanceFormatError: If the file is malformed.
        OSError: If the file cannot be read.
    """
    return loads_instance(Path(path).read_text(encoding="utf-8"))


def write_menu(menu: Menu, path: Union[str, Path], *, instance_id: str = "", revenue: Optional[float] = None):
    """Writes a menu as a `menu/1` document, one entry per option."""
    options = []
    for option in menu.options:
        lottery = sorted(([sorted(subset), p] for subset, p in option.lottery.items()), key=lambda e: (len(e[0]), e[0]))
        options.append({"price": option.price, "lottery": lottery})
    document = {"schema": MENU_SCHEMA, "instance_id": instance_id, "revenue": revenue, "options": options}
    Path(path).write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
