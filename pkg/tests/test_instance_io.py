"""Tests for instance and menu documents."""

import json

import numpy as np
import pytest

from src.mrf_mechanisms.exceptions import InstanceFormatError
from src.mrf_mechanisms.generator import generate_instance, generate_ocrs_instance, generate_prophet_instance
from src.mrf_mechanisms.instance_io import (
    MENU_SCHEMA,
    MRF_SCHEMA,
    InstanceDocument,
    dumps_instance,
    from_json,
    loads_instance,
    read_instance,
    to_json,
    write_instance,
    write_menu,
)
from src.mrf_mechanisms.mechanisms import Menu, MenuOption
from src.mrf_mechanisms.models import ExperimentConfig
from src.mrf_mechanisms.mrf import Mrf, joint_table
from src.mrf_mechanisms.prophet import expected_max

CONFIG = ExperimentConfig(seed=3, n_range=(2, 3), support_range=(1, 3), potential_cap=1.0)


@pytest.fixture
def valid_data(coupled_pair) -> dict:
    """A valid instance document as parsed JSON."""
    return to_json(InstanceDocument(instance_id="pair", mrf=coupled_pair, delta_nominal=0.5))


@pytest.mark.parametrize("buyer_class", ["additive", "unit_demand", "subadditive"])
def test_written_instance_reads_back(tmp_path, buyer_class):
    """Tests that a written instance reads back to the same document and distribution."""
    document = generate_instance(CONFIG, 7, buyer_class=buyer_class)
    path = tmp_path / "instance.json"

    write_instance(document, path)
    loaded = read_instance(path)

    assert dumps_instance(loaded) == path.read_text(encoding="utf-8")
    assert loaded.instance_id == "instance-7"
    assert loaded.valuation.kind is document.valuation.kind
    np.testing.assert_array_equal(joint_table(loaded.mrf).prob, joint_table(document.mrf).prob)


def test_generation_is_byte_identical_per_seed():
    """Tests that the same seed always produces the same bytes."""
    for seed in (0, 1, 2):
        assert dumps_instance(generate_instance(CONFIG, seed)) == dumps_instance(generate_instance(CONFIG, seed))


def test_mixed_label_types_survive():
    """Tests that integer and string labels keep their types."""
    mrf = Mrf(
        supports=((0, "hi"), ("lo", 1)),
        hyperedges=((0, 1),),
        edge_potentials=({(0, "lo"): 0.25, (0, 1): 0.0, ("hi", "lo"): -0.5, ("hi", 1): 0.125},),
    )

    loaded = loads_instance(dumps_instance(InstanceDocument(instance_id="mixed", mrf=mrf)))

    assert loaded.mrf.supports == ((0, "hi"), ("lo", 1))
    assert loaded.mrf.edge_potentials[0][("hi", "lo")] == -0.5


def test_prophet_document(tmp_path):
    """Tests that a prophet instance keeps its order and value maps through a file."""
    inst = generate_prophet_instance(CONFIG, 4)
    path = tmp_path / "prophet.json"

    write_instance(InstanceDocument.from_prophet("p", inst), path)
    loaded = read_instance(path).prophet_instance()

    assert loaded.order == inst.order
    assert expected_max(loaded) == expected_max(inst)


def test_ocrs_document():
    """Tests that an OCRS instance keeps x and that x defaults to the exact marginals."""
    inst = generate_ocrs_instance(CONFIG, 5)

    document = loads_instance(dumps_instance(InstanceDocument.from_ocrs("o", inst)))

    assert document.ocrs_instance().x == inst.x
    without_x = InstanceDocument(instance_id="o", mrf=inst.mrf, order=inst.order)
    assert without_x.ocrs_instance().x == pytest.approx(inst.x, abs=1e-12)


def test_ocrs_document_needs_binary_supports():
    """Tests that a three-label vertex is not a valid OCRS element."""
    document = InstanceDocument(instance_id="wide", mrf=Mrf(supports=((0, 1, 2),)))

    with pytest.raises(InstanceFormatError):
        document.ocrs_instance()


def test_missing_valuation(coupled_pair):
    """Tests that asking a valuation-free document for a buyer or value maps raises."""
    document = InstanceDocument(instance_id="bare", mrf=coupled_pair)

    with pytest.raises(InstanceFormatError):
        document.valuation_distribution()
    with pytest.raises(InstanceFormatError):
        document.prophet_instance()


@pytest.mark.parametrize(
    "mutate",
    [
        # --- Invalid Cases ---
        lambda d: d.update(schema="mrf/2"),  # Unknown schema
        lambda d: d.pop("supports"),  # Missing supports
        lambda d: d.update(supports=[[True, False], [0, 1]]),  # Boolean labels
        lambda d: d.update(supports=[[0.5, 1], [0, 1]]),  # Float label
        lambda d: d["vertex_potentials"][0][0].__setitem__(1, float("nan")),  # Non-finite potential
        lambda d: d["vertex_potentials"][0][0].__setitem__(1, "1.0"),  # Potential as a string
        lambda d: d.update(hyperedges=[[0, 5]]),  # Vertex out of range
        lambda d: d.update(valuation={"schema": "val/0"}),  # Unknown valuation schema
        lambda d: d.update(valuation={"schema": "val/1", "kind": "coverage", "singletons": []}),  # Unknown kind
    ],
)
def test_malformed_documents(valid_data, mutate):
    """Tests that malformed documents raise InstanceFormatError."""
    mutate(valid_data)

    with pytest.raises(InstanceFormatError):
        from_json(valid_data)


def test_valid_document_parses(valid_data):
    """Tests that the unmodified fixture document parses."""
    document = from_json(valid_data)

    assert valid_data["schema"] == MRF_SCHEMA
    assert document.delta_nominal == 0.5
    assert document.valuation is None


@pytest.mark.parametrize(
    "text",
    [
        # --- Invalid Cases ---
        "{not json",  # Syntax error
        "[1, 2, 3]",  # Not an object
        '{"schema": "mrf/1", "supports": [[0, 1]], "vertex_potentials": [[[0, NaN], [1, 0]]]}',  # NaN literal
    ],
)
def test_loads_rejects_bad_text(text):
    """Tests that unparsable or non-object text is rejected."""
    with pytest.raises(InstanceFormatError):
        loads_instance(text)


def test_write_menu(tmp_path):
    """Tests the menu document layout and that decimal prices are written exactly."""
    menu = Menu(
        (
            MenuOption(lottery={frozenset({1, 0}): 0.5, frozenset(): 0.5}, price=0.1),
            MenuOption(lottery={frozenset({1}): 1.0}, price=2.0),
        )
    )
    path = tmp_path / "menu.json"

    write_menu(menu, path, instance_id="m", revenue=1.25)
    document = json.loads(path.read_text(encoding="utf-8"))

    assert document["schema"] == MENU_SCHEMA
    assert document["instance_id"] == "m"
    assert document["revenue"] == 1.25
    assert document["options"][0] == {"price": 0.1, "lottery": [[[], 0.5], [[0, 1], 0.5]]}
    assert document["options"][1]["lottery"] == [[[1], 1.0]]
