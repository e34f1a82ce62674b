import json

import numpy as np
import pytest

from miura.grid import Grid
from miura.io import InputError, csv_text, fmt, json_text, parse_potential, potential_from_dict, write_potential
from miura.potential import make_delta, make_square_well


def test_minimal_file_is_the_zero_potential(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps({"grid": {"a": -1, "b": 1, "n": 10}}))
    q = parse_potential(path)
    assert q.grid == Grid(-1.0, 1.0, 10)
    assert np.all(q.f.values == 0) and np.all(q.g.values == 0) and q.atoms == ()


def test_off_node_atom_names_its_index():
    data = {"grid": {"a": -1, "b": 1, "n": 10}, "atoms": [{"x": 0.0, "w": 1.0}, {"x": 0.05, "w": 1.0}]}
    with pytest.raises(InputError, match=r"atoms\.1"):
        potential_from_dict(data)


def test_atom_within_tolerance_snaps_to_node():
    q = potential_from_dict({"grid": {"a": -1, "b": 1, "n": 10}, "atoms": [{"x": 0.201, "w": 2.0}]})
    assert q.atoms[0].x == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("make", [lambda g: make_square_well(1.0, 1.3, g), lambda g: make_delta(0.7, 0.5, g)])
def test_write_read_is_bit_identical(tmp_path, make):
    q = make(Grid(-5.0, 5.0, 1000))
    path = tmp_path / "q.json"
    write_potential(q, path)
    back = parse_potential(path)
    assert back.grid == q.grid
    assert np.array_equal(back.f.values, q.f.values)
    assert np.array_equal(back.g.values, q.g.values)
    assert back.atoms == q.atoms
    assert back.label == q.label


@pytest.mark.parametrize(
    "data, path",
    [
        ({"grid": {"a": 1, "b": 0, "n": 10}}, "grid"),
        ({"grid": {"a": 0, "b": 1, "n": 0}}, "grid.n"),
        ({"grid": {"a": 0, "b": 1, "n": 4}, "atoms": [{"x": 0.0}]}, "atoms.0.w"),
        ({"grid": {"a": 0, "b": 1, "n": 4}, "colour": "red"}, "colour"),
        ({"grid": {"a": 0, "b": 1, "n": 4}, "g": [0, 1, 2]}, "g"),
    ],
)
def test_schema_errors_carry_the_field_path(data, path):
    with pytest.raises(InputError, match=path.replace(".", r"\.")):
        potential_from_dict(data)


def test_non_finite_samples_rejected():
    with pytest.raises(InputError):
        potential_from_dict({"grid": {"a": 0, "b": 1, "n": 2}, "g": [0.0, float("nan"), 0.0]})


def test_unreadable_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        parse_potential(bad)
    with pytest.raises(InputError):
        parse_potential(tmp_path / "missing.json")


def test_number_formatting_round_trips():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        assert float(fmt(v)) == v
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(None) == "nan"
    assert csv_text(("a", "b"), [(1, 0.5)]) == "a,b\n1,0.5\n"


def test_json_text_is_deterministic():
    obj = {"b": np.float64(1.0), "a": [np.int64(2), np.inf], "c": np.array([True])}
    text = json_text(obj)
    assert text == json_text(dict(reversed(list(obj.items()))))
    assert json.loads(text) == {"a": [2, "inf"], "b": 1.0, "c": [True]}
