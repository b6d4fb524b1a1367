import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adiabatic_audit.io import (
    dumps_json,
    format_float,
    load_matrix_file,
    read_trajectory_csv,
    write_csv,
    write_json,
    write_trajectory_csv,
)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert float(format_float(x)) == x


def test_nonfinite_formatting():
    assert format_float(np.nan) == "nan"
    assert format_float(-np.inf) == "-inf"
    assert dumps_json({"a": np.nan, "b": [1.0, None, True]}) == '{\n  "a": null,\n  "b": [1, null, true]\n}'


def test_json_keeps_order_and_parses(tmp_path):
    obj = {"z": 1, "a": {"nested": [0.1, 2]}, "m": "ü"}
    path = write_json(tmp_path / "x.json", obj)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert list(json.loads(raw.decode("utf-8"))) == ["z", "a", "m"]
    assert json.loads(raw)["a"]["nested"][0] == 0.1


def test_json_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps_json({"x": object()})


def test_csv_line_endings(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [[1.0, "x"], [np.float64(0.1), "y"]])
    assert path.read_bytes() == b"a,b\n1,x\n0.10000000000000001,y\n"


def test_trajectory_round_trip(tmp_path, rng):
    times = np.linspace(0, 1, 6)
    states = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    coeffs = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    dist, defi = rng.uniform(size=6), rng.uniform(size=6)
    path = write_trajectory_csv(tmp_path / "tr.csv", times, states, coeffs, dist, defi,
                                {"yukalov_t1": np.r_[np.nan, rng.uniform(size=5)]})
    cols = read_trajectory_csv(path)
    assert list(cols)[:5] == ["t", "re_psi_1", "im_psi_1", "re_psi_2", "im_psi_2"]
    np.testing.assert_array_equal(cols["im_psi_2"], states[:, 1].imag)
    np.testing.assert_array_equal(cols["abs_a_1"], np.abs(coeffs[:, 0]))
    np.testing.assert_array_equal(cols["distance"], dist)
    assert np.isnan(cols["yukalov_t1"][0])


def test_matrix_file_formats(tmp_path):
    times = np.array([0.0, 1.0])
    mats = np.array([np.eye(2), [[0, 1j], [-1j, 0]]], dtype=complex)
    np.savez(tmp_path / "h.npz", times=times, matrices=mats)
    t, m = load_matrix_file(tmp_path / "h.npz")
    np.testing.assert_array_equal(m, mats)
    (tmp_path / "h.json").write_text(json.dumps({"times": times.tolist(), "real": mats.real.tolist(),
                                                 "imag": mats.imag.tolist()}))
    t, m = load_matrix_file(tmp_path / "h.json")
    np.testing.assert_array_equal(m, mats)


def test_matrix_file_validation(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"times": [1.0, 0.0], "real": [[[1]], [[2]]]}))
    with pytest.raises(ValueError, match="increasing"):
        load_matrix_file(tmp_path / "bad.json")
    (tmp_path / "shape.json").write_text(json.dumps({"times": [0.0], "real": [[1, 2]]}))
    with pytest.raises(ValueError, match="shape"):
        load_matrix_file(tmp_path / "shape.json")
