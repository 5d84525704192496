"""Canonical JSON: byte-stable rendering and atomic writes."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pwqlyap import jsonio


def test_float_roundtrip_is_exact():
    values = [0.1, 1.0 / 3.0, 1e-300, 1e300, 2.0 ** -1074,
              123456789.123456789, -7.25]
    for value in values:
        assert jsonio.loads(jsonio.dumps(value)) == value


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip_property(value):
    assert jsonio.loads(jsonio.dumps(value)) == value


def test_negative_zero_normalized():
    assert jsonio.dumps(-0.0) == "0\n"
    assert jsonio.dumps([-0.0, 0.0]) == "[0, 0]\n"


def test_keys_keep_insertion_order():
    assert jsonio.dumps({"b": 1, "a": [2, {"z": 3, "y": 4}]}) \
        == '{"b": 1, "a": [2, {"z": 3, "y": 4}]}\n'


def test_numpy_scalars_render_as_numbers():
    assert jsonio.dumps({"x": np.float64(0.5), "n": [np.float64(-0.0)]}) \
        == '{"x": 0.5, "n": [0]}\n'


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        jsonio.dumps(float("nan"))
    with pytest.raises(ValueError):
        jsonio.dumps([math.inf])


def test_unserializable_rejected():
    with pytest.raises(TypeError):
        jsonio.dumps({1: 2})
    with pytest.raises(TypeError):
        jsonio.dumps(object())


def test_write_then_read(tmp_path):
    path = tmp_path / "out.json"
    jsonio.write_file(str(path), {"a": [1.5, True, None, "s"]})
    assert jsonio.read_file(str(path)) == {"a": [1.5, True, None, "s"]}
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


def test_failed_write_leaves_nothing(tmp_path):
    path = tmp_path / "bad.json"
    with pytest.raises(TypeError):
        jsonio.write_text(str(path), 123)
    assert list(tmp_path.iterdir()) == []


def test_overwrite_is_atomic(tmp_path):
    path = tmp_path / "out.json"
    jsonio.write_file(str(path), {"v": 1})
    jsonio.write_file(str(path), {"v": 2})
    assert jsonio.read_file(str(path)) == {"v": 2}
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
