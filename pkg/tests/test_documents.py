import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from entcap.documents import (
    DocumentError,
    OperatorDocument,
    ResultDocument,
    decode_complex_array,
    encode_complex_array,
    family_from_dict,
    load_family,
    to_plain,
)
from entcap.errors import DimensionMismatch
from entcap.gco import FamilyDimensionError, clock, shift
from entcap.linalg import random_unitary

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
complex_arrays = arrays(np.complex128, st.tuples(st.integers(1, 4), st.integers(1, 4)),
                        elements=st.complex_numbers(allow_nan=False, allow_infinity=False))


@settings(max_examples=60, deadline=None)
@given(complex_arrays)
def test_complex_array_round_trip_is_exact(a):
    text = json.dumps(encode_complex_array(a))
    back = decode_complex_array(json.loads(text), 2, "x")
    assert np.array_equal(back, a)


def test_decode_errors_name_field():
    with pytest.raises(DocumentError) as exc:
        decode_complex_array([[1, 2, 3]], 2, "op.matrix")
    assert exc.value.field == "op.matrix"
    with pytest.raises(DocumentError):
        decode_complex_array([["a", 1]], 1, "v")
    with pytest.raises(DocumentError):
        decode_complex_array([[float("nan"), 0]], 1, "v")


def test_operator_round_trip(tmp_path):
    u = random_unitary(6, 3).matrix
    path = tmp_path / "u.json"
    OperatorDocument(u, (2, 3), "random").dump(path)
    doc = OperatorDocument.load(path)
    assert np.array_equal(doc.matrix, u)
    assert doc.dims == (2, 3) and doc.label == "random"


def test_operator_rejections(tmp_path):
    with pytest.raises(DocumentError) as exc:
        OperatorDocument.from_dict({"matrix": encode_complex_array(2 * np.eye(2))})
    assert "matrix" in str(exc.value)
    with pytest.raises(DocumentError):
        OperatorDocument.from_dict({"dims": [2, 2]})
    with pytest.raises(DocumentError):
        OperatorDocument.from_dict({"matrix": encode_complex_array(np.eye(2)), "dims": [2]})
    with pytest.raises(DimensionMismatch):
        OperatorDocument.from_dict({"matrix": encode_complex_array(np.eye(4)), "dims": [2, 3]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DocumentError):
        OperatorDocument.load(bad)
    with pytest.raises(DocumentError):
        OperatorDocument.load(tmp_path / "missing.json")


def test_operator_accepts_small_residual():
    u = np.eye(2) * (1 + 1e-9)
    assert OperatorDocument.from_dict({"matrix": encode_complex_array(u)}).dims is None


def test_family_from_dict(tmp_path):
    fam = family_from_dict({"m": 3, "n": 3, "members": ["I", "Z", "X"], "name": "sp3"})
    assert np.array_equal(fam.members[1], clock(3))
    assert np.array_equal(fam.members[2], shift(3))
    mixed = {"m": 2, "n": 2, "members": ["I", encode_complex_array(np.diag([1, -1]))],
             "control_basis": encode_complex_array(np.eye(2))}
    path = tmp_path / "fam.json"
    path.write_text(json.dumps(mixed))
    assert np.array_equal(load_family(path).members[1], np.diag([1, -1]))


def test_family_errors():
    with pytest.raises(FamilyDimensionError):
        family_from_dict({"m": 3, "n": 2, "members": ["I", "I", "I"]})
    with pytest.raises(DocumentError) as exc:
        family_from_dict({"m": 2, "n": 2, "members": ["I", "Y"]})
    assert exc.value.field == "family.members[1]"
    with pytest.raises(DocumentError):
        family_from_dict({"m": 2, "n": 2, "members": ["I"]})
    with pytest.raises(DocumentError):
        family_from_dict({"n": 2, "members": ["I"]})
    with pytest.raises(DimensionMismatch):
        family_from_dict({"m": 2, "n": 2, "members": ["I", encode_complex_array(np.eye(3))]})


def test_to_plain():
    out = to_plain({"a": np.array([1 + 2j]), "b": np.float64(0.5), "c": (np.int64(3), True),
                    "d": np.array([1.0, 2.0]), "e": None})
    assert out == {"a": [[1.0, 2.0]], "b": 0.5, "c": [3, True], "d": [1.0, 2.0], "e": None}
    with pytest.raises(TypeError):
        to_plain(object())


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=1, max_size=5), st.integers(0, 2**63 - 1))
def test_result_document_round_trip(values, seed):
    doc = ResultDocument(command=["entcap", "metric"], label="x",
                         values={"v": values, "z": np.array([1j, 2.0])},
                         bound_status="numeric_estimate", diagnostics={"k": 1},
                         version="0.1.0", seed=seed)
    back = ResultDocument.from_json(doc.to_json())
    assert back == doc
    assert back.to_json() == doc.to_json()


def test_result_document_rejects_nan():
    with pytest.raises(ValueError):
        ResultDocument(command=[], label=None, values={"x": float("nan")}).to_json()
    with pytest.raises(DocumentError):
        ResultDocument.from_json('{"command": []}')
