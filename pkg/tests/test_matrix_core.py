import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cxsvd.errors import NonFiniteInput, NotSquare, ShapeMismatch
from cxsvd.matrix_core import (
    diag_part, hadamard, load_matrix, matrix_from_dict, matrix_to_dict, offdiag_part, real_inner,
    save_matrix, seeded_random,
)

from conftest import crandn

seeds = st.integers(0, 2**32 - 1)


def test_hadamard_examples():
    X = np.array([[1, 2], [3, 4]], dtype=complex)
    np.testing.assert_array_equal(hadamard(X, np.eye(2)), [[1, 0], [0, 4]])
    Y = np.diag([1j, 1j])
    np.testing.assert_array_equal(hadamard(Y, Y), [[-1, 0], [0, -1]])


def test_hadamard_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        hadamard(np.ones((2, 2)), np.ones((2, 3)))


def test_trace_hadamard_identity_100_triples():
    rng = np.random.default_rng(0)
    for _ in range(100):
        A, B, C = (crandn(rng, 4, 4) for _ in range(3))
        lhs = np.trace(A @ hadamard(C, B))
        rhs = np.trace(hadamard(C.T, A) @ B)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 6))
def test_hadamard_algebra(seed, n):
    rng = np.random.default_rng(seed)
    A, B, C = (crandn(rng, n, n) for _ in range(3))
    np.testing.assert_allclose(hadamard(A, B), hadamard(B, A), rtol=1e-14)
    np.testing.assert_allclose(hadamard(hadamard(A, B), C), hadamard(A, hadamard(B, C)), rtol=1e-14)
    np.testing.assert_array_equal(hadamard(A, B).T, hadamard(A.T, B.T))
    lhs = np.trace(A @ hadamard(C, B))
    rhs = np.trace(hadamard(C.T, A) @ B)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_diag_and_offdiag_examples():
    X = np.array([[1, 2], [3, 4]], dtype=complex)
    np.testing.assert_array_equal(diag_part(X), [[1, 0], [0, 4]])
    np.testing.assert_array_equal(offdiag_part(X), [[0, 2], [3, 0]])
    np.testing.assert_array_equal(diag_part(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(offdiag_part(np.eye(3)), np.zeros((3, 3)))


def test_diag_offdiag_partition(rng):
    X = crandn(rng, 5, 5)
    np.testing.assert_array_equal(diag_part(X) + offdiag_part(X), X)
    np.testing.assert_array_equal(offdiag_part(diag_part(X)), np.zeros((5, 5)))


@pytest.mark.parametrize("fn", [diag_part, offdiag_part])
def test_masks_need_square(fn):
    with pytest.raises(NotSquare):
        fn(np.ones((2, 3)))


def test_real_inner_examples(rng):
    assert real_inner([[1]], [[1]]) == 1
    assert real_inner([[1j]], [[1]]) == 0
    X = crandn(rng, 3, 3)
    assert real_inner(X, X) == pytest.approx(np.linalg.norm(X) ** 2, rel=1e-14)
    with pytest.raises(ShapeMismatch):
        real_inner(np.ones((2, 2)), np.ones((3, 3)))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_real_inner_symmetric_and_blind_to_i(seed):
    rng = np.random.default_rng(seed)
    X, Y = crandn(rng, 3, 4), crandn(rng, 3, 4)
    assert real_inner(X, Y) == pytest.approx(real_inner(Y, X), rel=1e-13, abs=1e-13)
    assert abs(real_inner(X, 1j * X)) <= 1e-12 * np.linalg.norm(X) ** 2


@pytest.mark.parametrize("shape, expected", [((3, 3), [4, 2, 1]), ((4, 2), [2, 1]), ((2, 5), [2, 1])])
def test_seeded_well_separated_spectrum(shape, expected):
    A = seeded_random(*shape, seed=7 if shape == (3, 3) else 1)
    assert A.shape == shape
    np.testing.assert_allclose(np.linalg.svd(A, compute_uv=False), expected, atol=1e-12)


def test_seeded_random_is_deterministic():
    for policy in ("WellSeparated", "Unconstrained"):
        a = seeded_random(4, 3, 9, policy)
        b = seeded_random(4, 3, 9, policy)
        assert a.tobytes() == b.tobytes()
    assert not np.array_equal(seeded_random(3, 3, 1), seeded_random(3, 3, 2))


def test_seeded_random_real_has_zero_imaginary_part():
    A = seeded_random(4, 4, 3, real=True)
    assert np.all(A.imag == 0)
    np.testing.assert_allclose(np.linalg.svd(A, compute_uv=False), [8, 4, 2, 1], atol=1e-12)


def test_matrix_file_roundtrip(tmp_path, rng):
    A = crandn(rng, 2, 3)
    path = tmp_path / "a.json"
    save_matrix(path, A)
    obj = json.loads(path.read_text())
    assert obj["rows"] == 2 and obj["cols"] == 3 and len(obj["data"]) == 6
    assert obj["data"][1] == [A[0, 1].real, A[0, 1].imag]  # row-major
    np.testing.assert_array_equal(load_matrix(path), A)


def test_matrix_file_rejects_bad_input():
    with pytest.raises(ShapeMismatch):
        matrix_from_dict({"rows": 2, "cols": 2, "data": [[1, 0]] * 3})
    with pytest.raises(ShapeMismatch):
        matrix_from_dict({"rows": 1, "cols": 1})
    with pytest.raises(NonFiniteInput):
        matrix_from_dict({"rows": 1, "cols": 1, "data": [[float("nan"), 0]]})
    assert matrix_to_dict([[1 + 2j]]) == {"rows": 1, "cols": 1, "data": [[1.0, 2.0]]}
