import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cxsvd.errors import ConvergenceFailure, NonFiniteInput, ShapeMismatch
from cxsvd.matrix_core import adjoint, seeded_random
from cxsvd.svd_engine import GaugeTransform, apply_gauge, jacobi_svd, spectral_gap, svd

METHODS = ["lapack", "jacobi"]


@pytest.mark.parametrize("method", METHODS)
def test_diagonal_input_gives_identity_factors(method):
    f = svd(np.diag([2.0, 1.0]), method=method)
    np.testing.assert_allclose(f.U, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.V, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.S, [2, 1], atol=1e-15)


@pytest.mark.parametrize("method", METHODS)
def test_permutation_matrix(method):
    A = np.array([[0, 1], [1, 0]], dtype=complex)
    f = svd(A, method=method)
    np.testing.assert_allclose(f.S, [1, 1], atol=1e-15)
    for M in (f.U, f.V):
        # every column is a standard basis vector
        assert np.allclose(np.sort(np.abs(M), axis=0), [[0, 0], [1, 1]], atol=1e-15)
        assert np.allclose(M.imag, 0) and np.all(M.real >= -1e-15)
    np.testing.assert_allclose(f.reconstruct(), A, atol=1e-15)


@pytest.mark.parametrize("method", METHODS)
def test_seeded_rectangular_spectrum(method):
    A = seeded_random(5, 3, seed=2)
    f = svd(A, method=method)
    np.testing.assert_allclose(f.S, [4, 2, 1], atol=1e-10)
    assert np.linalg.norm(f.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
    assert f.U.shape == (5, 3) and f.V.shape == (3, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(1, 7),
       st.sampled_from(["WellSeparated", "Unconstrained"]), st.sampled_from(METHODS))
def test_factor_invariants(seed, m, n, policy, method):
    A = seeded_random(m, n, seed, policy)
    f = svd(A, method=method)
    k = min(m, n)
    assert np.linalg.norm(adjoint(f.U) @ f.U - np.eye(k)) <= 1e-12
    assert np.linalg.norm(adjoint(f.V) @ f.V - np.eye(k)) <= 1e-12
    assert np.linalg.norm(f.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
    assert np.all(np.diff(f.S) <= 0) and np.all(f.S >= 0)
    # gauge representative: pivot of each U column is real and non-negative
    p = np.argmax(np.abs(f.U), axis=0)
    piv = f.U[p, np.arange(k)]
    assert np.all(piv.imag == 0) and np.all(piv.real >= 0)
    g = svd(A, method=method)
    assert f.U.tobytes() == g.U.tobytes() and f.V.tobytes() == g.V.tobytes()
    assert f.S.tobytes() == g.S.tobytes()


@pytest.mark.parametrize("shape", [(4, 4), (6, 3), (3, 6)])
def test_jacobi_matches_lapack_representative(shape):
    A = seeded_random(*shape, seed=5)
    a, b = svd(A, method="lapack"), svd(A, method="jacobi")
    np.testing.assert_allclose(a.S, b.S, rtol=1e-13)
    np.testing.assert_allclose(a.U, b.U, atol=1e-12)
    np.testing.assert_allclose(a.V, b.V, atol=1e-12)


def test_jacobi_sweep_budget():
    with pytest.raises(ConvergenceFailure):
        jacobi_svd(seeded_random(6, 6, 0, "Unconstrained"), max_sweeps=1)


@pytest.mark.parametrize("method", METHODS)
def test_rank_deficient_metadata(method):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    A = np.outer(x, y.conj())
    f = svd(A, method=method)
    assert f.rank == 1 and f.rank_deficient
    assert np.linalg.norm(adjoint(f.U) @ f.U - np.eye(3)) <= 1e-12
    assert np.linalg.norm(f.reconstruct() - A) <= 1e-12 * np.linalg.norm(A)


def test_svd_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        svd(np.array([[np.nan, 0], [0, 1]]))


def test_real_input_stays_real():
    f = svd(seeded_random(4, 4, 1, real=True))
    assert np.all(f.U.imag == 0) and np.all(f.V.imag == 0)


def test_apply_gauge_examples():
    f = svd(np.diag([2.0, 1.0]))
    same = apply_gauge(f, GaugeTransform(np.zeros(2)))
    np.testing.assert_array_equal(same.U, f.U)
    flipped = apply_gauge(f, GaugeTransform(np.array([np.pi, 0.0])))
    np.testing.assert_allclose(flipped.U, np.diag([-1, 1]), atol=1e-15)
    np.testing.assert_allclose(flipped.V, np.diag([-1, 1]), atol=1e-15)
    np.testing.assert_allclose(flipped.reconstruct(), np.diag([2, 1]), atol=1e-15)
    with pytest.raises(ShapeMismatch):
        apply_gauge(f, GaugeTransform(np.zeros(3)))


def test_apply_gauge_keeps_reconstruction():
    rng = np.random.default_rng(0)
    for seed in range(10):
        f = svd(seeded_random(5, 4, seed))
        g = apply_gauge(f, GaugeTransform.random(f.k, rng))
        np.testing.assert_array_equal(g.S, f.S)
        assert np.linalg.norm(g.reconstruct() - f.reconstruct()) <= 1e-12


@pytest.mark.parametrize("S, expected", [([2, 1], 0.75), ([1, 1], 0.0), ([5], np.inf), ([0.5, 0.25], 0.1875)])
def test_spectral_gap(S, expected):
    assert spectral_gap(np.array(S, dtype=float)) == expected
