"""Finite-difference ground truth for complex gradients, plus the catalogue of
phase-invariant test losses the SVD rules are checked against.

The oracle perturbs the SVD *input* ``A`` along the real and imaginary axis of
each entry and never touches the factors, so it is independent of every rule
in :mod:`cxsvd.svd_grad`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .matrix_core import SpectrumPolicy, adjoint, real_inner, seeded_random
from .svd_engine import GaugeTransform, SvdFactors, apply_gauge, svd
from .svd_grad import SvdCotangents, svd_jvp_square, svd_vjp_square

__all__ = [
    "wirtinger_grad_scalar",
    "wirtinger_grad_matrix",
    "project_gauge_invariant",
    "dot_test",
    "LossSpec",
    "LOSS_NAMES",
    "make_loss",
    "mixed_trace_loss",
    "projector_loss",
    "catalogue",
    "gauge_drift",
    "validate_loss",
    "DEFAULT_H",
]

DEFAULT_H = 1e-5


def wirtinger_grad_scalar(f, z, h=DEFAULT_H) -> complex:
    """Central-difference ``∂f/∂x + i ∂f/∂y`` of a real function at ``z``."""
    z = complex(z)
    dx = (f(z + h) - f(z - h)) / (2 * h)
    dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return complex(dx, dy)


def wirtinger_grad_matrix(loss, A, h=DEFAULT_H) -> np.ndarray:
    """Entrywise :func:`wirtinger_grad_scalar` of ``loss`` with respect to ``A``.

    Costs ``4 * m * n`` evaluations of ``loss``. Each entry is computed from
    its own perturbed copy of ``A``; nothing is shared between entries.
    """
    A = np.asarray(A, dtype=np.complex128)
    out = np.empty_like(A)
    for idx in np.ndindex(*A.shape):
        def f(z, idx=idx):
            B = A.copy()
            B[idx] = z
            return float(loss(B))
        out[idx] = wirtinger_grad_scalar(f, A[idx], h)
    return out


def _diag_imag(factors, cot):
    d = (np.sum(np.conj(cot.Ubar) * factors.U, axis=0)
         + np.sum(np.conj(cot.Vbar) * factors.V, axis=0))
    return d.imag


def project_gauge_invariant(factors: SvdFactors, cot: SvdCotangents) -> SvdCotangents:
    """Remove the pure-gauge component of ``cot`` by shifting ``Ubar`` along ``i U e_jj``.

    After projection ``Im diag(Ubar† U + Vbar† V) = 0``.
    """
    r = _diag_imag(factors, cot)
    return SvdCotangents(cot.Ubar + factors.U * (1j * r), np.array(cot.Sbar, dtype=np.float64), cot.Vbar.copy())


def dot_test(factors: SvdFactors, cot: SvdCotangents, dA, opts=None, *, diagonal_split="zero_dD"):
    """Return ``(lhs, rhs)`` of the reverse/forward consistency check.

    ``lhs = <Abar, dA>`` with ``Abar`` from the backward rule, ``rhs`` is the
    same first-order change assembled from the forward rule's ``(dU, dS, dV)``.
    """
    dA = np.asarray(dA, dtype=np.complex128)
    Abar = svd_vjp_square(factors, cot, opts)
    kw = {}
    if opts is not None:
        kw = dict(degeneracy_tol=opts.degeneracy_tol, broadening=opts.broadening)
    dU, dS, dV = svd_jvp_square(factors, dA, diagonal_split=diagonal_split, **kw)
    lhs = real_inner(Abar, dA)
    rhs = real_inner(cot.Ubar, dU) + float(np.dot(cot.Sbar, dS)) + real_inner(cot.Vbar, dV)
    return lhs, rhs


# --------------------------------------------------------------------------
# loss catalogue


@dataclass(frozen=True)
class LossSpec:
    """A real loss of ``A`` that only sees ``A`` through its SVD.

    ``couples_u_and_v`` marks losses whose value depends jointly on the
    phases of ``U`` and ``V``; those are the ones that need the diagonal
    term of the backward rule.
    """

    name: str
    couples_u_and_v: bool
    of_factors: Callable[[SvdFactors], float]
    cotangents: Callable[[SvdFactors], SvdCotangents]
    tape_program: Optional[Callable] = None
    description: str = ""

    def __call__(self, A) -> float:
        return self.evaluate(A)

    def evaluate(self, A, method="lapack") -> float:
        return float(self.of_factors(svd(A, method=method)))


def _e00(shape, value):
    out = np.zeros(shape, dtype=np.complex128)
    out[0, 0] = value
    return out


def _frob():
    def cot(f):
        return SvdCotangents(np.zeros_like(f.U), f.S.copy(), np.zeros_like(f.V))

    def prog(t, A):
        _, _, S, _ = t.svd_outputs(A)
        return t.scale_by_real(t.sum(t.hadamard(S, S)), 0.5)

    return LossSpec("frob", False, lambda f: 0.5 * float(np.sum(f.S ** 2)), cot, prog,
                    "half the squared Frobenius norm, 1/2 sum s_i^2")


def _nuclear():
    def cot(f):
        return SvdCotangents(np.zeros_like(f.U), np.ones(f.k), np.zeros_like(f.V))

    def prog(t, A):
        _, _, S, _ = t.svd_outputs(A)
        return t.sum(S)

    return LossSpec("nuclear", False, lambda f: float(np.sum(f.S)), cot, prog,
                    "sum of singular values")


def _uv_overlap():
    def val(f):
        return float((f.U[0, 0] * np.conj(f.V[0, 0])).real)

    def cot(f):
        return SvdCotangents(_e00(f.U.shape, f.V[0, 0]), np.zeros(f.k), _e00(f.V.shape, f.U[0, 0]))

    def prog(t, A):
        _, U, _, V = t.svd_outputs(A)
        return t.real_part(t.hadamard(t.entry(U, 0, 0), t.conjugate(t.entry(V, 0, 0))))

    return LossSpec("uv-overlap", True, val, cot, prog, "Re(U00 conj(V00))")


def _uv_overlap_im():
    def val(f):
        return float((f.U[0, 0] * np.conj(f.V[0, 0])).imag)

    def cot(f):
        return SvdCotangents(_e00(f.U.shape, 1j * f.V[0, 0]), np.zeros(f.k),
                             _e00(f.V.shape, -1j * f.U[0, 0]))

    def prog(t, A):
        _, U, _, V = t.svd_outputs(A)
        return t.imag_part(t.hadamard(t.entry(U, 0, 0), t.conjugate(t.entry(V, 0, 0))))

    return LossSpec("uv-overlap-im", True, val, cot, prog, "Im(U00 conj(V00))")


def _uv_abs2():
    def val(f):
        return float(abs(f.U[0, 0]) ** 2 * abs(f.V[0, 0]) ** 2)

    def cot(f):
        u, v = f.U[0, 0], f.V[0, 0]
        return SvdCotangents(_e00(f.U.shape, 2 * abs(v) ** 2 * u), np.zeros(f.k),
                             _e00(f.V.shape, 2 * abs(u) ** 2 * v))

    def prog(t, A):
        _, U, _, V = t.svd_outputs(A)
        return t.abs_squared_entry(t.hadamard(t.entry(U, 0, 0), t.conjugate(t.entry(V, 0, 0))))

    # product of two separately phase-invariant factors: no joint phase dependence
    return LossSpec("uv-abs2", False, val, cot, prog, "|U00 conj(V00)|^2")


def mixed_trace_loss(B, w) -> LossSpec:
    """``Re Tr(diag(w) U† B V)`` for a fixed m×n ``B`` and real weights ``w``."""
    B = np.asarray(B, dtype=np.complex128)
    w = np.asarray(w, dtype=np.float64)

    def val(f):
        return float(np.sum(w * np.diag(adjoint(f.U) @ B @ f.V)).real)

    def cot(f):
        return SvdCotangents(B @ f.V * w, np.zeros(f.k), adjoint(B) @ f.U * w)

    def prog(t, A):
        _, U, _, V = t.svd_outputs(A)
        M = t.matmul(t.matmul(t.matmul(t.constant(np.diag(w)), t.adjoint_of(U)), t.constant(B)), V)
        return t.real_part(t.trace(M))

    return LossSpec("mixed-trace", True, val, cot, prog, "Re Tr(diag(w) U† B V)")


def projector_loss(B) -> LossSpec:
    """``sum_i |(U† B V)_ii|^2`` for a fixed m×n ``B``."""
    B = np.asarray(B, dtype=np.complex128)

    def c_of(f):
        return np.sum(np.conj(f.U) * (B @ f.V), axis=0)

    def val(f):
        return float(np.sum(np.abs(c_of(f)) ** 2))

    def cot(f):
        c = c_of(f)
        return SvdCotangents(2 * (B @ f.V) * np.conj(c), np.zeros(f.k), 2 * (adjoint(B) @ f.U) * c)

    def prog(t, A):
        _, U, _, V = t.svd_outputs(A)
        M = t.matmul(t.matmul(t.adjoint_of(U), t.constant(B)), V)
        k = M.primal.shape[0]
        return t.sum(t.abs_squared_entry(t.hadamard(M, t.constant(np.eye(k)))))

    return LossSpec("projector", True, val, cot, prog, "sum_i |(U† B V)_ii|^2")


def _entropy():
    def probs(f):
        s2 = f.S ** 2
        return s2 / np.sum(s2)

    def val(f):
        p = probs(f)
        return float(-np.sum(p * np.log(p)))

    def cot(f):
        p = probs(f)
        T = float(np.sum(f.S ** 2))
        sbar = (2 * f.S / T) * (np.sum(p * np.log(p)) - np.log(p))
        return SvdCotangents(np.zeros_like(f.U), sbar, np.zeros_like(f.V))

    def prog(t, A):
        _, _, S, _ = t.svd_outputs(A)
        s2 = t.hadamard(S, S)
        p = t.scalar_mul(t.reciprocal(t.sum(s2)), s2)
        return t.scale_by_real(t.sum(t.hadamard(p, t.log(p))), -1.0)

    return LossSpec("entropy", False, val, cot, prog, "-sum p_i ln p_i, p_i = s_i^2 / sum s^2")


def _u_only():
    def val(f):
        return float(np.sum(np.abs(f.U) ** 4))

    def cot(f):
        return SvdCotangents(4 * np.abs(f.U) ** 2 * f.U, np.zeros(f.k), np.zeros_like(f.V))

    def prog(t, A):
        _, U, _, _ = t.svd_outputs(A)
        a2 = t.abs_squared_entry(U)
        return t.sum(t.hadamard(a2, a2))

    return LossSpec("u-only", False, val, cot, prog, "sum_ij |U_ij|^4")


def _u00sq():
    def cot(f):
        return SvdCotangents(_e00(f.U.shape, 2 * f.U[0, 0]), np.zeros(f.k), np.zeros_like(f.V))

    def prog(t, A):
        _, U, _, _ = t.svd_outputs(A)
        return t.abs_squared_entry(t.entry(U, 0, 0))

    return LossSpec("u00sq", False, lambda f: float(abs(f.U[0, 0]) ** 2), cot, prog, "|U00|^2")


LOSS_NAMES = (
    "frob", "nuclear", "uv-overlap", "uv-overlap-im", "uv-abs2",
    "mixed-trace", "projector", "entropy", "u-only", "u00sq",
)


def _aux(rows, cols, seed):
    rng = np.random.default_rng([seed, rows, cols, 0xB])
    B = seeded_random(rows, cols, int(rng.integers(2**31)), SpectrumPolicy.UNCONSTRAINED)
    w = rng.uniform(0.5, 1.5, size=min(rows, cols))
    return B, w


def make_loss(name: str, rows: int, cols: int, seed: int = 0) -> LossSpec:
    """Build catalogue loss ``name`` for ``rows × cols`` inputs.

    Losses with fixed auxiliary data (``B``, ``w``) draw it deterministically
    from ``(seed, rows, cols)``.
    """
    if name in ("mixed-trace", "projector"):
        B, w = _aux(rows, cols, seed)
        return mixed_trace_loss(B, w) if name == "mixed-trace" else projector_loss(B)
    builders = {
        "frob": _frob, "nuclear": _nuclear, "uv-overlap": _uv_overlap,
        "uv-overlap-im": _uv_overlap_im, "uv-abs2": _uv_abs2, "entropy": _entropy,
        "u-only": _u_only, "u00sq": _u00sq,
    }
    if name not in builders:
        raise KeyError(f"unknown loss {name!r}; choose from {', '.join(LOSS_NAMES)}")
    return builders[name]()


def catalogue(rows: int, cols: int, seed: int = 0) -> dict:
    return {name: make_loss(name, rows, cols, seed) for name in LOSS_NAMES}


def gauge_drift(loss: LossSpec, factors: SvdFactors, rng, n_transforms=20) -> float:
    """Largest change of ``loss`` over ``n_transforms`` random phase gauges."""
    base = loss.of_factors(factors)
    drift = 0.0
    for _ in range(n_transforms):
        g = GaugeTransform.random(factors.k, rng)
        drift = max(drift, abs(loss.of_factors(apply_gauge(factors, g)) - base))
    return drift


def validate_loss(loss: LossSpec, rows: int, cols: int, seed: int = 0, tol=1e-12) -> LossSpec:
    """Reject losses that are not invariant under the SVD phase gauge."""
    rng = np.random.default_rng(seed)
    f = svd(seeded_random(rows, cols, seed))
    drift = gauge_drift(loss, f, rng)
    if drift > tol * max(1.0, abs(loss.of_factors(f))):
        raise ValueError(f"loss {loss.name!r} is not gauge invariant (drift {drift:.2e})")
    return loss
