"""Thin complex SVD ``A = U diag(S) V†`` with a deterministic phase gauge.

The SVD is only unique up to ``U -> U Λ, V -> V Λ`` with ``Λ`` a diagonal
matrix of phases. :func:`svd` picks one representative of that orbit: in
every column of ``U`` the entry of largest magnitude is made real and
non-negative (lowest row index wins ties), and the matching column of ``V``
is rotated by the same phase.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, ShapeMismatch
from .matrix_core import adjoint, as_matrix

__all__ = [
    "SvdFactors",
    "GaugeTransform",
    "svd",
    "jacobi_svd",
    "gauge_normalize",
    "apply_gauge",
    "spectral_gap",
    "RANK_TOL_FACTOR",
]

RANK_TOL_FACTOR = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors: ``U`` is m×k, ``S`` has length k, ``V`` is n×k."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    rank_tol: float = field(default=0.0, compare=False)

    def __post_init__(self):
        k = self.S.shape[0]
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != k or self.V.shape[1] != k:
            raise ShapeMismatch(
                f"inconsistent factor shapes U{self.U.shape} S{self.S.shape} V{self.V.shape}"
            )

    @property
    def shape(self):
        return self.U.shape[0], self.V.shape[0]

    @property
    def k(self) -> int:
        return self.S.shape[0]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.S > self.rank_tol))

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.k

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ adjoint(self.V)


@dataclass(frozen=True)
class GaugeTransform:
    """Diagonal phase matrix ``Λ = diag(exp(i θ_j))``."""

    thetas: np.ndarray

    @property
    def phases(self) -> np.ndarray:
        return np.exp(1j * np.asarray(self.thetas, dtype=np.float64))

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.phases)

    @classmethod
    def random(cls, k: int, rng: np.random.Generator) -> "GaugeTransform":
        return cls(rng.uniform(-np.pi, np.pi, size=k))


def _rank_tol(shape, s):
    smax = float(s[0]) if s.size else 0.0
    return RANK_TOL_FACTOR * max(shape) * smax


def gauge_normalize(U, S, V) -> SvdFactors:
    """Rotate each column pair so the largest-magnitude entry of ``U[:, j]`` is real ≥ 0."""
    U = np.array(U, dtype=np.complex128)
    V = np.array(V, dtype=np.complex128)
    S = np.array(S, dtype=np.float64)
    p = np.argmax(np.abs(U), axis=0)
    pivot = U[p, np.arange(U.shape[1])]
    mag = np.abs(pivot)
    # conj(u)/|u| rather than exp(-i arg u): keeps real inputs exactly real
    phase = np.where(mag > 0, np.conj(pivot) / np.where(mag > 0, mag, 1.0), 1.0)
    U *= phase
    V *= phase
    # the pivot itself is now real by construction; drop rounding residue
    U[p, np.arange(U.shape[1])] = mag
    return SvdFactors(U, S, V, rank_tol=_rank_tol((U.shape[0], V.shape[0]), S))


def _complete_columns(W, good):
    """Replace the columns of ``W`` not flagged ``good`` by an orthonormal completion."""
    m = W.shape[0]
    basis = [W[:, j] for j in range(W.shape[1]) if good[j]]
    out = W.copy()
    e = 0
    for j in range(W.shape[1]):
        if good[j]:
            continue
        while True:
            cand = np.zeros(m, dtype=np.complex128)
            cand[e % m] = 1.0
            e += 1
            for b in basis:
                cand -= b * np.vdot(b, cand)
            for b in basis:  # second pass for orthogonality
                cand -= b * np.vdot(b, cand)
            nrm = np.linalg.norm(cand)
            if nrm > 1e-8:
                cand /= nrm
                break
        basis.append(cand)
        out[:, j] = cand
    return out


def _hestenes(W, max_sweeps, tol):
    """One-sided Jacobi on the columns of ``W`` (m ≥ n). Returns W·V, V."""
    n = W.shape[1]
    W = W.copy()
    V = np.eye(n, dtype=np.complex128)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = W[:, p], W[:, q]
                alpha = np.vdot(wp, wp).real
                beta = np.vdot(wq, wq).real
                gamma = np.vdot(wp, wq)
                g = abs(gamma)
                if g == 0.0 or g <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                ph = np.conj(gamma) / g
                zeta = (beta - alpha) / (2.0 * g)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                wq = wq * ph
                W[:, p], W[:, q] = c * wp - s * wq, s * wp + c * wq
                vp, vq = V[:, p], V[:, q] * ph
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return W, V
    raise ConvergenceFailure(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")


def jacobi_svd(A, *, max_sweeps=60, tol=1e-15):
    """Raw (un-normalized) thin SVD by one-sided Jacobi rotations.

    Returns ``(U, S, V)`` with ``S`` sorted non-increasing; equal values keep
    the column order in which the rotations left them.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        V, S, U = jacobi_svd(adjoint(A), max_sweeps=max_sweeps, tol=tol)
        return U, S, V
    W, V = _hestenes(A, max_sweeps, tol)
    S = np.linalg.norm(W, axis=0)
    order = np.argsort(-S, kind="stable")
    S, W, V = S[order], W[:, order], V[:, order]
    floor = np.finfo(float).eps * max(m, n) * (S[0] if S[0] > 0 else 1.0)
    good = S > floor
    U = np.zeros_like(W)
    U[:, good] = W[:, good] / S[good]
    if not np.all(good):
        U = _complete_columns(U, good)
    return U, S, V


def svd(A, *, method="lapack", max_sweeps=60) -> SvdFactors:
    """Gauge-normalized thin SVD.

    ``method="lapack"`` calls ``numpy.linalg.svd``; ``method="jacobi"`` uses
    the one-sided Jacobi routine in this module. Either way the phase gauge
    is fixed last, so repeated calls on the same matrix are bitwise equal.
    """
    A = as_matrix(A)
    if method == "lapack":
        try:
            U, S, Vh = np.linalg.svd(A, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        V = adjoint(Vh)
    elif method == "jacobi":
        U, S, V = jacobi_svd(A, max_sweeps=max_sweeps)
    else:
        raise ValueError(f"unknown svd method {method!r}")
    return gauge_normalize(U, S, V)


def apply_gauge(factors: SvdFactors, gauge: GaugeTransform) -> SvdFactors:
    """``U' = U Λ``, ``V' = V Λ``; ``S`` and the product ``U S V†`` are unchanged."""
    ph = gauge.phases
    if ph.shape != (factors.k,):
        raise ShapeMismatch(f"gauge has {ph.shape[0]} phases, factors have k={factors.k}")
    return SvdFactors(factors.U * ph, factors.S.copy(), factors.V * ph, rank_tol=factors.rank_tol)


def spectral_gap(S) -> float:
    """Smallest ``|s_i² - s_j²|`` over pairs, relative to ``max(1, s_max²)``."""
    s2 = np.sort(np.asarray(S, dtype=np.float64) ** 2)
    if s2.size < 2:
        return float("inf")
    return float(np.min(np.diff(s2)) / max(1.0, s2[-1]))
