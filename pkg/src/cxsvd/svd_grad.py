"""Reverse- and forward-mode derivative rules for the complex SVD.

Everything here works in the *gradient* convention: for a real loss ``L`` and
a complex matrix ``X`` the cotangent is ``∇_X L = 2 ∂L/∂X*``, so that a first
order change is ``dL = Re Tr(∇_X L† dX)``.  For the real singular values the
cotangent is the ordinary partial derivative.

Square case.  With ``A = U S V†`` and cotangents ``(Ubar, Sbar, Vbar)``::

    Abar = U Sbar V† + U (J + J†) S V† + U S (K + K†) V†
           + 1/2 U S⁻¹ (L† - L) V†

    J = F ∘ (U† Ubar),  K = F ∘ (V† Vbar),  L = I ∘ (V† Vbar),
    F_ij = 1 / (s_j² - s_i²) for i ≠ j, 0 on the diagonal.

The last term exists only for complex inputs: it comes from the purely
imaginary diagonals of ``U† dU`` and ``V† dV``.  It is nonzero only when the
loss depends on the phases of ``U`` and ``V`` jointly.

Thin rectangular case adds ``(I - U U†) Ubar S⁻¹ V† + U S⁻¹ Vbar† (I - V V†)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, ShapeMismatch, SingularSInverse
from .matrix_core import adjoint
from .svd_engine import SvdFactors, spectral_gap

__all__ = [
    "SvdCotangents",
    "VjpOptions",
    "VjpIntermediates",
    "JvpIntermediates",
    "build_gap_matrix",
    "vjp_intermediates",
    "diagonal_term",
    "rect_projector_terms",
    "svd_vjp",
    "svd_vjp_square",
    "svd_vjp_rect",
    "svd_vjp_square_variant",
    "jvp_intermediates",
    "svd_jvp_square",
    "gauge_residual",
]


@dataclass(frozen=True)
class SvdCotangents:
    """Gradients of a real loss with respect to ``U``, ``S`` and ``V``."""

    Ubar: np.ndarray
    Sbar: np.ndarray
    Vbar: np.ndarray

    @classmethod
    def zeros(cls, factors: SvdFactors) -> "SvdCotangents":
        return cls(np.zeros_like(factors.U), np.zeros(factors.k), np.zeros_like(factors.V))

    def check(self, factors: SvdFactors) -> None:
        if (self.Ubar.shape != factors.U.shape or self.Vbar.shape != factors.V.shape
                or np.shape(self.Sbar) != factors.S.shape):
            raise ShapeMismatch(
                f"cotangent shapes Ubar{self.Ubar.shape} Sbar{np.shape(self.Sbar)} "
                f"Vbar{self.Vbar.shape} do not match factors U{factors.U.shape} V{factors.V.shape}"
            )
        if np.iscomplexobj(self.Sbar) and np.any(np.imag(self.Sbar) != 0):
            raise ValueError("Sbar must be real")

    def __add__(self, other: "SvdCotangents") -> "SvdCotangents":
        return SvdCotangents(self.Ubar + other.Ubar, self.Sbar + other.Sbar, self.Vbar + other.Vbar)


@dataclass(frozen=True)
class VjpOptions:
    """Knobs for the backward rule.

    ``diagonal_sign`` exists for mutation testing of the harness; leave it at 1.
    """

    include_diagonal_term: bool = True
    broadening: float = 0.0
    degeneracy_tol: float = 1e-10
    sinv_rtol: float = 1e-12
    diagonal_sign: float = 1.0


DEFAULT_OPTIONS = VjpOptions()


@dataclass(frozen=True)
class VjpIntermediates:
    J: np.ndarray
    K: np.ndarray
    Ldiag: np.ndarray


@dataclass(frozen=True)
class JvpIntermediates:
    dP: np.ndarray
    dC: np.ndarray
    dD: np.ndarray
    dS: np.ndarray


def build_gap_matrix(S, degeneracy_tol=1e-10, broadening=0.0) -> np.ndarray:
    """Real antisymmetric ``F`` with ``F_ij = 1/(s_j² - s_i²)`` off the diagonal.

    A positive ``broadening`` ε replaces the reciprocal by the Lorentzian
    ``d / (d² + ε)``, which stays finite at degeneracies.
    """
    S = np.asarray(S, dtype=np.float64)
    s2 = S ** 2
    d = s2[None, :] - s2[:, None]
    if broadening > 0:
        F = d / (d * d + broadening)
    else:
        if spectral_gap(S) < degeneracy_tol:
            raise DegenerateSpectrum(
                f"relative spectral gap {spectral_gap(S):.3e} below tolerance {degeneracy_tol:.1e}"
            )
        with np.errstate(divide="ignore"):
            F = np.where(d != 0, 1.0 / np.where(d != 0, d, 1.0), 0.0)
    np.fill_diagonal(F, 0.0)
    return F


def _opts(opts):
    return DEFAULT_OPTIONS if opts is None else opts


def _gap(factors, opts):
    return build_gap_matrix(factors.S, opts.degeneracy_tol, opts.broadening)


def _check_sinv(S, opts, what):
    smin, smax = float(np.min(S)), float(np.max(S))
    if smin <= opts.sinv_rtol * smax or smin <= 0:
        raise SingularSInverse(f"{what}: smallest singular value {smin:.3e} cannot be inverted")


def vjp_intermediates(factors: SvdFactors, cot: SvdCotangents, opts=None) -> VjpIntermediates:
    opts = _opts(opts)
    F = _gap(factors, opts)
    UhUbar = adjoint(factors.U) @ cot.Ubar
    VhVbar = adjoint(factors.V) @ cot.Vbar
    return VjpIntermediates(F * UhUbar, F * VhVbar, np.diag(np.diag(VhVbar)))


def _diag_core(factors, cot, variant):
    """k×k core of the diagonal term, before the ``U ... V†`` sandwich."""
    if variant:
        # keep the U-side phase instead: 1/2 S⁻¹ (M - M†), M = I ∘ (U† Ubar)
        m = np.sum(np.conj(factors.U) * cot.Ubar, axis=0)
        imag = m.imag
    else:
        # 1/2 S⁻¹ (L† - L) with L = I ∘ (V† Vbar)
        l = np.sum(np.conj(factors.V) * cot.Vbar, axis=0)
        imag = -l.imag
    if not np.any(imag):
        return None
    return imag


def _core(factors, cot, opts, variant):
    S = factors.S
    inter = vjp_intermediates(factors, cot, opts)
    J, K = inter.J, inter.K
    core = np.diag(np.asarray(cot.Sbar, dtype=np.float64)).astype(np.complex128)
    core += (J + adjoint(J)) * S[None, :]
    core += S[:, None] * (K + adjoint(K))
    if opts.include_diagonal_term:
        imag = _diag_core(factors, cot, variant)
        if imag is not None:
            _check_sinv(S, opts, "diagonal term")
            core += np.diag(opts.diagonal_sign * 1j * imag / S)
    return core


def diagonal_term(factors: SvdFactors, cot: SvdCotangents, *, variant=False) -> np.ndarray:
    """The complex-only contribution ``1/2 U S⁻¹ (L† - L) V†`` on its own."""
    cot.check(factors)
    imag = _diag_core(factors, cot, variant)
    if imag is None:
        return np.zeros((factors.U.shape[0], factors.V.shape[0]), dtype=np.complex128)
    _check_sinv(factors.S, DEFAULT_OPTIONS, "diagonal term")
    return (factors.U * (1j * imag / factors.S)) @ adjoint(factors.V)


def rect_projector_terms(factors: SvdFactors, cot: SvdCotangents) -> np.ndarray:
    """``(I - U U†) Ubar S⁻¹ V† + U S⁻¹ Vbar† (I - V V†)``, via composed products."""
    U, S, V = factors.U, factors.S, factors.V
    Sinv = 1.0 / S
    Uperp = cot.Ubar - U @ (adjoint(U) @ cot.Ubar)
    Vperp = cot.Vbar - V @ (adjoint(V) @ cot.Vbar)
    return (Uperp * Sinv) @ adjoint(V) + (U * Sinv) @ adjoint(Vperp)


def svd_vjp(factors: SvdFactors, cot: SvdCotangents, opts=None, *, variant=False) -> np.ndarray:
    """Backward rule for any thin SVD; adds the projector terms when m ≠ n."""
    opts = _opts(opts)
    cot.check(factors)
    U, V = factors.U, factors.V
    out = U @ _core(factors, cot, opts, variant) @ adjoint(V)
    m, n = factors.shape
    if m != n:
        _check_sinv(factors.S, opts, "rectangular terms")
        out = out + rect_projector_terms(factors, cot)
    return out


def svd_vjp_square(factors: SvdFactors, cot: SvdCotangents, opts=None) -> np.ndarray:
    """Gradient of the loss with respect to a square input ``A``."""
    m, n = factors.shape
    if not m == n == factors.k:
        raise ShapeMismatch(f"svd_vjp_square needs a square decomposition, got {m}x{n}")
    return svd_vjp(factors, cot, opts)


def svd_vjp_rect(factors: SvdFactors, cot: SvdCotangents, opts=None) -> np.ndarray:
    """Gradient with respect to a general m×n input.

    For m == n the projector terms vanish identically (``U U† = V V† = I``)
    and the square result is returned unchanged.
    """
    return svd_vjp(factors, cot, opts)


def svd_vjp_square_variant(factors: SvdFactors, cot: SvdCotangents, opts=None) -> np.ndarray:
    """Same gradient, with the diagonal term taken from the ``U`` side.

    Agrees with :func:`svd_vjp_square` only for cotangents with zero
    :func:`gauge_residual`.  Rectangular inputs get the projector terms too.
    """
    return svd_vjp(factors, cot, opts, variant=True)


def jvp_intermediates(factors: SvdFactors, dA, *, diagonal_split="zero_dD",
                      degeneracy_tol=1e-10, broadening=0.0) -> JvpIntermediates:
    """Solve ``dP = dC S + dS - S dD`` for ``(dC, dS, dD)``.

    Only ``diag(dC - dD)`` is fixed by the equations; ``diagonal_split``
    chooses how it is shared: ``"zero_dD"`` puts all of it on ``dC``,
    ``"even"`` splits it in half.
    """
    U, S, V = factors.U, factors.S, factors.V
    m, n = factors.shape
    if not m == n == factors.k:
        raise ShapeMismatch(f"svd_jvp_square needs a square decomposition, got {m}x{n}")
    dA = np.asarray(dA, dtype=np.complex128)
    if dA.shape != (m, n):
        raise ShapeMismatch(f"dA has shape {dA.shape}, expected {(m, n)}")
    F = build_gap_matrix(S, degeneracy_tol, broadening)
    dP = adjoint(U) @ dA @ V
    dPh = adjoint(dP)
    dS = np.diag(dP).real.copy()
    dC = F * (dP * S[None, :] + S[:, None] * dPh)
    dD = F * (S[:, None] * dP + dPh * S[None, :])
    diff = 1j * np.diag(dP).imag / S
    if diagonal_split == "zero_dD":
        dC[np.diag_indices(n)] = diff
        dD[np.diag_indices(n)] = 0.0
    elif diagonal_split == "even":
        dC[np.diag_indices(n)] = diff / 2
        dD[np.diag_indices(n)] = -diff / 2
    else:
        raise ValueError(f"unknown diagonal_split {diagonal_split!r}")
    return JvpIntermediates(dP, dC, dD, dS)


def svd_jvp_square(factors: SvdFactors, dA, *, diagonal_split="zero_dD",
                   degeneracy_tol=1e-10, broadening=0.0):
    """First-order change ``(dU, dS, dV)`` of the factors under ``A -> A + dA``."""
    it = jvp_intermediates(factors, dA, diagonal_split=diagonal_split,
                           degeneracy_tol=degeneracy_tol, broadening=broadening)
    return factors.U @ it.dC, it.dS, factors.V @ it.dD


def gauge_residual(factors: SvdFactors, cot: SvdCotangents) -> float:
    """``‖Im diag(Ubar† U + Vbar† V)‖₂``; zero for cotangents of a phase-invariant loss."""
    d = np.sum(np.conj(cot.Ubar) * factors.U, axis=0) + np.sum(np.conj(cot.Vbar) * factors.V, axis=0)
    return float(np.linalg.norm(d.imag))
