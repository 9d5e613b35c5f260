"""Dense complex matrices and the small set of structural operations the
gradient rules are written in.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; real
diagonals (singular values and their cotangents) are 1-D ``float64`` arrays.
All functions are pure and never modify their arguments.
"""
from __future__ import annotations

import enum
import json
from pathlib import Path

import numpy as np

from .errors import NonFiniteInput, NotSquare, ShapeMismatch

__all__ = [
    "SpectrumPolicy",
    "as_matrix",
    "adjoint",
    "hadamard",
    "diag_part",
    "offdiag_part",
    "real_inner",
    "frobenius",
    "haar_unitary",
    "seeded_random",
    "matrix_to_dict",
    "matrix_from_dict",
    "load_matrix",
    "save_matrix",
]


class SpectrumPolicy(str, enum.Enum):
    WELL_SEPARATED = "WellSeparated"
    UNCONSTRAINED = "Unconstrained"


def as_matrix(x, *, check_finite=True) -> np.ndarray:
    """Coerce ``x`` to a 2-D complex128 array, rejecting NaN/Inf entries."""
    m = np.array(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeMismatch(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    if check_finite and not np.all(np.isfinite(m)):
        raise NonFiniteInput("matrix has non-finite entries")
    return m


def adjoint(x: np.ndarray) -> np.ndarray:
    return np.conj(x).T


def _same_shape(x, y, what):
    if np.shape(x) != np.shape(y):
        raise ShapeMismatch(f"{what}: shapes {np.shape(x)} and {np.shape(y)} differ")


def _square(x, what):
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise NotSquare(f"{what}: matrix of shape {x.shape} is not square")


def hadamard(x, y) -> np.ndarray:
    """Entrywise product; shapes must agree exactly (no broadcasting)."""
    x = np.asarray(x)
    y = np.asarray(y)
    _same_shape(x, y, "hadamard")
    return x * y


def diag_part(x) -> np.ndarray:
    """``I ∘ X``: keep the diagonal, zero everything else."""
    x = np.asarray(x)
    _square(x, "diag_part")
    return np.diag(np.diag(x))


def offdiag_part(x) -> np.ndarray:
    """``Ī ∘ X``: zero the diagonal, keep everything else."""
    x = np.asarray(x)
    _square(x, "offdiag_part")
    out = x.copy()
    np.fill_diagonal(out, 0)
    return out


def real_inner(x, y) -> float:
    """Re Tr(X† Y), the real inner product under which gradients are defined.

    A first-order change of a real loss is ``real_inner(grad, dX)``.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    _same_shape(x, y, "real_inner")
    return float(np.sum(np.conj(x) * y).real)


def frobenius(x) -> float:
    return float(np.linalg.norm(np.asarray(x)))


def haar_unitary(n: int, rng: np.random.Generator, *, real=False) -> np.ndarray:
    """Haar-distributed unitary (orthogonal if ``real``) via phase-fixed QR."""
    if real:
        z = rng.standard_normal((n, n))
    else:
        z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return q.astype(np.complex128)


def seeded_random(rows: int, cols: int, seed: int,
                  spectrum_policy=SpectrumPolicy.WELL_SEPARATED, *, real=False) -> np.ndarray:
    """Deterministic random test matrix.

    With ``WellSeparated`` the matrix is ``U0 diag(s) V0†`` with Haar factors and
    singular values ``s_i = 2**(k-1-i)``, so every pair of singular values is
    separated by at least a factor of two. ``Unconstrained`` draws i.i.d.
    standard complex Gaussian entries. ``real=True`` keeps everything real
    (imaginary parts exactly zero).
    """
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"dimensions must be positive, got {rows}x{cols}")
    policy = SpectrumPolicy(spectrum_policy)
    rng = np.random.default_rng(seed)
    if policy is SpectrumPolicy.UNCONSTRAINED:
        if real:
            return rng.standard_normal((rows, cols)).astype(np.complex128)
        re = rng.standard_normal((rows, cols))
        im = rng.standard_normal((rows, cols))
        return (re + 1j * im) / np.sqrt(2)
    k = min(rows, cols)
    s = 2.0 ** np.arange(k - 1, -1, -1)
    u0 = haar_unitary(rows, rng, real=real)[:, :k]
    v0 = haar_unitary(cols, rng, real=real)[:, :k]
    a = (u0 * s) @ adjoint(v0)
    if real:
        a = a.real.astype(np.complex128)
    return a


# --- file format: {"rows": m, "cols": n, "data": [[re, im], ...]} row-major ---

def matrix_to_dict(a) -> dict:
    a = as_matrix(a)
    flat = a.reshape(-1)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_dict(obj: dict) -> np.ndarray:
    try:
        rows = int(obj["rows"])
        cols = int(obj["cols"])
        data = obj["data"]
    except (KeyError, TypeError) as exc:
        raise ShapeMismatch(f"malformed matrix object: {exc}") from None
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"dimensions must be positive, got {rows}x{cols}")
    if len(data) != rows * cols:
        raise ShapeMismatch(f"expected {rows * cols} entries, got {len(data)}")
    pairs = np.asarray(data, dtype=np.float64)
    if pairs.shape != (rows * cols, 2):
        raise ShapeMismatch("each entry must be a [re, im] pair")
    return as_matrix((pairs[:, 0] + 1j * pairs[:, 1]).reshape(rows, cols))


def load_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return matrix_from_dict(json.load(fh))


def save_matrix(path, a) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(a)), encoding="utf-8")
