"""Gradient-check sweeps, the self-check suite and the descent demo.

These are the library functions behind the ``cxsvd`` command line; they
return plain dicts that serialize straight to the JSON report format.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, CxsvdError, DivergenceDetected
from .fd_oracle import (
    DEFAULT_H, LOSS_NAMES, dot_test, gauge_drift, make_loss, project_gauge_invariant,
    wirtinger_grad_matrix,
)
from .matrix_core import adjoint, hadamard, seeded_random
from .svd_engine import GaugeTransform, apply_gauge, svd
from .svd_grad import (
    SvdCotangents, VjpOptions, build_gap_matrix, diagonal_term, gauge_residual, rect_projector_terms,
    svd_vjp, svd_vjp_rect, svd_vjp_square, svd_vjp_square_variant,
)
from .tape import Tape, backward

__all__ = [
    "FORMULA_MODES",
    "RunConfig",
    "parse_size",
    "rel_error",
    "run_gradcheck",
    "run_optimize",
    "SELFCHECK_SUITES",
    "run_selfcheck",
]

SCHEMA = 1
FORMULA_MODES = ("full", "no-diagonal", "variant")


def parse_size(text: str):
    """``"N"`` -> (N, N); ``"RxC"`` -> (R, C)."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:[xX]\s*(\d+))?\s*", str(text))
    if not m:
        raise ConfigError(f"bad size {text!r}; use N or RxC")
    r = int(m.group(1))
    c = int(m.group(2)) if m.group(2) else r
    if r < 1 or c < 1:
        raise ConfigError(f"sizes must be positive, got {text!r}")
    return r, c


@dataclass
class RunConfig:
    sizes: list = field(default_factory=lambda: [(3, 3)])
    seeds: list = field(default_factory=lambda: [0])
    losses: Union[list, str] = "all"
    h: float = DEFAULT_H
    tol: float = 1e-6
    formula_mode: str = "full"
    broadening: float = 0.0
    degeneracy_tol: float = 1e-10
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        self.sizes = [parse_size(s) if isinstance(s, str) else tuple(int(v) for v in s)
                      for s in self.sizes]
        if isinstance(self.losses, str):
            self.losses = [self.losses]
        if self.losses == ["all"]:
            self.losses = list(LOSS_NAMES)
        self.validate()

    def validate(self):
        if not self.sizes and self.matrix is None:
            raise ConfigError("no sizes given")
        if any(r < 1 or c < 1 for r, c in self.sizes):
            raise ConfigError("sizes must be positive")
        if not self.seeds:
            raise ConfigError("no seeds given")
        unknown = [n for n in self.losses if n not in LOSS_NAMES]
        if unknown:
            raise ConfigError(f"unknown losses {unknown}; choose from {', '.join(LOSS_NAMES)} or all")
        if not (self.h > 0 and self.tol > 0):
            raise ConfigError("h and tol must be positive")
        if self.broadening < 0 or self.degeneracy_tol < 0:
            raise ConfigError("broadening and degeneracy_tol must be non-negative")
        if self.formula_mode not in FORMULA_MODES:
            raise ConfigError(f"formula mode must be one of {FORMULA_MODES}")

    @property
    def vjp_options(self) -> VjpOptions:
        return VjpOptions(
            include_diagonal_term=self.formula_mode != "no-diagonal",
            broadening=self.broadening,
            degeneracy_tol=self.degeneracy_tol,
        )

    def to_dict(self) -> dict:
        return {
            "sizes": [f"{r}x{c}" for r, c in self.sizes],
            "seeds": list(self.seeds),
            "losses": list(self.losses),
            "h": self.h,
            "tol": self.tol,
            "formula_mode": self.formula_mode,
            "broadening": self.broadening,
            "degeneracy_tol": self.degeneracy_tol,
            "matrix": None if self.matrix is None else "file",
        }


def rel_error(approx, reference) -> float:
    return float(np.linalg.norm(approx - reference) / max(np.linalg.norm(reference), 1e-300))


def _formula(mode, factors, cot, opts):
    if mode == "variant":
        return svd_vjp_square_variant(factors, cot, opts)
    return svd_vjp(factors, cot, opts)


def _trial(config, A, rows, cols, seed, loss_name):
    rec = {
        "loss_name": loss_name, "rows": rows, "cols": cols, "seed": seed,
        "formula_mode": config.formula_mode, "h": config.h,
        "rel_error": None, "gauge_residual": None, "passed": False,
        "reason": None, "wall_time_ms": 0.0,
    }
    t0 = time.perf_counter()
    try:
        loss = make_loss(loss_name, rows, cols, 0 if seed is None else seed)
        factors = svd(A)
        cot = loss.cotangents(factors)
        rec["gauge_residual"] = gauge_residual(factors, cot)
        grad = _formula(config.formula_mode, factors, cot, config.vjp_options)
        fd = wirtinger_grad_matrix(loss, A, config.h)
        rec["rel_error"] = rel_error(grad, fd)
        rec["passed"] = bool(rec["rel_error"] <= config.tol)
    except CxsvdError as exc:
        rec["reason"] = f"{type(exc).__name__}: {exc}"
    rec["wall_time_ms"] = (time.perf_counter() - t0) * 1e3
    return rec


def run_gradcheck(config: RunConfig) -> dict:
    """Compare the chosen backward formula with the FD oracle over a sweep.

    Trials are produced in config order (size, seed, loss).  Errors inside a
    trial (degenerate spectrum, ...) mark that trial failed with a reason.
    """
    trials = []
    if config.matrix is not None:
        A = np.asarray(config.matrix, dtype=np.complex128)
        for name in config.losses:
            trials.append(_trial(config, A, A.shape[0], A.shape[1], None, name))
    else:
        for rows, cols in config.sizes:
            for seed in config.seeds:
                A = seeded_random(rows, cols, seed)
                for name in config.losses:
                    trials.append(_trial(config, A, rows, cols, seed, name))
    errs = [t["rel_error"] for t in trials if t["rel_error"] is not None]
    return {
        "schema": SCHEMA,
        "config": config.to_dict(),
        "trials": trials,
        "summary": {
            "trials": len(trials),
            "failures": sum(not t["passed"] for t in trials),
            "max_rel_error": max(errs) if errs else None,
        },
    }


# --------------------------------------------------------------------------
# gradient descent through the tape


def tape_gradient(loss_name, A, seed=0):
    """``(L, ∇_A L)`` for a catalogue loss, computed end-to-end on a fresh tape."""
    A = np.asarray(A, dtype=np.complex128)
    loss = make_loss(loss_name, A.shape[0], A.shape[1], seed)
    if loss.tape_program is None:
        raise ConfigError(f"loss {loss_name!r} has no tape program")
    t = Tape()
    a = t.variable(A)
    out = loss.tape_program(t, a)
    return float(np.real(out.primal)), backward(t, out)[a]


def run_optimize(loss_name="frob", eta=0.1, steps=20, A0=None, *, seed=0, size=(3, 3),
                 patience=10, keep_iterates=False) -> dict:
    """Plain gradient descent ``A <- A - eta ∇_A L``.

    Raises :class:`DivergenceDetected` if the loss goes up ``patience`` steps
    in a row.  The returned dict holds the loss after every step
    (``losses[0]`` is the starting value).
    """
    if eta <= 0 or steps < 0:
        raise ConfigError("eta must be positive and steps non-negative")
    if loss_name not in LOSS_NAMES:
        raise ConfigError(f"unknown loss {loss_name!r}")
    A = seeded_random(*size, seed) if A0 is None else np.array(A0, dtype=np.complex128)
    losses, svals, iterates = [], [], [A.copy()]
    ups = 0
    for step in range(steps + 1):
        val, grad = tape_gradient(loss_name, A, seed)
        losses.append(val)
        svals.append(np.linalg.svd(A, compute_uv=False).tolist())
        if step > 0:
            ups = ups + 1 if losses[-1] > losses[-2] else 0
            if ups >= patience:
                raise DivergenceDetected(f"loss increased {patience} steps in a row (step {step})")
        if step == steps:
            break
        A = A - eta * grad
        if keep_iterates:
            iterates.append(A.copy())
    diffs = np.diff(losses)
    out = {
        "schema": SCHEMA,
        "loss": loss_name,
        "eta": eta,
        "steps": steps,
        "losses": losses,
        "singular_values": svals,
        "monotone": bool(np.all(diffs <= 0)),
        "strictly_decreasing": bool(np.all(diffs < 0)),
    }
    if keep_iterates:
        out["iterates"] = iterates
    return out


# --------------------------------------------------------------------------
# self-check suites: each returns (passed, detail)


def _suite_hadamard_trace(opts):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        A, B, C = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)) for _ in range(3))
        lhs = np.trace(A @ hadamard(C, B))
        rhs = np.trace(hadamard(C.T, A) @ B)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        worst = max(worst, np.linalg.norm(hadamard(A, B).T - hadamard(A.T, B.T)))
    return worst <= 1e-12, f"max rel diff {worst:.2e}"


def _suite_svd_factors(opts):
    worst = recon = 0.0
    for (m, n) in [(3, 3), (5, 3), (3, 5), (8, 8)]:
        for method in ("lapack", "jacobi"):
            A = seeded_random(m, n, 4, "Unconstrained")
            f = svd(A, method=method)
            k = f.k
            worst = max(worst,
                        np.linalg.norm(adjoint(f.U) @ f.U - np.eye(k)),
                        np.linalg.norm(adjoint(f.V) @ f.V - np.eye(k)))
            recon = max(recon, np.linalg.norm(f.reconstruct() - A) / np.linalg.norm(A))
            g = svd(A, method=method)
            if not (np.array_equal(f.U, g.U) and np.array_equal(f.V, g.V) and np.array_equal(f.S, g.S)):
                return False, f"non-deterministic factors for {m}x{n} ({method})"
    return worst <= 1e-12 and recon <= 1e-10, f"unitarity defect {worst:.2e}, reconstruction {recon:.2e}"


def _suite_gauge_reconstruction(opts):
    rng = np.random.default_rng(3)
    f = svd(seeded_random(4, 4, 3))
    worst = 0.0
    for _ in range(20):
        g = apply_gauge(f, GaugeTransform.random(f.k, rng))
        worst = max(worst, np.linalg.norm(g.reconstruct() - f.reconstruct()), np.max(np.abs(g.S - f.S)))
    return worst <= 1e-12, f"max drift {worst:.2e}"


def _suite_catalogue_invariance(opts):
    rng = np.random.default_rng(5)
    worst_drift = worst_res = 0.0
    for (m, n) in [(3, 3), (4, 2)]:
        f = svd(seeded_random(m, n, 1))
        for name in LOSS_NAMES:
            loss = make_loss(name, m, n, 1)
            worst_drift = max(worst_drift, gauge_drift(loss, f, rng))
            worst_res = max(worst_res, gauge_residual(f, loss.cotangents(f)))
    ok = worst_drift <= 1e-12 and worst_res <= 1e-10
    return ok, f"loss drift {worst_drift:.2e}, cotangent residual {worst_res:.2e}"


def _suite_gauge_covariance(opts):
    rng = np.random.default_rng(8)
    worst = 0.0
    for name in ("uv-overlap", "mixed-trace", "projector"):
        A = seeded_random(4, 4, 2)
        f = svd(A)
        cot = make_loss(name, 4, 4, 2).cotangents(f)
        ref = svd_vjp_square(f, cot, opts)
        g = GaugeTransform.random(f.k, rng)
        ph = g.phases
        moved = svd_vjp_square(apply_gauge(f, g), SvdCotangents(cot.Ubar * ph, cot.Sbar, cot.Vbar * ph), opts)
        worst = max(worst, np.linalg.norm(moved - ref))
    return worst <= 1e-10, f"max change {worst:.2e}"


def _suite_variant_equality(opts):
    worst = 0.0
    for seed in range(3):
        f = svd(seeded_random(3, 3, seed))
        for name in ("uv-overlap", "mixed-trace", "uv-overlap-im"):
            cot = make_loss(name, 3, 3, seed).cotangents(f)
            a = svd_vjp_square(f, cot, opts)
            b = svd_vjp_square_variant(f, cot)
            worst = max(worst, rel_error(b, a))
    return worst <= 1e-10, f"max rel diff {worst:.2e}"


def _random_cot(f, rng):
    def z(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return SvdCotangents(z(f.U.shape), rng.standard_normal(f.k), z(f.V.shape))


def _suite_dot_test(opts):
    rng = np.random.default_rng(21)
    worst = split = 0.0
    for seed in range(10):
        f = svd(seeded_random(5, 5, seed))
        cot = project_gauge_invariant(f, _random_cot(f, rng))
        dA = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        lhs, rhs = dot_test(f, cot, dA, opts)
        _, rhs_even = dot_test(f, cot, dA, opts, diagonal_split="even")
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0))
        split = max(split, abs(rhs - rhs_even))
    return worst <= 1e-8 and split <= 1e-12, f"max rel gap {worst:.2e}, split change {split:.2e}"


def _suite_fd_agreement(opts):
    worst, worst_case = 0.0, ""
    for (m, n) in [(2, 2), (3, 3), (4, 2), (2, 4)]:
        A = seeded_random(m, n, 0)
        f = svd(A)
        for name in LOSS_NAMES:
            loss = make_loss(name, m, n, 0)
            err = rel_error(svd_vjp(f, loss.cotangents(f), opts), wirtinger_grad_matrix(loss, A))
            if err > worst:
                worst, worst_case = err, f"{name} {m}x{n}"
    return worst <= 1e-6, f"max rel error {worst:.2e} ({worst_case})"


def _suite_ablation(opts):
    A = seeded_random(3, 3, 0)
    f = svd(A)
    off = VjpOptions(include_diagonal_term=False)
    need, spare = [], []
    for name in ("uv-overlap", "mixed-trace"):
        loss = make_loss(name, 3, 3, 0)
        need.append(rel_error(svd_vjp(f, loss.cotangents(f), off), wirtinger_grad_matrix(loss, A)))
    for name in ("frob", "nuclear", "entropy", "u00sq", "u-only"):
        loss = make_loss(name, 3, 3, 0)
        spare.append(rel_error(svd_vjp(f, loss.cotangents(f), off), wirtinger_grad_matrix(loss, A)))
    ok = min(need) >= 1e-3 and max(spare) <= 1e-6
    return ok, f"coupled min err {min(need):.2e}, decoupled max err {max(spare):.2e}"


def _suite_real_reduction(opts):
    worst = 0.0
    for seed in range(5):
        f = svd(seeded_random(4, 4, seed, real=True))
        for name in ("uv-overlap", "mixed-trace", "u00sq"):
            loss = make_loss(name, 4, 4, seed)
            cot = loss.cotangents(f)
            cot = SvdCotangents(cot.Ubar.real + 0j, cot.Sbar, cot.Vbar.real + 0j)
            worst = max(worst, np.linalg.norm(diagonal_term(f, cot)))
    return worst <= 1e-14, f"max diagonal-term norm {worst:.2e}"


def _suite_gap_antisymmetry(opts):
    F = build_gap_matrix(np.array([8.0, 4.0, 2.0, 1.0]))
    err = np.linalg.norm(F + F.T) + np.linalg.norm(np.diag(F))
    return err == 0.0, f"|F + F^T| = {err:.1e}"


def _suite_rect_projectors(opts):
    f = svd(seeded_random(4, 4, 1))
    cot = make_loss("mixed-trace", 4, 4, 1).cotangents(f)
    p = np.linalg.norm(rect_projector_terms(f, cot))
    d = np.linalg.norm(svd_vjp_rect(f, cot, opts) - svd_vjp_square(f, cot, opts))
    return p <= 1e-13 and d <= 1e-13, f"square projector norm {p:.2e}, rect-square diff {d:.2e}"


def _suite_tape_nuclear(opts):
    A = seeded_random(4, 4, 6)
    f = svd(A)
    _, g = tape_gradient("nuclear", A)
    exact = f.U @ adjoint(f.V)
    fd = wirtinger_grad_matrix(make_loss("nuclear", 4, 4), A)
    a, b = np.linalg.norm(g - exact), rel_error(g, fd)
    return a <= 1e-10 and b <= 1e-6, f"|tape - UV†| {a:.2e}, FD rel {b:.2e}"


def _suite_tape_vs_closed_form(opts):
    worst = 0.0
    for name in LOSS_NAMES:
        A = seeded_random(3, 3, 2)
        f = svd(A)
        _, g = tape_gradient(name, A, 2)
        ref = svd_vjp(f, make_loss(name, 3, 3, 2).cotangents(f), opts)
        worst = max(worst, np.linalg.norm(g - ref))
    return worst <= 1e-10, f"max |tape - closed form| {worst:.2e}"


SELFCHECK_SUITES = {
    "identity/hadamard-trace": _suite_hadamard_trace,
    "svd/unitarity-determinism": _suite_svd_factors,
    "gauge/apply-gauge-reconstruction": _suite_gauge_reconstruction,
    "gauge/catalogue-invariance": _suite_catalogue_invariance,
    "gauge/covariance": _suite_gauge_covariance,
    "gauge/variant-equality": _suite_variant_equality,
    "grad/gap-antisymmetry": _suite_gap_antisymmetry,
    "grad/fd-agreement": _suite_fd_agreement,
    "grad/diagonal-term-ablation": _suite_ablation,
    "grad/real-case-reduction": _suite_real_reduction,
    "grad/rect-projectors": _suite_rect_projectors,
    "grad/dot-test-gauge-split": _suite_dot_test,
    "tape/nuclear-end-to-end": _suite_tape_nuclear,
    "tape/closed-form-agreement": _suite_tape_vs_closed_form,
}


def run_selfcheck(filter_text=None, *, mutate=False):
    """Run the invariant suites; returns a list of ``(name, passed, detail)``.

    ``mutate=True`` flips the sign of the diagonal term in the backward rule,
    which several suites must then catch.
    """
    opts = VjpOptions(diagonal_sign=-1.0) if mutate else VjpOptions()
    rows = []
    for name, fn in SELFCHECK_SUITES.items():
        if filter_text and filter_text not in name:
            continue
        try:
            ok, detail = fn(opts)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((name, bool(ok), detail))
    return rows
