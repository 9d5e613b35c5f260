"""Phase gauge of the SVD and what it does to cotangents.

Rotating column j of U and of V by the same phase leaves A unchanged.  A loss
that respects this has cotangents with Im diag(Ubar† U + Vbar† V) = 0, and
only then do the two equivalent ways of writing the backward rule agree.
"""
import numpy as np

from cxsvd import (
    GaugeTransform, SvdCotangents, apply_gauge, gauge_residual, make_loss, project_gauge_invariant,
    rel_error, seeded_random, svd, svd_vjp_square, svd_vjp_square_variant,
)

rng = np.random.default_rng(0)
A = seeded_random(3, 3, seed=0)
f = svd(A)
g = apply_gauge(f, GaugeTransform.random(3, rng))
print("reconstruction after a gauge change:", np.abs(g.reconstruct() - A).max())

loss = make_loss("mixed-trace", 3, 3)
print("loss before / after:", loss.of_factors(f), loss.of_factors(g))
cot = loss.cotangents(f)
print("gauge residual of its cotangents:", gauge_residual(f, cot))
print("primary vs variant:", rel_error(svd_vjp_square_variant(f, cot), svd_vjp_square(f, cot)))

# a random cotangent carries a pure-gauge component
raw = SvdCotangents(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)),
                    rng.standard_normal(3), rng.standard_normal((3, 3)) + 0j)
print("\nrandom cotangent residual:", gauge_residual(f, raw))
print("primary vs variant:", rel_error(svd_vjp_square_variant(f, raw), svd_vjp_square(f, raw)))
fixed = project_gauge_invariant(f, raw)
print("after projection residual:", gauge_residual(f, fixed))
print("primary vs variant:", rel_error(svd_vjp_square_variant(f, fixed), svd_vjp_square(f, fixed)))
