"""Gradient of a loss that reads both singular-vector matrices.

The loss Re(U[0,0] conj(V[0,0])) only sees the relative phase of the first
left and right singular vectors.  The backward rule with the diagonal
correction matches central differences; dropping the correction does not.
"""
import numpy as np

from cxsvd import VjpOptions, make_loss, rel_error, seeded_random, svd, svd_vjp_square, wirtinger_grad_matrix

A = seeded_random(4, 4, seed=2)
loss = make_loss("uv-overlap", 4, 4)
f = svd(A)
print("singular values:", np.round(f.S, 6))
print("loss:", loss(A))

fd = wirtinger_grad_matrix(loss, A)
cot = loss.cotangents(f)
full = svd_vjp_square(f, cot)
bare = svd_vjp_square(f, cot, VjpOptions(include_diagonal_term=False))

print(f"with diagonal term:    rel error vs FD {rel_error(full, fd):.2e}")
print(f"without diagonal term: rel error vs FD {rel_error(bare, fd):.2e}")

# a loss of the singular values alone never needs the correction
frob = make_loss("frob", 4, 4)
g = svd_vjp_square(f, frob.cotangents(f), VjpOptions(include_diagonal_term=False))
print(f"frob without the term: rel error vs FD {rel_error(g, wirtinger_grad_matrix(frob, A)):.2e}")
