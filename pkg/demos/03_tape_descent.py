"""Gradient descent on the nuclear norm through the reverse-mode tape.

Each step records svd -> sum of singular values on a fresh tape and sweeps
backward to get the gradient with respect to A, which equals U V†.
"""
import numpy as np

from cxsvd import Tape, backward, run_optimize, seeded_random, svd

A = seeded_random(3, 3, seed=0)
t = Tape()
a = t.variable(A)
s = t.svd_s(t.svd(a))
out = t.sum(s)
grad = backward(t, out)[a]
f = svd(A)
print("nuclear norm:", out.primal.real)
print("|grad - U V†|_max:", np.abs(grad - f.U @ f.V.conj().T).max())

traj = run_optimize("nuclear", eta=0.05, steps=20)
for i in range(0, 21, 4):
    print(f"step {i:2d}  loss {traj['losses'][i]:.6f}  s = {np.round(traj['singular_values'][i], 4)}")
print("strictly decreasing:", traj["strictly_decreasing"])

# on the Frobenius loss each step is an exact contraction A <- (1 - eta) A
frob = run_optimize("frob", eta=0.1, steps=5)
print("frob loss ratios:", np.round(np.array(frob["losses"][1:]) / frob["losses"][:-1], 12))
