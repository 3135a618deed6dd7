"""Unitary maps on amplitudes become bistochastic maps on probabilities.

Squaring the entries of a unitary matrix gives a transfer matrix whose rows
and columns both sum to one.  Applied repeatedly it pushes any probability
vector toward the uniform one, never decreasing the Shannon entropy, and
(unlike the unitary it came from) it cannot be undone.
"""

import numpy as np

from dephase import (
    ProbabilityVector,
    apply_noncoherent,
    hadamard_square,
    phase_average_mc,
    random_unitary,
    shannon_entropy,
)

u = random_unitary(6, seed=42)
t = hadamard_square(u)
print("random 6x6 unitary squared entrywise:")
print("  row sums  ", np.round(t.matrix.sum(axis=1), 12))
print("  column sums", np.round(t.matrix.sum(axis=0), 12))

p = ProbabilityVector.delta(6, 0)
print("\nrepeated application, starting from a point mass:")
print(f"  step 0: entropy {shannon_entropy(p):.4f}  max p {p.entries.max():.4f}")
for step in range(1, 7):
    p = apply_noncoherent(t, p)
    print(f"  step {step}: entropy {shannon_entropy(p):.4f}  max p {p.entries.max():.4f}")
print(f"  uniform entropy would be ln 6 = {np.log(6):.4f}")

inverse = np.linalg.inv(t.matrix)
print("\nirreversibility: the matrix inverse has negative entries "
      f"(min {inverse.min():.3f}), so it is not a probability map")

mc = phase_average_mc(u, ProbabilityVector.uniform(6), samples=50_000, seed=7)
exact = apply_noncoherent(t, ProbabilityVector.uniform(6))
worst = np.abs(mc.estimate.entries - exact.entries).max()
print("\nMonte Carlo phase averaging reproduces the same map:")
print(f"  worst difference {worst:.2e} with standard errors ~{mc.stderr.max():.2e}")
