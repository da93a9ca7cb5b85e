"""Dimension of Bernoulli measures for the Gauss map, and the search for large ones.

A Bernoulli measure picks continued-fraction digits independently with
weights p. Its dimension is entropy / Lyapunov exponent, always below 1.
This walk-through evaluates a few vectors and then lets the optimiser push
the dimension up as the support grows.
"""
from dimgap import optimize
from dimgap.bernoulli import ProbVector, dimension

print("vector                         dim         error bound")
for w in ([0.5, 0.5], [0.6, 0.3, 0.1], [0.4, 0.25, 0.15, 0.1, 0.06, 0.04]):
    d = dimension(ProbVector(w), tol=1e-9)
    print(f"{str(w):30s} {d.dim:.9f} {d.err:.1e}")

# Larger supports allow larger dimension, but the optimum stays well below 1
# and its weights decrease with the digit.
print("\nN   max dim    weights")
for run in optimize.maximize_sequence((2, 4, 8), restarts=4):
    w = ", ".join(f"{x:.3f}" for x in run.p.weights)
    print(f"{run.N:<3d} {run.dim:.6f}   [{w}]")
