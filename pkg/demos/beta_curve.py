"""The pressure root beta_p(t) and its derivatives.

beta_p(t) solves P(-b log|T'| + t log p) = 0. It is decreasing and convex,
beta_p(1) = 0, and beta_p'(1) = -dim mu_p. Its second derivative is a variance
divided by a Lyapunov exponent, which is what keeps the dimension away from 1.
"""
import numpy as np

from dimgap import thermo
from dimgap.bernoulli import ProbVector, dimension

p = ProbVector([0.5, 0.3, 0.2])
curve = thermo.beta_curve(p, np.linspace(0, 1, 11))
print(curve.to_csv())
print(f"convex: {curve.is_convex()}")
print(f"beta'(1) = {curve.beta_prime[-1]:.9f}   -dim = {-dimension(p, tol=1e-10).dim:.9f}")

# beta(1) - beta(0) is minus the dimension of the digit set; with a large
# alphabet the integral of beta' approaches -1.
wide = ProbVector.power(2.0, cut=200)
c = thermo.beta_curve(wide, np.linspace(0, 1, 21), tol=1e-10, second=False)
print(f"digits 1..200: integral of beta' = {c.trapezoid():.5f}")
