"""Why no gap holds for maps with slowly shrinking intervals.

For an affine map whose n-th interval has length proportional to
1/(n log^2 n), weights p_n proportional to |I_n|^t on digits N..k have
dimension at least a bound that climbs towards t as N grows. Since t can be
taken close to 1, dimensions of Bernoulli measures come arbitrarily close to 1.
"""
from dimgap.bernoulli import sharpness_vector
from dimgap.map_core import LengthFamily

fam = LengthFamily.log_squared()
for t in (0.5, 0.9, 0.99):
    row = [sharpness_vector(fam, t, N).bound for N in (10**2, 10**3, 10**4)]
    print(f"t = {t:<5} lower bounds at N = 1e2, 1e3, 1e4: " + ", ".join(f"{b:.5f}" for b in row))
