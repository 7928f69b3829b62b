# Polynomial stand-ins for ReLU and ELU
#
# A leveled HE scheme can only add and multiply, so every activation has to
# become a polynomial. Here we fit Chebyshev series of a few degrees and see
# where the error lands.

import numpy as np

from minmaxhe import ELU, RELU, error_profile, fit_chebyshev, to_monomial

# Degree 3 on [-3, 3] for both functions. ReLU has a kink at the origin and
# the fit pays for it right there; ELU is smooth and does much better near 0.

for kind in (RELU, ELU):
    s = fit_chebyshev(kind, 3, (-3, 3))
    prof = error_profile(s, kind, (-0.5, 0.5, 1001))
    print(f"{kind.name:4s} deg 3 [-3,3]  max |err| on |x|<=0.5: {prof[:, 1].max():.4f}")

# Error over the whole range, coarse grid, just to look at the shape

s = fit_chebyshev(ELU, 3, (-3, 3))
for x, e in error_profile(s, ELU, (-3, 3, 13)):
    print(f"  x={x:+.1f}  {'#' * int(e * 200)}")

# Raising the degree never makes the least-squares residual worse

for kind in (RELU, ELU):
    errs = [error_profile(fit_chebyshev(kind, n, (-3, 3)), kind, (-3, 3, 2001))[:, 1].max()
            for n in range(2, 7)]
    print(kind.name, np.round(errs, 4))

# Outside the fitting range the polynomial wanders off quickly

s = fit_chebyshev(ELU, 3, (-2, 2))
for x in (1.0, 2.0, 3.0, 4.0):
    print(f"ELU({x}) = {ELU(np.array(x)):.3f}   poly = {s(np.array(x)):.3f}")

# The monomial form is what a circuit would evaluate
print("monomial coefficients:", np.round(to_monomial(s), 5))
