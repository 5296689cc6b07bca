"""Walk through the pointwise constitutive law S(A) = (mu+|A|)^(p-2) A.

Prints the law at a reference tensor for a range of exponents, checks the
closed-form jacobian against central differences, and samples the three
inequality ratios that the rest of the package leans on.
"""

import numpy as np

from pstruct.constitutive import (
    ConstitutiveParams,
    inequality_ratios,
    stress,
    stress_jacobian,
    tensor_norm,
)

rng = np.random.default_rng(0)
a = rng.standard_normal((3, 3))
a /= tensor_norm(a)

print("reference tensor with |A| = 1")
print("p      mu     |S(A)|      (mu+1)^(p-2)")
for p in (1.2, 1.5, 2.0, 2.5, 3.5):
    params = ConstitutiveParams(p=p, mu=0.5)
    s = stress(a, params)
    print(f"{p:<6g} {params.mu:<6g} {tensor_norm(s):<11.6f} {(params.mu + 1.0) ** (p - 2.0):.6f}")

print()
print("jacobian vs central differences (1000 random tensors, p=1.7, mu=0.3)")
params = ConstitutiveParams(p=1.7, mu=0.3)
batch = rng.standard_normal((1000, 3, 3))
jac = stress_jacobian(batch, params)
step = 1e-6
fd = np.zeros_like(jac)
for k in range(3):
    for l in range(3):
        e = np.zeros((3, 3))
        e[k, l] = step
        fd[..., :, :, k, l] = (stress(batch + e, params) - stress(batch - e, params)) / (2 * step)
rel = np.sqrt(np.sum((fd - jac) ** 2, axis=(-4, -3, -2, -1)))
rel /= np.sqrt(np.sum(jac ** 2, axis=(-4, -3, -2, -1)))
print(f"  worst relative error: {rel.max():.3e}")

print()
print("inequality ratios over 100000 random pairs")
print("p      mu     min ellipticity  min monotonicity  max lipschitz")
for p, mu in ((1.5, 0.0), (1.5, 1.0), (2.5, 0.1), (3.5, 1.0)):
    out = inequality_ratios(
        rng.standard_normal((100000, 3, 3)),
        rng.standard_normal((100000, 3, 3)),
        ConstitutiveParams(p=p, mu=mu),
    )
    print(
        f"{p:<6g} {mu:<6g} {out['ellipticity_ratio'].min():<16.6f} "
        f"{out['monotonicity_ratio'].min():<17.6f} {out['lipschitz_ratio'].max():.6f}"
    )
print("the ellipticity floor tracks min(1, p-1); all three are scale invariant")
