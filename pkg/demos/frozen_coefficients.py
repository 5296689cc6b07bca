"""Frozen-coefficient linearization with mollified weights.

For p < 2 the coefficient (mu + |Du|)^{p-2} blows up where the gradient
vanishes, so the linearized-at-a-base-field problem mollifies |Du| at scale
eps before forming weights.  Two facts make this usable:

  * the mollified solve converges as eps -> 0 (gaps between consecutive
    eps levels shrink), and
  * the face-averaged coefficients never overshoot the continuum bound by
    more than an O(h) factor (coef_max <= 1 + 5h after normalization).
"""

from pstruct import grid, problems, solver
from pstruct.constitutive import ConstitutiveParams

n = 32
dom = grid.build_domain("dirichlet_box", n)
h = dom.h
base = problems.smooth_test_field(dom, seed=7).values()
f = grid.apply_constraints(dom, problems.rhs_sample(dom, "smooth-trig", 1.0))

p, mu = 1.5, 0.05
print(f"frozen solves around a fixed base field, p={p}, mu={mu}, n={n}")
print("eps        ||u(eps) - u(prev)||_H1   coef_max / bound")
prev = None
for k, eps in enumerate((8 * h, 4 * h, 2 * h, h)):
    u, info = solver.frozen_linear_solve(dom, base, eps=eps, p=p, mu=mu, f=f)
    bound = 1.0 + 5.0 * h
    if prev is None:
        gap = "(first level)"
    else:
        gap = f"{grid.norm(dom, u - prev, 2, sobolev_level=1):.6e}"
    print(f"{eps:<10.4f} {gap:<25s} {info.coef_max:.6f} / {bound:.6f}")
    prev = u

print()
print("gaps shrinking level over level is the eps -> 0 stability; the")
print("coefficient ratio staying below 1 + 5h is the discrete version of")
print("the mollified weights respecting the continuum coefficient bound.")
