"""Constants estimation and the estimate auditor.

The second-derivative bounds come with explicit constants.  Two of them are
pure inequality constants over tensor pairs (c4 for the quadratic-form
bound, c5(q) for its q-weighted variant), estimated here by maximizing
sampled ratios; axis-aligned modes realize the extremum exactly, so c4
lands on 1.0.  r_of_q maps an integrability exponent q to the p-range
where the W^{2,q} estimate applies, and admissible_p inverts the budget
c6 * r(q,p) < threshold into an admissible p-interval.

The second half runs one full estimate verification: solve a family of
problems, form the lhs/rhs ratio of the claimed bound for each, and demand
the ratios stay bounded with a tame spread.
"""

import json

from pstruct import audit, grid

dom = grid.build_domain("dirichlet_box", 24)
c4 = audit.estimate_c4(dom, samples=6, seed=3)
print(f"c4 estimate (n=24): {c4:.6f}   (axis modes realize the sup exactly)")
table = audit.c5_table(dom, q_list=(2.0, 4.0, 8.0, 16.0), samples=6, seed=3)
print("q     c5(q)")
for q, val in table.items():
    print(f"{q:<5g} {val:.6f}")

print()
fit = audit.growth_fit(table)
print(f"growth fit on q window {fit['window']}: "
      f"k1_hat {fit['k1_hat']:.4f}, k2_hat {fit['k2_hat']:.4f}, "
      f"ls slope {fit['ls_slope']:.4f}")
print("p      r(2,p) = 6/(p+1)")
for p in (1.25, 1.5, 1.75):
    print(f"{p:<6g} {audit.r_of_q(2.0, p):.6f}")

rows = audit.admissible_p((2.0, 4.0), c4, table)
for row in rows:
    print(f"admissible p at q={row['q']:g}: ({row['p_min']:.4f}, {row['p_max']:g})"
          f"  constant_used={row['constant_used']:.4f}")

print()
name = "p_gt_2_W22"
res = audit.verify_estimate(name, n=12)
print(f"verify_estimate({name!r}, n=12): verdict {res['verdict']}")
print(f"  hypothesis covered: {res['covered']}")
print(f"  ratio spread by (seed, mu): "
      + json.dumps({k: round(v, 3) for k, v in res['spreads'].items()}))
if res["mu_fit"] is not None:
    print(f"  mu-scaling fit: slope {res['mu_fit']['slope']:.3f} "
          f"(target {res['mu_fit']['target']:.2f}, "
          f"tol {res['mu_fit']['tolerance']:.2f})")
