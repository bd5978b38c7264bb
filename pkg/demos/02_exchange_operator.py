"""
The non-local exchange operator
===============================

Pi is the reflection across the impedance image of the single-trace space,
in the inverse-impedance metric.  Classic Schwarz methods swap traces
pairwise across each interface and struggle at cross points; Pi instead
couples every block meeting a skeleton dof in one shot.  Its defining
algebra: an involution, an isometry, fixing matched Neumann data and
negating opposite Neumann jumps.
"""

import numpy as np

from helmskel import build_problem
from helmskel.traces import SkeletonField, single_trace_adjoint, single_trace_embed

problem = build_problem(8, 8, 2, 2, k=5.0, bc_kind="robin")
imp = problem.impedance
rng = np.random.default_rng(42)


def rand_dual():
    return SkeletonField([rng.standard_normal(n) + 1j * rng.standard_normal(n)
                          for n in problem.block_sizes], "dual")


# Involution and isometry, measured over random dual fields.
worst_inv, worst_iso = 0.0, 0.0
for _ in range(100):
    q = rand_dual()
    piq = problem.exchange.apply(q)
    worst_inv = max(worst_inv, imp.norm(problem.exchange.apply(piq) - q) / imp.norm(q))
    worst_iso = max(worst_iso, abs(imp.norm(piq) / imp.norm(q) - 1.0))
print(f"involution residual: {worst_inv:.2e}")
print(f"isometry residual:   {worst_iso:.2e}")

# Matched data (impedance image of a single-valued skeleton function) is a
# fixed point ...
x = rng.standard_normal(problem.index.n_sigma)
fixed = imp.apply(single_trace_embed(x, problem.index))
print(f"fixed subspace residual: "
      f"{imp.norm(problem.exchange.apply(fixed) - fixed) / imp.norm(fixed):.2e}")

# ... while pure Neumann jumps flip sign.
counts = np.zeros(problem.index.n_sigma)
for m in problem.index.block_map:
    np.add.at(counts, m, 1.0)
r = rand_dual()
y = single_trace_adjoint(r, problem.index)
jump = r - SkeletonField([(y / counts)[m] for m in problem.index.block_map], "dual")
print(f"jump negation residual:  "
      f"{imp.norm(problem.exchange.apply(jump) + jump) / imp.norm(jump):.2e}")

# Non-locality at the cross point: a unit impulse on one subdomain block at
# the center vertex spreads to every block containing that vertex.
cross = problem.index.cross_points[0]
q = imp.zeros("dual")
pos = np.flatnonzero(problem.partition.boundary_dofs[0] == cross)[0]
q.blocks[1][pos] = 1.0
piq = problem.exchange.apply(q)
touched = [b for b, blk in enumerate(piq.blocks) if np.abs(blk).max() > 1e-12]
print(f"impulse at the cross point touches blocks {touched} "
      f"(0 = outer boundary, 1..4 = subdomains)")
