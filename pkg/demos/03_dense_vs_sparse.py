"""
Dense and clique-sparse relaxations
===================================

The dense relaxation uses one moment sequence in all n variables.  The
sparse one uses a sequence per support clique, which shrinks the largest
PSD block.  A sparse solution lifts to a feasible dense point with the same
objective, so the dense optimum can only be lower.
"""

import itertools

from idealcp import SymmetricTensor, maximal_cliques, random_cp
from idealcp.extraction import lift_sparse
from idealcp.moments import assemble_dense, assemble_sparse, random_sos_objective
from idealcp.sdp import solve, verify_result

# %%
# Block sizes: three overlapping 4-cliques in 10 variables, order 4, level 3
entries = {}
for s in ((1, 2, 3, 4), (4, 5, 6, 7), (7, 8, 9, 10)):
    for idx in itertools.combinations_with_replacement(s, 4):
        entries[idx] = 1.0
a = SymmetricTensor(4, 10, entries)
c = maximal_cliques(a)
f = random_sos_objective(10, 6, seed=0)
print("cliques:", c.cliques)
print("largest PSD block, dense: ", assemble_dense(a, f, 3).max_psd_block)
print("largest PSD block, sparse:", assemble_sparse(a, f, c, 3).max_psd_block)

# %%
# Objectives and lifting on a small random instance
b, _ = random_cp(5, 3, 3, 3, seed=4)
f = random_sos_objective(5, 4, seed=1)
c = maximal_cliques(b)
dense, sparse = assemble_dense(b, f, 2), assemble_sparse(b, f, c, 2)
rd, rs = solve(dense), solve(sparse)
print(f"dense  objective {rd.objective:.9f}  ({rd.message})")
print(f"sparse objective {rs.objective:.9f}  ({rs.message})")

z = lift_sparse(rs.tms, c, 5, 4)
rep = verify_result(dense, z.values)
print(f"lifted point: equality residual {rep.max_residual:.1e}, min eigenvalue {rep.min_eigenvalue:.1e}")
print(f"objective at lifted point {dense.objective_value(z.values):.9f}")
