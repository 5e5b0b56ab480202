"""
Deciding complete positivity of a small tensor
==============================================

A 3x3x3 symmetric tensor with two zero patterns.  We look at its support
cliques, run the coverage screen and then ask for a decomposition.
"""

import numpy as np

from idealcp import DecomposeOptions, SymmetricTensor, decompose, maximal_cliques, necessary_condition
from idealcp.tensor import from_decomposition, l1_distance

# entries are keyed by sorted 1-based indices; anything unlisted is zero
a = SymmetricTensor(3, 3, {
    (1, 1, 1): 2, (1, 1, 2): 1, (1, 1, 3): 1, (1, 2, 2): 1,
    (1, 3, 3): 1, (2, 2, 2): 2, (3, 3, 3): 1,
})
print(a)

# A_123 = A_223 = A_233 = 0, so vertices 2 and 3 never share a clique
cliques = maximal_cliques(a)
print("cliques:", cliques.cliques)
print("screen passes:", necessary_condition(a, cliques).passed)

# one moment sequence per clique, level t = 2
v = decompose(a, DecomposeOptions(level=2))
print("verdict:", v.kind.value, "at levels", v.levels)

np.set_printoptions(precision=6, suppress=True)
for at in v.decomposition.atoms:
    print(f"  weight {at.weight:.6f}  vector {at.vector}  clique {at.clique}")

# the reconstruction is recomputed here, not taken from the verdict
err = l1_distance(from_decomposition(v.decomposition), a)
print(f"l1 reconstruction error: {err:.2e}")
