"""
Recovering atoms from moments
=============================

Moments of a finitely atomic measure give moment matrices whose rank stops
growing.  Once two consecutive ranks agree, the atoms can be read off the
eigenvectors of the multiplication operators.
"""

import numpy as np

from idealcp.extraction import check_flatness, extract_atoms
from idealcp.moments import Tms

rng = np.random.default_rng(1)
points = rng.random((4, 3))
weights = np.array([0.5, 1.0, 1.5, 2.0])

# moments up to degree 6 of the measure sum_r w_r delta(points_r)
z = Tms.from_measure(points, weights, 6)

rep = check_flatness(z, 3)
print("ranks of M_0..M_3:", rep.ranks, "flat at s =", rep.level)

mu = extract_atoms(z, rep.rank, rep.level)
order = np.argsort(mu.weights)
np.set_printoptions(precision=8, suppress=True)
print("weights:", mu.weights[order])
print("points:\n", mu.points[order])
print("largest point error:", np.abs(mu.points[order] - points).max())
