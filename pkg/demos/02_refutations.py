"""
Two ways to prove a tensor is not completely positive
=====================================================

Some tensors fail before any optimization: a positive entry whose index
set is not inside a support clique.  Others pass that screen and are only
refuted by an infeasible relaxation, which comes with a Farkas ray that can
be checked independently.
"""

import json
import math

from idealcp import DecomposeOptions, SymmetricTensor, decompose
from idealcp.decompose import certificate_to_dict, recheck_certificate

# %%
# A coverage failure: A_123 > 0 while A_112 = 0
a = SymmetricTensor(3, 3, {(1, 2, 3): 1, (1, 1, 1): 1, (2, 2, 2): 1, (3, 3, 3): 1})
v = decompose(a)
print(v.kind.value, type(v.certificate).__name__)
print("uncovered entries:", v.certificate.uncovered)
print("SDP time:", v.timings["sdp"])

# %%
# A moment bound: for nonnegative atoms, sum w v1^2 v2^2 can never exceed
# sqrt(sum w v1^4 * sum w v2^4).  Here the middle entry is 5 against a bound of 1.
b = SymmetricTensor(4, 2, {(1, 1, 1, 1): 1, (2, 2, 2, 2): 1, (1, 1, 2, 2): 5,
                           (1, 1, 1, 2): 0.01, (1, 2, 2, 2): 0.01})
print("bound:", math.sqrt(b[(1, 1, 1, 1)] * b[(2, 2, 2, 2)]), "entry:", b[(1, 1, 2, 2)])

v = decompose(b, DecomposeOptions(level=2))
cert = v.certificate
print(v.kind.value, type(cert).__name__, "at t =", cert.level)
print("dual objective %.3g, stationarity residual %.2e"
      % (cert.report.dual_objective, cert.report.stationarity_residual))

# the certificate survives a JSON roundtrip and is re-verified from scratch
d = json.loads(json.dumps(certificate_to_dict(cert)))
print("re-verified:", recheck_certificate(b, d))
