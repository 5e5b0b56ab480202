"""
Clique screen on random binary tensors
======================================

Random 0/1 tensors with a given density of off-diagonal ones almost never
pass the coverage screen, and the clique search stays fast as n and m grow.
A reduced version of the ``screen-grid`` bench preset.
"""

from idealcp.bench import format_report, run_suite

suite = {"kind": "screen", "n": [8, 10, 12], "m": [4, 6], "nzd": [0.4, 0.98],
         "instances": 3, "seed": 0}
print(format_report(run_suite(suite)))

# with no off-diagonal ones every positive entry is a diagonal, always covered
print(format_report(run_suite({**suite, "nzd": [0.0]})))
