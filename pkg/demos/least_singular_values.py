"""Least singular values.

For the Jordan block J all but one singular value of J - lam stay above
1 - |lam| inside the unit disk; the last one is exponentially small.
For a unitary Y, s_min(Y - lam) >= |1 - |lam|| exactly.
"""

import numpy as np

from singlering.randmat import EnsembleSpec, assemble, jordan_sv_check, jordan_svals, smin, smin_tail

for r in (0.3, 0.7, 1.5):
    s = jordan_svals(200, r)
    print(f"|lam| = {r}: two smallest singular values of J - lam: {s[-2]:.4f}, {s[-1]:.3e};"
          f" bound holds: {jordan_sv_check(200, r)}")

spec = EnsembleSpec(200, seed=2, trials=10)
y = assemble(spec, 0)[0]
for lam in (0.0, 0.5, 0.9j, 1.5):
    print(f"unitary Y: s_min(Y - {lam}) = {smin(y, lam):.6f}, floor {abs(1 - abs(lam)):.6f}")

stress = EnsembleSpec(
    200, sigma={"kind": "two_level", "v1": 1.0, "v2": {"power": -5}, "fraction": 0.5},
    M=2.0, seed=4, trials=20, alpha=5,
)
tail = smin_tail(stress, 0.5, [200.0**-8, 1e-6, 1e-3, 1e-2])
print("two-level Sigma, P(s_min(Y - 0.5) < t):", dict(zip(tail.thresholds.tolist(), tail.exceedance.tolist())))
