"""The single ring: a = 0 and sigma = (delta_1/2 + delta_1)/2.

The Brown measure lives on the annulus between 1/|T^-1|_2 = sqrt(0.4) and
|T|_2 = sqrt(0.625). We compute its field on a lattice, look at how the mass
is spread, and compare it with eigenvalues of U Sigma V*.
"""

import math

import numpy as np

from singlering import AtomicMeasure, GridSpec, OperatorModel, brown_field, classify, log_potential
from singlering.experiments.compare import compare_esd_to_brown
from singlering.randmat import EnsembleSpec, assemble, eigenvalues

m = OperatorModel.scalar_zero(AtomicMeasure([0.5, 1.0]))
r_in, r_out = math.sqrt(0.4), math.sqrt(0.625)
print(f"predicted radii: {r_in:.5f} .. {r_out:.5f}")
for r in (0.3, 0.7, 1.0):
    print(f"  |lam| = {r}: {classify(m, r).label:15s} potential {log_potential(m, r):+.6f}")
# inside the hole the potential is E log sigma, outside it is log|lam|
print(f"  E log sigma = {0.5 * math.log(0.5):+.6f}")

fld = brown_field(m, GridSpec(0j, 3.0, 121))
r = np.abs(fld.grid.nodes())
h = fld.grid.spacing
print(f"field: total mass {fld.total_mass:.5f}, "
      f"in the annulus (+-2 cells) {fld.mass_in((r >= r_in - 2 * h) & (r <= r_out + 2 * h)):.5f}")

spec = EnsembleSpec(400, sigma={"kind": "explicit", "values": [0.5, 1.0]}, M=2.0, seed=3, trials=5)
eigs = np.concatenate([eigenvalues(assemble(spec, k)[0]) for k in range(spec.trials)])
print("eigenvalues vs field:", {k: round(v, 4) if isinstance(v, float) else v
                                for k, v in compare_esd_to_brown(eigs, fld).items()})
