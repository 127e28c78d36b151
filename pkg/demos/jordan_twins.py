"""A nilpotent Jordan block and a Haar unitary, each perturbed by U Sigma V*.

With Sigma two-level (half ones, half N^-5) the two clouds look the same,
and both follow the Brown field of (Haar unitary, sigma), even though the
Jordan block alone has every eigenvalue at zero.
"""

import numpy as np

from singlering import GridSpec, brown_field
from singlering.experiments.compare import compare_esd_to_brown, energy_distance
from singlering.experiments.config import model_for_ensemble
from singlering.randmat import EnsembleSpec, assemble, eigenvalues

n = 400
spec = EnsembleSpec(
    n,
    sigma={"kind": "two_level", "v1": 1.0, "v2": {"power": -5}, "fraction": 0.5},
    a={"kind": "jordan_block"},
    M=2.0,
    seed=11,
    trials=3,
)
twin = spec.with_(a={"kind": "haar"})
ea = np.concatenate([eigenvalues(assemble(spec, k)[0]) for k in range(spec.trials)])
ew = np.concatenate([eigenvalues(assemble(twin, k)[0]) for k in range(spec.trials)])
print(f"energy distance Jordan vs Haar clouds: {energy_distance(ea, ew):.4f}")

fld = brown_field(model_for_ensemble(spec), GridSpec(0j, 5.0, 121))
print(f"field mass {fld.total_mass:.4f}, atoms {fld.atoms}")
for name, e in (("Jordan", ea), ("Haar", ew)):
    m = compare_esd_to_brown(e, fld)
    print(f"{name:6s} vs field: energy {m['energy_distance']:.4f}, radial KS {m['radial_ks']:.4f}")
