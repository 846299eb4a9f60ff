"""Sampled phase-space defect on a small model (N=2, n_max=4, dim 126).

Run: python3 demos/phase_probe_small.py
The full-size probe is the phase_probe spec of the acceptance suite; this
version finishes in seconds and shows the same ordering of slopes.
"""

from opelab import fields as F
from opelab import fock, norms

basis = fock.build_basis(fock.ModelConfig(N=2, n_max=4))
radii = norms.geometric_radii(0.4, 0.8, 6)
for labels in (["1"], ["1", "phi", ":phi^2:", "d0 phi", "d1 phi"]):
    p = norms.GammaProjection(F.FieldBasis.from_labels(labels, 1), basis)
    fit = norms.delta_gamma_scan(p, radii, count=16, seed=0)
    print(f"{', '.join(labels):32s} slope {fit.slope:.3f}  defects {fit.values[0]:.2e} .. {fit.values[-1]:.2e}")
