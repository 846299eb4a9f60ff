"""Extraction of the normal product space of phi (x) phi and what the mode
cutoff does to it.

Run: python3 demos/normal_product_space.py

In the truncated model the identity coefficient Delta(x - y) stays finite at
coinciding points, so the leading term Delta(0) 1 + :phi^2: is a single
direction. The extracted space for beta = 0 is that line (inside
span{1, :phi^2:}); beta = 1 adds the first-order direction.
"""

import numpy as np

from opelab import fields as F
from opelab import fock, normal_products as NP, products

cfg = fock.ModelConfig()
basis = fock.build_basis(cfg)
P = products.ProductExpression.simple("phi", "phi")
x0 = np.array(((0.0, -0.003), (0.002, 0.007)))
seq = products.spacelike_sequence(x0, 0.6, 16, products.taylor_window(cfg))
cand = F.field_basis(1, 3, 1, 1)

# hand Taylor expansion of Delta(x - y) 1 + :phi(x) phi(y): about the origin
_, k, omega = F.modes(cfg)
delta0 = np.sum(1 / (2 * cfg.L * omega))
a0 = delta0 * cand.unit("1") + cand.unit(":phi^2:")
a1 = (-1j * len(omega) / (2 * cfg.L) * (x0[0, 0] - x0[1, 0]) * cand.unit("1")
      + (x0[0, 0] + x0[1, 0]) * cand.unit(":phi d0 phi:") + (x0[0, 1] + x0[1, 1]) * cand.unit(":phi d1 phi:"))
print(f"Delta(0) = {delta0:.6f} (finite because of the cutoff N={cfg.N})")

n0 = NP.extract_normal_product(P, cand, seq, basis, beta=0.0)
v = n0.vectors[:, 0] / n0.vectors[cand.index(F.parse_label(":phi^2:", 1)), 0]
terms = "  ".join(f"{c.real:+.6f} {lab}" for c, lab in zip(v, cand.labels) if abs(c) > 1e-9)
print(f"beta=0: dimension {n0.dimension}: {terms}")
print(f"  slopes of the singular directions: {[round(s, 4) for s in n0.slopes if s is not None]}")
print(f"  angle to span{{1, :phi^2:}}: {NP.max_angle(n0.vectors, NP.span_of(cand, ['1', ':phi^2:'])):.1e}")
print(f"  angle to the order-0 Taylor line: {NP.max_angle(n0.vectors, a0[:, None]):.1e}")

n1 = NP.extract_normal_product(P, cand, seq, basis, beta=1.0, check_spapp=False)
print(f"beta=1: dimension {n1.dimension}, angle to the Taylor plane: "
      f"{NP.max_angle(n1.vectors, np.stack([a0, a1], axis=1)):.1e}")
