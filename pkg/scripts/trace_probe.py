"""The weighted norm lam^(-1/4) ||F0_l(lam)|| (t = 2) per channel: where its sup sits
and how much is left at lam = 1e3."""

import math

import numpy as np

from waveop_lab.spectral_transform import CHANNEL_CONST, weighted_norm_probe

lam = np.geomspace(1e-3, 1e3, 256)
print(f"s-wave threshold limit C sqrt(pi/4) = {CHANNEL_CONST * math.sqrt(math.pi / 4):.6f}")
for ell in range(5):
    pr = weighted_norm_probe(ell, lam, t=2.0)
    print(f"l={ell}  sup={pr.sup:.4f} at lam={lam[pr.argmax]:.3g}  interior={pr.interior_max}  "
          f"value(1e3)/sup={pr.tail_ratio:.3f}")
