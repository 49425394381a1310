"""Singular-value profile of K on the full grid and on the comparison window, and the
dilated-family decay for several dilation steps h0 (in N = 256 grid steps)."""

import numpy as np

from waveop_lab import experiments as ex
from waveop_lab.potentials import square_well

p = square_well(4, 1)
for n in (128, 256, 512):
    st = ex.remainder_study(p, 0, n)
    full = st.svals_full[:10] / st.svals_full[0]
    win = st.svals_window[:10] / st.svals_window[0]
    print(f"N={n:4d}  sigma_10/sigma_1 full={full[-1]:.3e} window={win[-1]:.3e}")
    print("          window profile", np.array2string(win, precision=3, max_line_width=200))

print("\ndilated family, f0 centred at lam = 1, width 0.3; ratio ||K f5|| / ||K f2||")
for step in (2, 4, 8, 12):
    st = ex.remainder_study(p, 0, 256, family_step=step)
    d = st.decay
    mono = bool(np.all(np.diff(d[2:]) < 0))
    print(f"h0 = {step:2d} steps  ratio={d[5] / d[2]:.3f}  monotone from n=2: {mono}")

print("\n||K f|| against packet centre (power law near threshold)")
st = ex.remainder_study(p, 0, 256)
gE = st.grid_E
from waveop_lab.wave_operators import normalized_packets  # noqa: E402

cs = np.geomspace(1e-2, 1.0, 7)
norms = [gE.norm(st.K @ v) for v in normalized_packets(gE, cs, 0.3)]
slope = np.polyfit(np.log(cs), np.log(norms), 1)[0]
for c, v in zip(cs, norms):
    print(f"  lam_c={c:.3g}  ||K f||={v:.4e}")
print(f"  fitted exponent {slope:.3f}")
