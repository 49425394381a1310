"""Time-dependent route against the eigenfunction route for one packet, under
refinement of the radial step and the time step."""

import sys

from waveop_lab.grids import make_log_energy_grid
from waveop_lab.potentials import square_well
from waveop_lab.wave_operators import eigenfunction_apply, normalized_packets, time_dependent_apply

centre = float(sys.argv[1]) if len(sys.argv) > 1 else 4.0
p = square_well(4, 1)
gE = make_log_energy_grid(256, 1e-3, 1e3)
v = normalized_packets(gE, [centre], 0.3)[0]
ref = eigenfunction_apply(p, 0, gE, v, step=0.005)
for step, dt in ((0.01, 0.04), (0.005, 0.02), (0.0025, 0.01)):
    r = time_dependent_apply(p, 0, gE, v, step=step, dt=dt)
    print(f"step={step:<7g} dt={dt:<5g} T={r.t_max:<5g} cauchy={r.indicator:.2e}  "
          f"error={gE.norm(r.values - ref):.3e}", flush=True)
