"""
The variance clock of a test function
=====================================

For a test function ``f`` the process ``t -> <f, Psi_t>`` is a
time-changed Brownian motion; its variance grows at the rate
``kappa(t)``, the weighted boundary energy of the harmonic sweep of
``f`` onto the boundary of ``V_t``.  For a unit mass at the centre of the
disk flow, ``kappa(t) = 1 / (2 pi t)``.
"""

import numpy as np

from hadamard_gff import (
    ConcentricDisk,
    build_exact_mode,
    build_flow,
    flow_grid,
    gaussian_bump,
    harmonic_measures,
    kappa,
    skeleton_point_mass,
    time_change_check,
)

disk = ConcentricDisk((0.0, 0.0), 1.0)
flow = build_flow(flow_grid(disk, 96), disk, 32)
hms = harmonic_measures(flow)

kap = kappa(flow, skeleton_point_mass(flow), hms)
for k in range(8, flow.M + 1, 8):
    t = flow.time_grid[k]
    print(f"t = {t:5.3f}: kappa {kap[k - 1]:.4f}, 1/(2 pi t) {1 / (2 * np.pi * t):.4f}")

# %%
# For a smooth bump the empirical variance follows the integrated rate.
op = build_exact_mode(flow)
rep = time_change_check(op, gaussian_bump(flow, (0.0, 0.0), 0.2), 20000, 5, hms)
for k in range(8, flow.M + 1, 8):
    print(f"t = {rep.times[k]:5.3f}: Var {rep.variance[k]:.5f}, "
          f"integrated kappa {rep.kappa_integral[k]:.5f}, ratio {rep.ratio[k]:.3f}")
print(f"largest increment correlation z-score: {np.max(np.abs(rep.increment_z)):.2f}")
