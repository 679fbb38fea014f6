"""
Circle averages are a Brownian motion
=====================================

For the disk flow, averaging the field of the whole disk over the circle
of radius ``t`` gives ``X_t``, and ``X_t`` behaves like Brownian motion
run with the clock ``ln(1/t) / (2 pi)``.  Here ``X_t`` is computed from
the white noise as ``<delta_0, Psi_1 - Psi_t>``, which on the lattice
equals pairing the boundary values of ``Psi_1`` with harmonic measure.
"""

import numpy as np

from hadamard_gff import (
    ConcentricDisk,
    CovAccumulator,
    boundary_average,
    boundary_average_cov,
    build_exact_mode,
    build_flow,
    flow_grid,
    harmonic_measures,
    RngSpec,
    sample_pairings,
    sample_white_noise,
    skeleton_point_mass,
)

disk = ConcentricDisk((0.0, 0.0), 1.0)
flow = build_flow(flow_grid(disk, 96), disk, 32)
op = build_exact_mode(flow)
hms = harmonic_measures(flow)
f = skeleton_point_mass(flow)  # unit mass at the centre

# %%
# The two ways of computing ``X_t`` agree draw by draw.
phi = sample_white_noise(flow, RngSpec(1, 0))
for t in (0.25, 0.5, 0.75):
    a, b = boundary_average(op, phi, t, f, hms)
    print(f"t = {t:4.2f}: boundary pairing {a:+.6f}, noise pairing {b:+.6f}")

# %%
# Variances from 20 000 draws, the shell-by-shell quadrature and the
# closed form.
times = [0.25, 0.5, 0.75]
draws = sample_pairings(op, f[None, :], 3, 20000, times=times + [1.0])[:, :, 0]
X = draws[:, -1:] - draws[:, :-1]
rep = CovAccumulator(len(times)).accumulate(X).report()
for i, t in enumerate(times):
    quad = boundary_average_cov(flow, f, f, t, t, hms)
    print(f"t = {t:4.2f}: Var X_t = {rep.variance[i]:.4f} +- {rep.variance_se[i]:.4f}, "
          f"quadrature {quad:.4f}, ln(1/t)/2pi = {np.log(1 / t) / (2 * np.pi):.4f}")

# %%
# Increments over disjoint intervals are uncorrelated.
incs = np.diff(draws, axis=1)
print("increment correlations:\n", np.round(np.corrcoef(incs.T), 3))
