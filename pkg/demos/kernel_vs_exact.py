"""
Two constructions of the Hadamard operator
==========================================

*kernel* mode builds each column from the harmonic measure of the current
domain, the direct lattice version of a Poisson kernel.  It satisfies the
Gram identity only approximately, and the error shrinks as the lattice is
refined.  *exact* mode factors the Green increments and satisfies it to
round-off.  Both produce increments that are harmonic in the earlier
domain.
"""

import numpy as np

from hadamard_gff import (
    ConcentricDisk,
    build_exact_mode,
    build_flow,
    build_kernel_mode,
    flow_grid,
    gram_defect,
    increment,
    increment_residual,
)

disk = ConcentricDisk((0.0, 0.0), 1.0)

for n, M in [(32, 10), (64, 20)]:
    flow = build_flow(flow_grid(disk, n), disk, M)
    kernel = build_kernel_mode(flow)
    exact = build_exact_mode(flow)
    print(f"n = {n:3d}, M = {M:2d}: Gram defect kernel {gram_defect(kernel, 1.0, 1.0):.3f}, "
          f"exact {gram_defect(exact, 1.0, 1.0):.1e}")

# %%
# The increment ``(Q_{t'} - Q_t) f`` is discrete-harmonic inside ``V_t``.
rng = np.random.default_rng(0)
f = rng.standard_normal(flow.n_sites)
for name, op in (("kernel", kernel), ("exact", exact)):
    v = increment(op, 0.5, 1.0, f)
    print(f"{name:6s}: harmonicity residual {increment_residual(flow, flow.index_of(0.5), v):.1e}")
