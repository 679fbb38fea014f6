"""Harmonic measure, Poisson extension and harmonic sweep on the lattice.

``hm(z, a)`` is the probability that simple random walk started at the
interior site ``z`` first leaves the mask through the boundary site ``a``.
Since ``hm(., a)`` solves the Dirichlet problem with indicator data at
``a``, the whole matrix is ``(4 I - A)^{-1} B`` with ``B`` the
interior/boundary incidence matrix, and ``hm / ds`` stands in for the
Poisson kernel density against arclength.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dirichlet import DENSE_LIMIT, GreenSolver, green_solver, solve_poisson
from .errors import InvalidParameter, MaskMismatch, ResourceLimit, SupportNotOnSkeleton
from .grid import DomainMask

__all__ = [
    "HarmonicMeasure",
    "BoundaryFunction",
    "harmonic_measure",
    "harmonic_measures",
    "poisson_extend",
    "harmonic_sweep",
    "kappa",
    "modified_green_potential",
]


class BoundaryFunction:
    """Values on the boundary sites of a mask, with their arclength weights."""

    def __init__(self, mask: DomainMask, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != mask.n_boundary:
            raise MaskMismatch("boundary function does not match the mask boundary")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("boundary values must be finite")
        self.mask = mask
        self.values = values

    @property
    def weights(self):
        return self.mask.ds

    def pairing(self, other) -> float:
        """``sum_a phi(a) psi(a) ds(a)``."""
        other = other.values if isinstance(other, BoundaryFunction) else np.asarray(other)
        return float(np.sum(self.values * other * self.mask.ds))

    def __repr__(self):
        return f"BoundaryFunction(n_boundary={len(self.values)})"


class HarmonicMeasure:
    """Exit distribution of simple random walk from a mask.

    Applications go through the sparse factorisation; the dense matrix is
    only formed on request via :attr:`matrix`.
    """

    def __init__(self, mask: DomainMask, solver: GreenSolver | None = None):
        self.mask = mask
        self.solver = solver if solver is not None else green_solver(mask)
        if self.solver.mask is not mask and self.solver.mask != mask:
            raise MaskMismatch("solver was built for a different mask")
        self._matrix = None

    @property
    def matrix(self):
        """Dense ``(interior, boundary)`` matrix of exit probabilities."""
        if self._matrix is None:
            m = self.mask
            if m.n_interior * m.n_boundary > DENSE_LIMIT * 2000:
                raise ResourceLimit("harmonic measure matrix too large to materialise")
            hm = self.solver.solve_stencil(m.incidence.toarray())
            hm.setflags(write=False)
            self._matrix = hm
        return self._matrix

    def columns(self, boundary_idx):
        """``hm(., a)`` for the given boundary indices, shape ``(K, len)``."""
        idx = np.asarray(boundary_idx, dtype=int)
        if self._matrix is not None:
            return self._matrix[:, idx]
        return self.solver.solve_stencil(self.mask.incidence[:, idx].toarray())

    def extend(self, phi):
        """Harmonic extension of boundary values (vector or matrix)."""
        phi = np.asarray(phi, dtype=float)
        if self._matrix is not None:
            return self._matrix @ phi
        return self.solver.solve_stencil(self.mask.incidence @ phi)

    def sweep_mass(self, f):
        """``sum_z hm(z, a) f(z) h^2`` for every boundary site ``a``."""
        f = np.asarray(f, dtype=float)
        h2 = self.mask.grid.h ** 2
        if self._matrix is not None:
            return (self._matrix.T @ f) * h2
        return (self.mask.incidence.T @ self.solver.solve_stencil(f)) * h2


def harmonic_measure(mask: DomainMask, solver: GreenSolver | None = None) -> HarmonicMeasure:
    return HarmonicMeasure(mask, solver)


def harmonic_measures(flow, workers: int = 1) -> list:
    """One :class:`HarmonicMeasure` per mask ``V_0, ..., V_M`` of a flow."""
    def build(mask):
        return None if mask is None else HarmonicMeasure(mask)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(build, flow.masks))
    return [build(m) for m in flow.masks]


def _check_boundary(hm: HarmonicMeasure, phi):
    if isinstance(phi, BoundaryFunction):
        if phi.mask is not hm.mask and phi.mask != hm.mask:
            raise MaskMismatch("boundary function lives on another mask")
        return phi.values
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != hm.mask.n_boundary:
        raise MaskMismatch("boundary data length does not match the mask boundary")
    return phi


def poisson_extend(hm: HarmonicMeasure, phi):
    """``u(z) = sum_a hm(z, a) phi(a)``: the discrete harmonic extension."""
    return hm.extend(_check_boundary(hm, phi))


def harmonic_sweep(hm: HarmonicMeasure, f) -> BoundaryFunction:
    """Sweep interior mass onto the boundary, as a density against ``ds``.

    ``phi(a) = sum_z hm(z, a) f(z) h^2 / ds(a)``, so that
    ``<poisson_extend(psi), f> = sum_a psi(a) phi(a) ds(a)`` exactly.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != hm.mask.n_interior:
        raise MaskMismatch("interior vector does not match the mask")
    return BoundaryFunction(hm.mask, hm.sweep_mass(f) / hm.mask.ds)


def kappa(flow, f, hms=None):
    """Variance rate ``kappa(t_k) = sum_a (sweep_k f)(a)^2 rho(a) ds(a)``.

    Only the part of ``f`` inside ``V_k`` is swept at time ``t_k``.
    Returns an array of length ``M`` (entry ``k-1`` is ``kappa(t_k)``).
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != flow.n_sites:
        raise MaskMismatch("f must be a vector over V_M in flow order")
    hms = hms if hms is not None else harmonic_measures(flow)
    out = np.zeros(flow.M)
    for k in range(1, flow.M + 1):
        hm = hms[k]
        sw = harmonic_sweep(hm, f[: flow.sizes[k]]).values
        out[k - 1] = np.sum(sw ** 2 * flow.boundary_rho(k) * hm.mask.ds)
    return out


def _check_skeleton_support(flow, f):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != flow.n_sites:
        raise MaskMismatch("f must be a vector over V_M in flow order")
    if np.any(f[flow.n_skeleton:] != 0):
        raise SupportNotOnSkeleton("f must be a combination of point masses on skeleton sites")
    return f


def modified_green_potential(flow, f, t, hms=None, solver=None):
    """Green potential of ``f`` on ``V_M``, replaced inside ``V_t`` by the
    harmonic extension of its trace on the boundary of ``V_t``."""
    f = _check_skeleton_support(flow, f)
    k = flow.index_of(t)
    solver = solver if solver is not None else green_solver(flow.mask)
    u = solve_poisson(solver, f)
    if k == 0:
        return u
    hm = hms[k] if hms is not None else HarmonicMeasure(flow.masks[k])
    b = hm.mask.boundary
    trace = flow.mask.to_grid(u)[b[:, 0], b[:, 1]]
    out = u.copy()
    out[: flow.sizes[k]] = poisson_extend(hm, trace)
    return out
