"""Flows of growing domains on the lattice.

A flow ``Omega(t)``, ``0 < t <= 1``, is described by one or more radial
fronts ``F(t, theta) = center + r(t, theta) * exp(i*theta)``.  Each site of
``Omega(1)`` is passed by exactly one front at its entry time ``tau``;
the sites that never are (the skeleton, up to half a lattice spacing)
are handled separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (
    InvalidParameter,
    OnSkeleton,
    OutsideDomain,
    ResolutionTooCoarse,
    TNotOnGrid,
)
from .grid import DomainMask, Grid, build_grid

__all__ = [
    "ConcentricDisk",
    "StarShaped",
    "Annular",
    "DomainFlow",
    "PolarIntegral",
    "tau_of_point",
    "rho_at",
    "build_flow",
    "flow_grid",
    "polar_integrate",
]

_BISECTION_STEPS = 60


@dataclass(frozen=True)
class _Front:
    r: Callable
    r_t: Callable
    r_theta: Callable
    increasing: bool


def _polar(center, point):
    p = np.asarray(point, dtype=float)
    dx = p[..., 0] - center[0]
    dy = p[..., 1] - center[1]
    return np.hypot(dx, dy), np.arctan2(dy, dx)


class _RadialFlow:
    """Shared machinery for flows made of radial fronts."""

    center: tuple

    def fronts(self) -> tuple:
        raise NotImplementedError

    def select_front(self, rad, theta):
        """Front index for each point; -1 marks the skeleton itself."""
        raise NotImplementedError

    def skeleton_distance(self, point):
        raise NotImplementedError

    @property
    def extent(self) -> float:
        """Largest distance from the centre to a point of ``Omega(1)``."""
        raise NotImplementedError

    def digest(self) -> str:
        return repr(self)


@dataclass(frozen=True)
class ConcentricDisk(_RadialFlow):
    """Discs of radius ``t * R`` about ``center``; skeleton is the centre."""

    center: tuple = (0.0, 0.0)
    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidParameter("disk radius must be positive")

    def fronts(self):
        R = self.R
        return (_Front(
            r=lambda t, th: t * R + 0.0 * th,
            r_t=lambda t, th: R + 0.0 * (t + th),
            r_theta=lambda t, th: 0.0 * (t + th),
            increasing=True,
        ),)

    def select_front(self, rad, theta):
        return np.where(rad > 0, 0, -1)

    def skeleton_distance(self, point):
        return _polar(self.center, point)[0]

    @property
    def extent(self):
        return self.R


@dataclass(frozen=True)
class StarShaped(_RadialFlow):
    """``r(t, theta) = t * R0 * (1 + eps * cos(m * theta))``."""

    center: tuple = (0.0, 0.0)
    R0: float = 1.0
    eps: float = 0.0
    m: int = 3

    def __post_init__(self):
        if not self.R0 > 0:
            raise InvalidParameter("R0 must be positive")
        if not abs(self.eps) < 1:
            raise InvalidParameter("need |eps| < 1 so the radial function stays positive")
        if int(self.m) != self.m or self.m < 0:
            raise InvalidParameter("m must be a non-negative integer")

    def fronts(self):
        R0, eps, m = self.R0, self.eps, self.m
        return (_Front(
            r=lambda t, th: t * R0 * (1 + eps * np.cos(m * th)),
            r_t=lambda t, th: R0 * (1 + eps * np.cos(m * th)) + 0.0 * t,
            r_theta=lambda t, th: -t * R0 * eps * m * np.sin(m * th),
            increasing=True,
        ),)

    def select_front(self, rad, theta):
        return np.where(rad > 0, 0, -1)

    def skeleton_distance(self, point):
        return _polar(self.center, point)[0]

    @property
    def extent(self):
        return self.R0 * (1 + abs(self.eps))


@dataclass(frozen=True)
class Annular(_RadialFlow):
    """Annuli ``a(t) < |z - center| < b(t)`` growing out of the circle ``|z - center| = c``.

    ``a(t) = c - t (c - a1)`` and ``b(t) = c + t (b1 - c)``.  The complement
    of every ``Omega(t)`` has two components.
    """

    center: tuple = (0.0, 0.0)
    c: float = 0.5
    a1: float = 0.2
    b1: float = 0.9

    def __post_init__(self):
        if not 0 < self.a1 < self.c < self.b1:
            raise InvalidParameter("need 0 < a1 < c < b1")

    def fronts(self):
        c, a1, b1 = self.c, self.a1, self.b1
        outer = _Front(
            r=lambda t, th: c + t * (b1 - c) + 0.0 * th,
            r_t=lambda t, th: (b1 - c) + 0.0 * (t + th),
            r_theta=lambda t, th: 0.0 * (t + th),
            increasing=True,
        )
        inner = _Front(
            r=lambda t, th: c - t * (c - a1) + 0.0 * th,
            r_t=lambda t, th: -(c - a1) + 0.0 * (t + th),
            r_theta=lambda t, th: 0.0 * (t + th),
            increasing=False,
        )
        return (outer, inner)

    def select_front(self, rad, theta):
        return np.where(rad > self.c, 0, np.where(rad < self.c, 1, -1))

    def skeleton_distance(self, point):
        return np.abs(_polar(self.center, point)[0] - self.c)

    @property
    def extent(self):
        return self.b1


def _solve_tau(front: _Front, rad, theta, t_max):
    """Vectorised bisection for ``r(tau, theta) = rad`` on ``[0, t_max]``."""
    lo = np.zeros_like(rad)
    hi = np.full_like(rad, t_max)
    sign = 1.0 if front.increasing else -1.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = sign * (front.r(mid, theta) - rad) >= 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def _tau_theta(spec, points, t_max):
    rad, theta = _polar(spec.center, points)
    rad = np.atleast_1d(rad)
    theta = np.atleast_1d(theta)
    which = spec.select_front(rad, theta)
    tau = np.full(rad.shape, np.nan)
    for j, front in enumerate(spec.fronts()):
        sel = which == j
        if sel.any():
            # beyond the reach of the front at t_max -> leave nan
            reach = front.r(np.full(sel.sum(), t_max), theta[sel])
            ok = rad[sel] <= reach if front.increasing else rad[sel] >= reach
            t = _solve_tau(front, rad[sel], theta[sel], t_max)
            tau[np.nonzero(sel)[0][ok]] = t[ok]
    return tau, theta, which


def tau_of_point(spec, point):
    """Entry time of a point (or ``(..., 2)`` array of points).

    Raises
    ------
    OnSkeleton
        If a point lies on the skeleton.
    OutsideDomain
        If a point is not in the closure of ``Omega(1)``.
    """
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim == 1
    tau, _, which = _tau_theta(spec, pts.reshape(-1, 2), 1.0)
    if (which < 0).any():
        raise OnSkeleton("point lies on the skeleton; its entry time is undefined")
    if np.isnan(tau).any():
        raise OutsideDomain("point lies outside Omega(1)")
    return float(tau[0]) if scalar else tau.reshape(pts.shape[:-1])


def _rho_from_tau(spec, tau, theta, which):
    rho = np.full(tau.shape, np.nan)
    for j, front in enumerate(spec.fronts()):
        sel = (which == j) & ~np.isnan(tau)
        if sel.any():
            t, th = tau[sel], theta[sel]
            r = front.r(t, th)
            rho[sel] = np.abs(front.r_t(t, th)) * r / np.hypot(front.r_theta(t, th), r)
    return rho


def rho_at(spec, point):
    """Normal speed of the front through ``point``.

    For ``F(t, theta) = center + r e^{i theta}`` one has
    ``|det DF| = |r_t| r`` and ``|dF/dtheta| = sqrt(r_theta^2 + r^2)``.
    """
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim == 1
    tau, theta, which = _tau_theta(spec, pts.reshape(-1, 2), 1.0)
    if (which < 0).any():
        raise OnSkeleton("point lies on the skeleton; its entry time is undefined")
    if np.isnan(tau).any():
        raise OutsideDomain("point lies outside Omega(1)")
    rho = _rho_from_tau(spec, tau, theta, which)
    return float(rho[0]) if scalar else rho.reshape(pts.shape[:-1])


def flow_grid(spec, n: int, margin: int = 2) -> Grid:
    """Grid of ``n`` sites per side with a site at the flow centre.

    The spacing is ``2 * extent / (n - 2 * margin)``, which leaves
    ``margin`` spare layers around ``Omega(1)``.
    """
    if n < 2 * margin + 3:
        raise InvalidParameter(f"n={n} too small for the flow grid")
    h = 2.0 * spec.extent / (n - 2 * margin)
    cx, cy = spec.center
    origin = (cx - (n // 2) * h, cy - (n // 2) * h)
    return build_grid(n, n * h, origin)


@dataclass(frozen=True, eq=False)
class DomainFlow:
    """Lattice discretisation of a domain flow.

    Interior sites of ``Omega(1)`` are enumerated in *flow order*:
    skeleton sites first, then shell 1, shell 2, ...  so that the inside
    sites of ``V_k`` are exactly the first ``sizes[k]`` entries.  All
    vectors over ``V_M`` use this order.

    Attributes
    ----------
    sites : (N, 2) int array
        Sites of ``V_M`` in flow order.
    shell : (N,) int array
        Shell index, 0 for skeleton sites.
    tau, rho : (N,) float arrays
        Entry time and boundary speed (nan on the skeleton).
    sizes : (M + 1,) int array
        ``sizes[k] = |V_k|``; ``sizes[0]`` is the number of skeleton sites.
    masks : list
        ``masks[k]`` is the :class:`DomainMask` of ``V_k``; ``masks[0]`` is
        the skeleton mask or ``None`` when no site is within ``h/2`` of it.
    """

    grid: Grid
    spec: object
    time_grid: np.ndarray
    sites: np.ndarray
    shell: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    sizes: np.ndarray
    masks: list
    rho_field: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return len(self.time_grid) - 1

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_skeleton(self) -> int:
        return int(self.sizes[0])

    @property
    def dtau(self):
        return np.diff(self.time_grid)

    def shell_slice(self, k: int) -> slice:
        """Positions of shell ``k`` (``k = 0`` gives the skeleton)."""
        lo = 0 if k == 0 else int(self.sizes[k - 1])
        return slice(lo, int(self.sizes[k]))

    def index_of(self, t) -> int:
        """Index ``k`` with ``time_grid[k] == t`` (tolerance 1e-12)."""
        k = int(np.argmin(np.abs(self.time_grid - t)))
        if abs(self.time_grid[k] - t) > 1e-12:
            raise TNotOnGrid(f"t={t} is not on the time grid")
        return k

    def boundary_rho(self, k: int):
        """Boundary speed at the boundary sites of ``V_k``, at their cell centres."""
        b = self.masks[k].boundary
        return self.rho_field[b[:, 0], b[:, 1]]

    @cached_property
    def mask(self) -> DomainMask:
        return self.masks[self.M]

    @cached_property
    def skeleton_sites(self):
        return self.sites[: self.n_skeleton]

    def digest(self) -> str:
        tg = ",".join(repr(float(t)) for t in self.time_grid)
        return f"{self.grid.digest()}|{self.spec.digest()}|{tg}"


def build_flow(grid: Grid, spec, M: int, time_grid=None, allow_empty_shells=False) -> DomainFlow:
    """Evaluate ``tau`` and ``rho`` on the lattice and build shells and masks.

    Parameters
    ----------
    grid : Grid
        Must contain ``Omega(1)`` with at least one spare layer.
    spec : ConcentricDisk, StarShaped or Annular
    M : int
        Number of shells, at least 2.
    time_grid : array, optional
        ``0 = t_0 < ... < t_M = 1``; uniform by default.
    allow_empty_shells : bool
        Accept time grids finer than the lattice resolves.
    """
    if int(M) != M or M < 2:
        raise InvalidParameter(f"need at least 2 shells, got M={M}")
    M = int(M)
    if time_grid is None:
        time_grid = np.linspace(0.0, 1.0, M + 1)
    time_grid = np.asarray(time_grid, dtype=float)
    if (len(time_grid) != M + 1 or time_grid[0] != 0.0 or time_grid[-1] != 1.0
            or np.any(np.diff(time_grid) <= 0)):
        raise InvalidParameter("time grid must increase strictly from 0 to 1 with M+1 points")

    h = grid.h
    X, Y = grid.coordinates()
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    skeleton = (spec.skeleton_distance(pts) < h / 2).reshape(grid.shape)
    # entry times up to t = 2 so that rho is defined just outside Omega(1)
    tau_ext, theta, which = _tau_theta(spec, pts, 2.0)
    tau_ext = tau_ext.reshape(grid.shape)
    rho_field = _rho_from_tau(spec, tau_ext.ravel(), theta, which).reshape(grid.shape)
    tau_ext[skeleton] = np.nan
    rho_field[skeleton] = np.nan

    in_shell = ~np.isnan(tau_ext) & (tau_ext <= 1.0)
    shell_grid = np.zeros(grid.shape, dtype=np.int64)
    shell_grid[in_shell] = np.searchsorted(time_grid, tau_ext[in_shell], side="left")
    shell_grid[in_shell] = np.clip(shell_grid[in_shell], 1, M)
    members = in_shell | skeleton

    order_key = np.where(members, shell_grid, M + 1).ravel()
    flat = np.argsort(order_key, kind="stable")[: int(members.sum())]
    sites = np.stack(np.unravel_index(flat, grid.shape), axis=-1)
    shell = shell_grid[sites[:, 0], sites[:, 1]]
    counts = np.bincount(shell, minlength=M + 1)
    if not allow_empty_shells and (counts[1:] == 0).any():
        empty = np.nonzero(counts[1:] == 0)[0] + 1
        raise ResolutionTooCoarse(
            f"shells {empty.tolist()} contain no lattice site; refine the grid or use fewer shells"
        )
    sizes = np.cumsum(counts)

    try:
        masks = [None]
        if sizes[0] > 0:
            masks[0] = _prefix_mask(grid, sites, int(sizes[0]))
        for k in range(1, M + 1):
            masks.append(_prefix_mask(grid, sites, int(sizes[k])))
    except InvalidParameter as exc:
        raise InvalidParameter(f"grid does not resolve Omega(1): {exc}") from exc

    tau = tau_ext[sites[:, 0], sites[:, 1]]
    rho = rho_field[sites[:, 0], sites[:, 1]]
    for a in (time_grid, sites, shell, tau, rho, sizes, rho_field):
        a.setflags(write=False)
    return DomainFlow(grid, spec, time_grid, sites, shell, tau, rho, sizes, masks, rho_field)


def _prefix_mask(grid, sites, size):
    inside = np.zeros(grid.shape, dtype=bool)
    pre = sites[:size]
    inside[pre[:, 0], pre[:, 1]] = True
    return DomainMask(grid, inside, order=pre)


@dataclass(frozen=True)
class PolarIntegral:
    """Two quadratures of an area integral over ``Omega(t)``.

    ``area`` sums ``f h^2`` over the shells up to ``t``.  ``per_shell[k-1]``
    is ``dtau_k * sum_{a in dV_k} f(a) rho(a) ds(a)``, a quadrature of the
    foliation by fronts; ``shell_resolved`` is their sum.
    """

    area: float
    shell_resolved: float
    per_shell: np.ndarray


def polar_integrate(flow: DomainFlow, f, t) -> PolarIntegral:
    """Integrate ``f`` over ``Omega(t)`` in area form and front-by-front.

    ``f`` is either a callable ``f(X, Y)`` evaluated at cell centres or an
    ``(n, n)`` array of site values.
    """
    k_t = flow.index_of(t)
    if callable(f):
        X, Y = flow.grid.coordinates()
        values = np.asarray(np.broadcast_to(f(X, Y), X.shape), dtype=float)
    else:
        values = np.asarray(f, dtype=float)
        if values.shape != flow.grid.shape:
            raise InvalidParameter("site function must be an (n, n) array or a callable")
    h2 = flow.h ** 2
    lo = flow.n_skeleton
    hi = int(flow.sizes[k_t])
    s = flow.sites[lo:hi]
    area = float(np.sum(values[s[:, 0], s[:, 1]]) * h2)
    per_shell = np.zeros(k_t)
    dtau = flow.dtau
    for k in range(1, k_t + 1):
        b = flow.masks[k].boundary
        term = values[b[:, 0], b[:, 1]] * flow.boundary_rho(k) * flow.masks[k].ds
        per_shell[k - 1] = dtau[k - 1] * np.sum(term)
    return PolarIntegral(area, float(per_shell.sum()), per_shell)
