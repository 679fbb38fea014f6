"""Square lattice geometry and domain masks.

Sites are indexed by integer pairs ``(i, j)``; site ``(i, j)`` sits at
``origin + (i*h, j*h)``.  A :class:`DomainMask` marks the sites whose cell
centre lies inside a region, enumerates them, and lists the exterior
sites that touch them through the 5-point stencil.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDomain, GridMismatch, InvalidParameter

__all__ = [
    "Grid",
    "DomainMask",
    "build_grid",
    "mask_from_predicate",
    "is_nested",
    "NEIGHBOURS",
]

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))

# offsets used to estimate the inward normal at a boundary site
_NORMAL_WINDOW = tuple(
    (di, dj)
    for di in range(-2, 3)
    for dj in range(-2, 3)
    if 0 < di * di + dj * dj <= 4
)


@dataclass(frozen=True)
class Grid:
    """``n`` x ``n`` square lattice with spacing ``h``.

    ``origin`` is the centre of the lower-left cell.
    """

    n: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 3:
            raise InvalidParameter(f"grid needs n >= 3, got {self.n}")
        if not self.h > 0:
            raise InvalidParameter(f"grid spacing must be positive, got {self.h}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def point(self, site):
        """Coordinates of a site (or an ``(..., 2)`` array of sites)."""
        s = np.asarray(site, dtype=float)
        return np.asarray(self.origin) + self.h * s

    def site(self, point):
        """Nearest lattice site to a point (or array of points)."""
        p = (np.asarray(point, dtype=float) - np.asarray(self.origin)) / self.h
        s = np.rint(p).astype(int)
        if s.ndim == 1:
            return (int(s[0]), int(s[1]))
        return s

    def coordinates(self):
        """Return the ``(X, Y)`` arrays of all cell centres, indexed ``[i, j]``."""
        idx = np.arange(self.n)
        X = self.origin[0] + self.h * idx[:, None] + 0.0 * idx[None, :]
        Y = self.origin[1] + self.h * idx[None, :] + 0.0 * idx[:, None]
        return X, Y

    def digest(self) -> str:
        return f"n={self.n};h={self.h!r};origin={tuple(map(float, self.origin))!r}"


def build_grid(n: int, side: float, origin=(0.0, 0.0)) -> Grid:
    """Grid with ``n`` sites per side and spacing ``side / n``.

    Examples
    --------
    >>> build_grid(4, 2.0, (-1.0, -1.0)).h
    0.5
    """
    if int(n) != n or n < 3:
        raise InvalidParameter(f"n must be an integer >= 3, got {n}")
    if not side > 0:
        raise InvalidParameter(f"side must be positive, got {side}")
    return Grid(int(n), float(side) / int(n), (float(origin[0]), float(origin[1])))


class DomainMask:
    """Set of inside sites on a grid, with its stencil boundary.

    Parameters
    ----------
    grid : Grid
    inside : (n, n) bool array
        Must be nonempty and must not touch the outermost ring of the grid
        (every boundary site has to exist on the lattice).
    order : (K, 2) int array, optional
        Enumeration of the inside sites.  Defaults to row-major order.

    Attributes
    ----------
    sites : (K, 2) int array
        Inside sites; row ``p`` is the site with interior index ``p``.
    index : (n, n) int array
        Interior index of every site, ``-1`` where not inside.
    boundary : (B, 2) int array
        Outside sites with at least one inside 4-neighbour, row-major.
    boundary_index : (n, n) int array
    ds : (B,) float array
        Arclength owned by each boundary site.
    incidence : (K, B) sparse matrix
        ``incidence[p, a] = 1`` when interior site ``p`` neighbours ``a``.

    Notes
    -----
    The arclength weight of a boundary site ``a`` with ``e`` inside
    neighbours is ``h * e / (|n_x| + |n_y|)``, where ``n`` is a unit normal
    estimated from the inside sites within distance ``2h`` of ``a``.  On a
    staircase approximation of a curve each exterior edge crossing covers
    ``h / (|n_x| + |n_y|)`` of arclength, so the weights add up to the
    length of the underlying curve instead of overestimating it.
    """

    def __init__(self, grid: Grid, inside, order=None):
        inside = np.array(inside, dtype=bool)
        if inside.shape != grid.shape:
            raise InvalidParameter(f"inside has shape {inside.shape}, grid is {grid.shape}")
        if not inside.any():
            raise EmptyDomain("mask has no inside site")
        if inside[0].any() or inside[-1].any() or inside[:, 0].any() or inside[:, -1].any():
            raise InvalidParameter("domain touches the edge of the grid; enlarge the grid")
        self.grid = grid

        if order is None:
            sites = np.argwhere(inside)
        else:
            sites = np.asarray(order, dtype=int).reshape(-1, 2)
            if len(sites) != inside.sum() or not inside[sites[:, 0], sites[:, 1]].all():
                raise InvalidParameter("order must enumerate exactly the inside sites")
        index = np.full(grid.shape, -1, dtype=np.int64)
        index[sites[:, 0], sites[:, 1]] = np.arange(len(sites))
        if order is not None and (index[inside] < 0).any():
            raise InvalidParameter("order has repeated sites")

        touch = np.zeros(grid.shape, dtype=np.int64)
        for di, dj in NEIGHBOURS:
            touch += np.roll(inside, (di, dj), axis=(0, 1))
        is_boundary = (touch > 0) & ~inside
        boundary = np.argwhere(is_boundary)
        boundary_index = np.full(grid.shape, -1, dtype=np.int64)
        boundary_index[boundary[:, 0], boundary[:, 1]] = np.arange(len(boundary))

        # inward normal estimate, then arclength per boundary site
        padded = np.pad(inside, 2)
        bi, bj = boundary[:, 0] + 2, boundary[:, 1] + 2
        nx = np.zeros(len(boundary))
        ny = np.zeros(len(boundary))
        for di, dj in _NORMAL_WINDOW:
            w = padded[bi + di, bj + dj] / np.hypot(di, dj)
            nx += w * di
            ny += w * dj
        norm = np.hypot(nx, ny)
        safe = norm > 1e-12
        l1 = np.ones(len(boundary))
        l1[safe] = (np.abs(nx[safe]) + np.abs(ny[safe])) / norm[safe]
        edges = touch[boundary[:, 0], boundary[:, 1]].astype(float)
        self.ds = grid.h * edges / l1

        rows, cols = [], []
        for di, dj in NEIGHBOURS:
            nb = sites + (di, dj)
            b = boundary_index[nb[:, 0], nb[:, 1]]
            hit = b >= 0
            rows.append(np.nonzero(hit)[0])
            cols.append(b[hit])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        self.incidence = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(sites), len(boundary))
        )

        self.inside = inside
        self.sites = sites
        self.index = index
        self.boundary = boundary
        self.boundary_index = boundary_index
        self.boundary_edges = edges
        for a in (self.inside, self.sites, self.index, self.boundary,
                  self.boundary_index, self.ds, self.boundary_edges):
            a.setflags(write=False)

    @property
    def n_interior(self) -> int:
        return len(self.sites)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    def points(self):
        return self.grid.point(self.sites)

    def boundary_points(self):
        return self.grid.point(self.boundary)

    def contains(self, site) -> bool:
        i, j = site
        return bool(0 <= i < self.grid.n and 0 <= j < self.grid.n and self.inside[i, j])

    def site_index(self, site) -> int:
        i, j = site
        if not self.contains(site):
            return -1
        return int(self.index[i, j])

    def to_grid(self, values, fill=0.0):
        """Scatter an interior vector onto an ``(n, n)`` array."""
        out = np.full(self.grid.shape, fill, dtype=float)
        out[self.sites[:, 0], self.sites[:, 1]] = values
        return out

    def from_grid(self, field):
        """Gather an ``(n, n)`` array onto the interior enumeration."""
        return np.asarray(field)[self.sites[:, 0], self.sites[:, 1]]

    def __eq__(self, other):
        if not isinstance(other, DomainMask):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.inside, other.inside)
                and np.array_equal(self.sites, other.sites))

    __hash__ = None

    def __repr__(self):
        return f"DomainMask(n={self.grid.n}, interior={self.n_interior}, boundary={self.n_boundary})"


def mask_from_predicate(grid: Grid, inside_test: Callable) -> DomainMask:
    """Mask of the sites whose centre satisfies ``inside_test``.

    ``inside_test`` is called once with the coordinate arrays ``(X, Y)``
    and must return a boolean array of the same shape.  Sites on the
    outermost ring of the grid are always classified as outside so that
    every boundary site exists on the lattice.
    """
    X, Y = grid.coordinates()
    inside = np.array(np.broadcast_to(inside_test(X, Y), X.shape), dtype=bool)
    inside[0, :] = inside[-1, :] = False
    inside[:, 0] = inside[:, -1] = False
    return DomainMask(grid, inside)


def is_nested(a: DomainMask, b: DomainMask) -> bool:
    """True iff every inside site of ``a`` is inside ``b``."""
    if a.grid != b.grid:
        raise GridMismatch("masks live on different grids")
    return bool(np.all(b.inside[a.inside]))
