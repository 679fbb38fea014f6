"""Discrete Dirichlet Laplacian, Green kernel and spectral calculus.

The operator is the 5-point stencil
``(L u)(z) = (4 u(z) - sum_{w ~ z, w inside} u(w)) / h^2`` with zero
values outside the mask.  Inner products on interior vectors carry the
area weight ``h^2``.  The Green kernel is normalised as
``g = L^{-1} / h^2`` so that ``sum_w g(z, w) f(w) h^2`` approximates
``int G(z, w) f(w) dA(w)``; with this choice ``g`` equals the inverse of
the dimensionless stencil matrix ``4 I - A`` and does not depend on ``h``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceFailure,
    EmptyDomain,
    IncompleteSpectrum,
    InvalidParameter,
    MaskMismatch,
    OutsideDomain,
    ResourceLimit,
    SolverFailure,
)
from .grid import NEIGHBOURS, DomainMask

__all__ = [
    "DENSE_LIMIT",
    "LaplaceOperator",
    "GreenSolver",
    "SpectralDecomp",
    "assemble",
    "green_solver",
    "solve_poisson",
    "green_kernel",
    "green_matrix",
    "eigendecompose",
    "apply_inv_sqrt",
    "apply_sqrt",
    "dirichlet_inner",
    "stencil_residual",
]

#: largest interior size for which dense Green / spectral matrices are built
DENSE_LIMIT = 20_000

_RESIDUAL_TOL = 1e-10


def _stencil_matrix(mask: DomainMask):
    """``4 I - A`` on the interior sites, CSC."""
    sites = mask.sites
    rows, cols = [], []
    for di, dj in NEIGHBOURS:
        nb = sites + (di, dj)
        q = mask.index[nb[:, 0], nb[:, 1]]
        hit = q >= 0
        rows.append(np.nonzero(hit)[0])
        cols.append(q[hit])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    K = mask.n_interior
    A = sp.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(K, K))
    return (4.0 * sp.identity(K, format="csc") - A).tocsc()


@dataclass(frozen=True, eq=False)
class LaplaceOperator:
    """``-Delta_h`` with zero Dirichlet data on ``mask``.

    ``stencil`` is the dimensionless matrix ``4 I - A``; the operator is
    ``stencil / h^2``.
    """

    mask: DomainMask
    stencil: sp.csc_matrix

    @property
    def h(self) -> float:
        return self.mask.grid.h

    @property
    def matrix(self):
        return self.stencil / self.h ** 2

    def apply(self, u):
        return (self.stencil @ u) / self.h ** 2


def assemble(mask: DomainMask) -> LaplaceOperator:
    """Assemble the 5-point Dirichlet Laplacian on ``mask``.

    Examples
    --------
    A single interior site with ``h = 1`` gives the 1x1 matrix ``[4]``.
    """
    if mask is None or mask.n_interior == 0:
        raise EmptyDomain("cannot assemble a Laplacian on an empty mask")
    return LaplaceOperator(mask, _stencil_matrix(mask))


class GreenSolver:
    """Sparse LU factorisation of the Laplacian, shared by repeated solves.

    Solves may be requested from several threads; they are serialised
    behind a lock because SuperLU handles are not documented as re-entrant.
    """

    def __init__(self, laplace: LaplaceOperator):
        self.laplace = laplace
        self.mask = laplace.mask
        try:
            self._lu = spla.splu(laplace.stencil, permc_spec="COLAMD")
        except RuntimeError as exc:  # singular factor
            raise SolverFailure(str(exc)) from exc
        self._lock = threading.Lock()
        self._dense = None

    @property
    def h(self) -> float:
        return self.laplace.h

    @property
    def size(self) -> int:
        return self.mask.n_interior

    def solve_stencil(self, rhs):
        """Return ``(4 I - A)^{-1} rhs``; ``rhs`` may have several columns."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size:
            raise MaskMismatch(f"vector of length {rhs.shape[0]} on a mask with {self.size} sites")
        if rhs.size == 0:
            return np.zeros_like(rhs)
        with self._lock:
            return self._lu.solve(np.ascontiguousarray(rhs))

    def dense_green(self):
        """Dense ``g`` matrix (cached)."""
        if self._dense is None:
            if self.size > DENSE_LIMIT:
                raise ResourceLimit(
                    f"dense Green matrix of {self.size} sites exceeds the limit of {DENSE_LIMIT}"
                )
            g = self.solve_stencil(np.eye(self.size))
            g = 0.5 * (g + g.T)
            g.setflags(write=False)
            self._dense = g
        return self._dense


def green_solver(mask: DomainMask) -> GreenSolver:
    return GreenSolver(assemble(mask))


def solve_poisson(gs: GreenSolver, f, tol: float = _RESIDUAL_TOL):
    """Solve ``L u = f`` on the interior; ``u`` vanishes outside the mask.

    The residual ``||L u - f||_inf <= tol ||f||_inf`` is verified, with up
    to two steps of iterative refinement if needed.
    """
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise InvalidParameter("right-hand side must be finite")
    h2 = gs.h ** 2
    A = gs.laplace.stencil
    u = gs.solve_stencil(f) * h2
    scale = np.max(np.abs(f)) if f.size else 0.0
    if scale == 0.0:
        return np.zeros_like(f)
    for _ in range(2):
        r = f - (A @ u) / h2
        if np.max(np.abs(r)) <= tol * scale:
            return u
        u = u + gs.solve_stencil(r) * h2
    raise SolverFailure("Poisson solve did not reach the residual tolerance")


def green_kernel(gs: GreenSolver, z, w) -> float:
    """``g(z, w)`` for interior sites ``z`` and ``w`` (given as ``(i, j)``)."""
    iz = gs.mask.site_index(z)
    iw = gs.mask.site_index(w)
    if iz < 0 or iw < 0:
        raise OutsideDomain("green_kernel needs two interior sites")
    if gs._dense is not None:
        return float(gs._dense[iz, iw])
    e = np.zeros(gs.size)
    e[iw] = 1.0
    return float(gs.solve_stencil(e)[iz])


def green_matrix(gs: GreenSolver):
    """Dense matrix of ``g`` over the interior enumeration."""
    return gs.dense_green()


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenpairs of ``L``, orthonormal for ``<u, v> = sum u v h^2``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    h: float
    size: int

    @property
    def complete(self) -> bool:
        return len(self.eigenvalues) == self.size

    def coefficients(self, f):
        return self.eigenvectors.T @ np.asarray(f, dtype=float) * self.h ** 2


def eigendecompose(laplace: LaplaceOperator, count=None) -> SpectralDecomp:
    """Lowest ``count`` eigenpairs (all of them when ``count`` is None)."""
    K = laplace.mask.n_interior
    h = laplace.h
    if count is not None and (int(count) != count or count < 1):
        raise InvalidParameter("count must be a positive integer")
    if count is None or count >= K:
        if count is not None and count > K:
            raise InvalidParameter(f"count={count} exceeds the {K} interior sites")
        if K > DENSE_LIMIT:
            raise ResourceLimit(f"full spectrum of {K} sites exceeds the dense limit")
        try:
            lam, vec = la.eigh(laplace.stencil.toarray())
        except la.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
    else:
        try:
            lam, vec = spla.eigsh(laplace.stencil, k=int(count), sigma=0.0, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(str(exc)) from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
    return SpectralDecomp(lam / h ** 2, vec / h, h, K)


def _require_complete(spec: SpectralDecomp):
    if not spec.complete:
        raise IncompleteSpectrum("operator powers need the full spectrum")


def apply_inv_sqrt(spec: SpectralDecomp, f):
    """``[-Delta]^{-1/2} f`` via the eigenfunction expansion."""
    _require_complete(spec)
    c = spec.coefficients(f)
    scale = spec.eigenvalues ** -0.5
    return spec.eigenvectors @ (scale[:, None] * c if c.ndim == 2 else scale * c)


def apply_sqrt(spec: SpectralDecomp, f):
    """``[-Delta]^{1/2} f`` via the eigenfunction expansion."""
    _require_complete(spec)
    c = spec.coefficients(f)
    scale = spec.eigenvalues ** 0.5
    return spec.eigenvectors @ (scale[:, None] * c if c.ndim == 2 else scale * c)


def dirichlet_inner(mask: DomainMask, f, g) -> float:
    """Discrete Dirichlet form ``sum over lattice edges of (df)(dg)``.

    Edges joining an inside site to the exterior count with the exterior
    value 0.  By summation by parts this equals ``sum (L f) g h^2``.
    """
    F = mask.to_grid(f)
    G = mask.to_grid(g)
    total = 0.0
    for axis in (0, 1):
        dF = np.diff(F, axis=axis)
        dG = np.diff(G, axis=axis)
        total += float(np.sum(dF * dG))
    return total


def stencil_residual(mask: DomainMask, field, sites=None):
    """``4 u(z) - sum_{w ~ z} u(w)`` at inside sites of ``mask``.

    ``field`` is an ``(n, n)`` array holding ``u`` everywhere (exterior
    values included).  Returns the residual at ``sites`` (default: all
    inside sites, in the mask's enumeration).
    """
    s = mask.sites if sites is None else np.asarray(sites).reshape(-1, 2)
    u = np.asarray(field)
    r = 4.0 * u[s[:, 0], s[:, 1]]
    for di, dj in NEIGHBOURS:
        r -= u[s[:, 0] + di, s[:, 1] + dj]
    return r
