"""The Hadamard operator of a lattice domain flow.

``Q_t`` is stored block by block: block ``D_k`` has one column per site of
shell ``k`` and rows supported on ``V_k``, and

    Q_t f = sum_{k : t_k <= t} D_k (h^2 f|_{S_k}).

Two constructions are provided.

*kernel* mode
    Column ``zeta`` of ``D_k`` is ``hm_k(., b) / ds(b)``, the harmonic
    measure density of ``V_k`` at the boundary site ``b`` nearest
    ``zeta``.  This is the direct discretisation of the Poisson-kernel
    definition and satisfies the Gram identity only approximately.

*exact* mode
    Write ``V_k = U + S`` with ``U = V_{k-1}``, ``S = S_k`` and let
    ``Sigma = L_SS - L_SU L_UU^{-1} L_US`` (dimensionless stencil).  By the
    block inverse formula ``g_k - g_{k-1} = Y Sigma^{-1} Y^T`` with
    ``Y = [hm_{k-1}(., S); I]``, so ``D_k = Y Sigma^{-1/2} / h`` gives
    ``sum_k D_k h^2 D_k^T = g_M`` up to round-off.  The columns of ``Y``
    are discrete-harmonic in ``V_{k-1}``.  Skeleton sites have no entry
    time; in exact mode they are carried by the first block together with
    shell 1, which makes ``D_1 = g_1^{1/2} / h``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .dirichlet import DENSE_LIMIT, assemble, green_solver, stencil_residual
from .errors import IndefiniteIncrement, InvalidParameter, ResourceLimit, TOrder
from .harmonic import HarmonicMeasure, harmonic_measures

__all__ = [
    "HadamardOperator",
    "ExactBlock",
    "KernelBlock",
    "build_exact_mode",
    "build_kernel_mode",
    "apply_Q",
    "apply_Q_star",
    "dense_Q",
    "gram",
    "gram_defect",
    "increment",
    "increment_residual",
    "injectivity_margin",
    "IdentityReport",
    "discrete_hadamard_identity_check",
    "random_walk_identity",
]

EIGEN_FLOOR = 1e-12
INDEFINITE_TOL = 1e-9


class ExactBlock:
    """``D_k = Y Sigma^{-1/2} / h`` stored through its small factors."""

    def __init__(self, k, cols, rows, n_prev, exit_local, exit_hm, root, h):
        self.k = k
        self.cols = cols
        self.rows = rows
        self.n_prev = n_prev
        self.exit_local = exit_local
        self.exit_hm = exit_hm
        self.root = root
        self.h = h

    @property
    def n_cols(self) -> int:
        return self.cols.stop - self.cols.start

    @property
    def rank(self) -> int:
        return self.root.shape[1]

    def apply(self, c):
        """``D_k (h^2 c)``."""
        y = self.root @ c
        out = np.empty((self.rows,) + y.shape[1:])
        out[: self.n_prev] = self.exit_hm @ y[self.exit_local]
        out[self.n_prev:] = y
        return self.h * out

    def apply_adjoint(self, g):
        """``D_k^T (h^2 g)``."""
        g = np.asarray(g, dtype=float)
        y = np.array(g[self.n_prev: self.rows], dtype=float)
        y[self.exit_local] += self.exit_hm.T @ g[: self.n_prev]
        return self.h * (self.root.T @ y)

    def factor(self):
        """``F`` with ``D_k h^2 D_k^T = F F^T``."""
        F = np.empty((self.rows, self.root.shape[1]))
        F[: self.n_prev] = self.exit_hm @ self.root[self.exit_local]
        F[self.n_prev:] = self.root
        return F

    def dense(self):
        return self.factor() / self.h


class KernelBlock:
    """``D_k(z, zeta) = hm_k(z, b(zeta)) / ds(b(zeta))``."""

    def __init__(self, k, cols, rows, used, assign, hm_cols, ds, h):
        self.k = k
        self.cols = cols
        self.rows = rows
        self.used = used
        self.assign = assign
        self.hm_cols = hm_cols
        self.ds = ds
        self.h = h
        n = cols.stop - cols.start
        self._gather = sp.csr_matrix(
            (np.ones(n), (assign, np.arange(n))), shape=(len(used), n)
        )
        self.multiplicity = np.bincount(assign, minlength=len(used)).astype(float)

    @property
    def n_cols(self) -> int:
        return self.cols.stop - self.cols.start

    def apply(self, c):
        w = self._gather @ c
        scale = self.h ** 2 / self.ds
        w = scale[:, None] * w if w.ndim == 2 else scale * w
        return self.hm_cols @ w

    def apply_adjoint(self, g):
        v = self.hm_cols.T @ np.asarray(g, dtype=float)
        scale = self.h ** 2 / self.ds
        v = scale[:, None] * v if v.ndim == 2 else scale * v
        return v[self.assign]

    def factor(self):
        return self.hm_cols * (self.h * np.sqrt(self.multiplicity) / self.ds)

    def dense(self):
        return self.hm_cols[:, self.assign] / self.ds[self.assign]


@dataclass(eq=False)
class HadamardOperator:
    """Block representation of ``Q_t`` for all ``t`` on the flow's time grid."""

    flow: object
    mode: str
    blocks: list

    @property
    def h(self) -> float:
        return self.flow.h

    @property
    def size(self) -> int:
        return self.flow.n_sites

    def block(self, k: int):
        return self.blocks[k - 1]

    def column_mask(self, t):
        """Boolean vector of the column sites used by ``Q_t``."""
        k_t = self.flow.index_of(t)
        out = np.zeros(self.size, dtype=bool)
        for blk in self.blocks[:k_t]:
            out[blk.cols] = True
        return out

    def gram_defect_summary(self):
        """Relative Frobenius defect of ``Q_1 W Q_1^T`` against ``g_M``."""
        return gram_defect(self, 1.0, 1.0)


def _shell_columns(flow, k, mode):
    if mode == "exact" and k == 1:
        return slice(0, int(flow.sizes[1]))
    return flow.shell_slice(k)


def _exact_block(flow, k, L_full, solver_prev):
    cols = _shell_columns(flow, k, "exact")
    rows = int(flow.sizes[k])
    n_prev = cols.start
    L_SS = L_full[cols, cols].toarray()
    if n_prev == 0:
        sigma = L_SS
        exit_local = np.zeros(0, dtype=int)
        exit_hm = np.zeros((0, 0))
    else:
        adj = -L_full[:n_prev, cols]  # U x S adjacency, nonnegative
        adj = sp.csc_matrix(adj)
        exit_local = np.nonzero(np.diff(adj.indptr))[0]
        adj_e = adj[:, exit_local].toarray()
        exit_hm = solver_prev.solve_stencil(adj_e)
        sigma = L_SS
        sigma[:, exit_local] -= adj.T @ exit_hm
        sigma = 0.5 * (sigma + sigma.T)
    mu, vec = la.eigh(sigma)
    if mu[0] <= 0:
        if mu[0] < -INDEFINITE_TOL * mu[-1]:
            raise IndefiniteIncrement(
                f"shell {k}: Green increment has eigenvalue of ratio {mu[0] / mu[-1]:.3e}"
            )
    inv = np.where(mu > 0, 1.0 / np.where(mu > 0, mu, 1.0), 0.0)
    keep = inv >= EIGEN_FLOOR * inv.max()
    root = (vec[:, keep] * np.sqrt(inv[keep])) @ vec[:, keep].T
    exit_hm = np.ascontiguousarray(exit_hm)
    return ExactBlock(k, cols, rows, n_prev, exit_local, exit_hm, root, flow.h)


def build_exact_mode(flow, solvers=None, workers: int = 1) -> HadamardOperator:
    """Exact-mode operator: ``Q_t W Q_{t'}^T = g_{t ^ t'}`` up to round-off.

    ``solvers[k]``, if given, must be a :class:`~hadamard_gff.dirichlet.GreenSolver` for ``V_k``.
    """
    L_full = assemble(flow.mask).stencil

    def build(k):
        if k == 1:
            return _exact_block(flow, 1, L_full, None)
        solver = solvers[k - 1] if solvers is not None else green_solver(flow.masks[k - 1])
        return _exact_block(flow, k, L_full, solver)

    ks = range(1, flow.M + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(build, ks))
    else:
        blocks = [build(k) for k in ks]
    return HadamardOperator(flow, "exact", blocks)


def build_kernel_mode(flow, hms=None, workers: int = 1) -> HadamardOperator:
    """Kernel-mode operator built from harmonic measure densities.

    Skeleton sites carry no column in this mode.
    """
    hms = hms if hms is not None else harmonic_measures(flow, workers)
    grid = flow.grid

    def build(k):
        hm: HarmonicMeasure = hms[k]
        mask = hm.mask
        cols = flow.shell_slice(k)
        shell_pts = grid.point(flow.sites[cols])
        tree = cKDTree(mask.boundary_points())
        _, nearest = tree.query(shell_pts)
        used, assign = np.unique(nearest, return_inverse=True)
        hm_cols = np.ascontiguousarray(hm.columns(used))
        return KernelBlock(k, cols, int(flow.sizes[k]), used, assign.ravel(),
                           hm_cols, mask.ds[used].copy(), flow.h)

    ks = range(1, flow.M + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(build, ks))
    else:
        blocks = [build(k) for k in ks]
    return HadamardOperator(flow, "kernel", blocks)


def _as_vector(op, f, what):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != op.size:
        raise InvalidParameter(f"{what} must be a vector over V_M ({op.size} sites)")
    return f


def apply_Q(op: HadamardOperator, t, f):
    """``Q_t f`` for ``f`` over ``V_M`` (flow order); columns beyond ``t`` are ignored."""
    f = _as_vector(op, f, "f")
    k_t = op.flow.index_of(t)
    out = np.zeros(f.shape)
    for blk in op.blocks[:k_t]:
        out[: blk.rows] += blk.apply(f[blk.cols])
    return out


def apply_Q_star(op: HadamardOperator, t, g):
    """``Q_t^* g``: the weighted transpose, zero off the columns of ``Q_t``."""
    g = _as_vector(op, g, "g")
    k_t = op.flow.index_of(t)
    out = np.zeros(g.shape)
    for blk in op.blocks[:k_t]:
        out[blk.cols] = blk.apply_adjoint(g[: blk.rows])
    return out


def dense_Q(op: HadamardOperator, t):
    """Dense matrix of ``Q_t`` (rows and columns over ``V_M``), without the ``h^2`` weight."""
    N = op.size
    if N > DENSE_LIMIT:
        raise ResourceLimit("dense Q exceeds the dense limit")
    k_t = op.flow.index_of(t)
    Q = np.zeros((N, N))
    for blk in op.blocks[:k_t]:
        Q[: blk.rows, blk.cols] = blk.dense()
    return Q


def _reference_green(op, k):
    if k == 0:
        return None
    mask = op.flow.masks[k]
    return green_solver(mask)


def gram(op: HadamardOperator, t, t2):
    """Return ``(Q_t W Q_{t2}^T, defect)`` with the relative Frobenius
    defect against the zero-padded Green matrix of ``V_{t ^ t2}``."""
    N = op.size
    if N > DENSE_LIMIT:
        raise ResourceLimit("dense Gram matrix exceeds the dense limit")
    k1, k2 = op.flow.index_of(t), op.flow.index_of(t2)
    A = np.zeros((N, N))
    # blocks present in only one factor have disjoint columns and contribute 0
    for blk in op.blocks[: min(k1, k2)]:
        F = blk.factor()
        A[: blk.rows, : blk.rows] += F @ F.T
    k = min(k1, k2)
    G = np.zeros((N, N))
    if k > 0:
        n = int(op.flow.sizes[k])
        G[:n, :n] = _reference_green(op, k).dense_green()
    ref = np.linalg.norm(G)
    defect = np.linalg.norm(A - G) / ref if ref > 0 else float(np.linalg.norm(A))
    return A, float(defect)


def gram_defect(op: HadamardOperator, t, t2, chunk: int = 1024) -> float:
    """Relative Frobenius defect of the Gram identity, computed column
    chunk by column chunk so the full matrices are never stored."""
    k = min(op.flow.index_of(t), op.flow.index_of(t2))
    if k == 0:
        return 0.0
    n = int(op.flow.sizes[k])
    solver = _reference_green(op, k)
    factors = [blk.factor() for blk in op.blocks[:k]]
    num = 0.0
    den = 0.0
    for j0 in range(0, n, chunk):
        j1 = min(j0 + chunk, n)
        E = np.zeros((n, j1 - j0))
        E[np.arange(j0, j1), np.arange(j1 - j0)] = 1.0
        G = solver.solve_stencil(E)
        A = np.zeros((n, j1 - j0))
        for F in factors:
            r = F.shape[0]
            if r > j0:
                jj = min(j1, r)
                A[:r, : jj - j0] += F @ F[j0:jj].T
        num += float(np.sum((A - G) ** 2))
        den += float(np.sum(G ** 2))
    return float(np.sqrt(num / den))


def increment(op: HadamardOperator, t, t2, f):
    """``(Q_{t2} - Q_t) f`` for ``t <= t2``, summed over the shells in between."""
    f = _as_vector(op, f, "f")
    k1, k2 = op.flow.index_of(t), op.flow.index_of(t2)
    if k1 > k2:
        raise TOrder("increment needs t <= t2")
    out = np.zeros(f.shape)
    for blk in op.blocks[k1:k2]:
        out[: blk.rows] += blk.apply(f[blk.cols])
    return out


def increment_residual(flow, k: int, v, exclude_layer: bool = True) -> float:
    """Relative harmonicity residual of ``v`` inside ``V_k``.

    Returns ``max |4 v(z) - sum_{w~z} v(w)| / max |v|`` over inside sites
    of ``V_k``; with ``exclude_layer`` the sites adjacent to the exterior
    of ``V_k`` are skipped.
    """
    if k == 0:
        return 0.0
    mask = flow.masks[k]
    field = flow.mask.to_grid(v)
    sites = mask.sites
    if exclude_layer:
        deep = np.ones(len(sites), dtype=bool)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            deep &= mask.inside[sites[:, 0] + di, sites[:, 1] + dj]
        sites = sites[deep]
    if len(sites) == 0:
        return 0.0
    scale = np.max(np.abs(v))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(stencil_residual(mask, field, sites))) / scale)


def injectivity_margin(op: HadamardOperator, t) -> float:
    """Smallest singular value of ``h Q_t`` restricted to ``V_t`` rows and the
    columns used by ``Q_t``."""
    k = op.flow.index_of(t)
    n = int(op.flow.sizes[k])
    Q = np.zeros((n, n))
    for blk in op.blocks[:k]:
        Q[: blk.rows, blk.cols] = blk.dense()
    cols = op.column_mask(t)[:n]
    s = la.svdvals(op.h * Q[:, cols])
    return float(s.min()) if len(s) else 0.0


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of the lattice Hadamard identity check for one shell."""

    k: int
    defect: float
    exit_sites: int
    exit_sites_in_shell: int
    exit_sites_outside: list


def discrete_hadamard_identity_check(flow, k: int, solvers=None, hms=None) -> IdentityReport:
    """Check ``g_k(z,w) - g_{k-1}(z,w) = sum_a hm_{k-1}(z,a) g_k(a,w)``.

    ``z, w`` range over ``V_{k-1}`` and ``a`` over the boundary sites of
    ``V_{k-1}``; ``g_k(a, w) = 0`` for ``a`` outside ``V_k``.  Returns the
    maximal absolute defect.
    """
    if not 1 <= k <= flow.M:
        raise InvalidParameter(f"shell index {k} out of range")
    inner = flow.masks[k - 1]
    if inner is None:
        return IdentityReport(k, 0.0, 0, 0, [])
    n_prev = int(flow.sizes[k - 1])
    gk = (solvers[k] if solvers is not None else green_solver(flow.masks[k])).dense_green()
    gp = (solvers[k - 1] if solvers is not None else green_solver(inner)).dense_green()
    hm = hms[k - 1] if hms is not None else HarmonicMeasure(inner)
    H = hm.matrix
    b = inner.boundary
    in_next = flow.masks[k].index[b[:, 0], b[:, 1]]
    hit = in_next >= 0
    rhs = H[:, hit] @ gk[in_next[hit], :n_prev]
    lhs = gk[:n_prev, :n_prev] - gp
    defect = float(np.max(np.abs(lhs - rhs))) if n_prev else 0.0
    shell = flow.shell_slice(k)
    in_shell = hit & (in_next >= shell.start) & (in_next < shell.stop)
    outside = [tuple(map(int, s)) for s in b[hit & ~in_shell]]
    return IdentityReport(k, defect, len(b), int(in_shell.sum()), outside)


def random_walk_identity(outer, inner, z, w, walks: int, rng, batch: int = 250_000):
    """Monte Carlo version of the identity above on a small domain.

    Simple random walks start at ``z`` and run until they leave ``outer``.
    For each walk we record ``N_in``, the visits to ``w`` before leaving
    ``inner``, and ``N_out``, the visits to ``w`` before leaving ``outer``;
    ``E[N_out - N_in] / 4 = g_outer(z, w) - g_inner(z, w)``.  The first exit
    site of ``inner`` is recorded as well.

    Returns
    -------
    dict with per-walk arrays ``diff`` (``(N_out - N_in) / 4``) and
    ``exit`` (boundary index in ``inner`` of the first exit site).
    """
    z = np.asarray(z, dtype=int)
    w = tuple(int(x) for x in w)
    steps = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)])
    diffs = []
    exits = []
    remaining = walks
    while remaining > 0:
        m = min(batch, remaining)
        remaining -= m
        pos = np.tile(z, (m, 1))
        n_in = np.zeros(m)
        n_out = np.zeros(m)
        exit_idx = np.full(m, -1, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        in_inner = np.ones(m, dtype=bool)
        while alive.any():
            idx = np.nonzero(alive)[0]
            p = pos[idx]
            at_w = (p[:, 0] == w[0]) & (p[:, 1] == w[1])
            n_out[idx[at_w]] += 1
            n_in[idx[at_w & in_inner[idx]]] += 1
            p = p + steps[rng.integers(0, 4, size=len(idx))]
            pos[idx] = p
            leaving = in_inner[idx] & ~inner.inside[p[:, 0], p[:, 1]]
            exit_idx[idx[leaving]] = inner.boundary_index[p[leaving, 0], p[leaving, 1]]
            in_inner[idx[leaving]] = False
            alive[idx[~outer.inside[p[:, 0], p[:, 1]]]] = False
        diffs.append((n_out - n_in) / 4.0)
        exits.append(exit_idx)
    return {"diff": np.concatenate(diffs), "exit": np.concatenate(exits)}
