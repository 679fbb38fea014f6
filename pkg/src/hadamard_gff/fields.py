"""White noise, the free field as ``Q_t`` applied to white noise, and
boundary processes built from it.

Noise convention
----------------
White noise on ``V_M`` has cell values ``Phi(z) = xi_z / h`` with
i.i.d. standard normal ``xi``, so that ``<f, Phi> = sum f Phi h^2`` has
variance ``sum f^2 h^2``.  Then ``Psi_t = Q_t Phi`` has covariance
``Q_t W Q_t^T`` with ``W = h^2``, which is the Green matrix of ``V_t`` in
exact mode.

Random streams
--------------
Sample ``i`` of an ensemble with master seed ``s`` draws from a Philox
generator seeded by ``SeedSequence([s, i])``.  A sample therefore depends
only on ``(s, i)``, never on batching or thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dirichlet import SpectralDecomp, _require_complete
from .errors import InvalidParameter, MaskMismatch, OutsideDomain, SupportNotOnSkeleton
from .flow import DomainFlow
from .grid import DomainMask
from .hadamard import apply_Q, apply_Q_star
from .harmonic import (
    BoundaryFunction,
    HarmonicMeasure,
    _check_skeleton_support,
    harmonic_measures,
    kappa,
    poisson_extend,
)
from .stats import CovAccumulator, independence_z

__all__ = [
    "RngSpec",
    "FieldSample",
    "Trajectory",
    "standard_normals",
    "sample_white_noise",
    "gff_via_hadamard",
    "gff_via_spectral",
    "trajectory",
    "sample_boundary_noise",
    "extend_boundary_noise",
    "boundary_probe",
    "boundary_average",
    "boundary_average_cov",
    "pairing_variance",
    "increment_covariance",
    "boundary_noise_rate",
    "sample_pairings",
    "sample_spectral_pairings",
    "TimeChangeReport",
    "time_change_check",
    "point_mass",
    "skeleton_point_mass",
    "gaussian_bump",
    "indicator_of_disk",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSpec:
    """Master seed and stream index of one random draw."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if int(self.seed) != self.seed or int(self.stream) != self.stream or self.stream < 0:
            raise InvalidParameter("seed and stream must be integers, stream >= 0")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed) & _MASK64, int(self.stream)])
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, size) -> np.ndarray:
        return self.generator().standard_normal(size)


def standard_normals(seed: int, streams, size: int) -> np.ndarray:
    """Row ``r`` holds ``size`` standard normals from stream ``streams[r]``."""
    streams = np.atleast_1d(np.asarray(streams, dtype=np.int64))
    out = np.empty((len(streams), size))
    for r, s in enumerate(streams):
        out[r] = RngSpec(seed, int(s)).normals(size)
    return out


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realisation of a random field.

    ``values`` is indexed like the interior of ``domain`` (flow order for
    a :class:`DomainFlow`) or, for boundary noise, like the boundary
    sites of ``domain``.
    """

    kind: str
    values: np.ndarray
    domain: object
    rng: RngSpec | None = None
    t: float | None = None
    mode: str | None = None

    def __post_init__(self):
        if self.kind not in ("white_noise", "gff", "boundary_noise"):
            raise InvalidParameter(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("field values must be finite")

    def pairing(self, f) -> float:
        """``<f, field> = sum f * values * h^2`` (interior fields only)."""
        return float(np.sum(np.asarray(f) * self.values) * _h(self.domain) ** 2)


def _h(domain):
    return domain.h if isinstance(domain, DomainFlow) else domain.grid.h


def _interior_size(domain):
    if isinstance(domain, DomainFlow):
        return domain.n_sites
    if isinstance(domain, DomainMask):
        return domain.n_interior
    raise InvalidParameter("domain must be a DomainFlow or a DomainMask")


def sample_white_noise(domain, rng: RngSpec) -> FieldSample:
    """Cell values ``xi / h`` on every interior site of ``domain``."""
    n = _interior_size(domain)
    return FieldSample("white_noise", rng.normals(n) / _h(domain), domain, rng)


def _noise_values(op, phi):
    if isinstance(phi, FieldSample):
        if phi.kind != "white_noise":
            raise InvalidParameter("expected a white-noise sample")
        values, rng = phi.values, phi.rng
    else:
        values, rng = np.asarray(phi, dtype=float), None
    if values.shape[0] != op.size:
        raise MaskMismatch("white noise must live on V_M of the operator's flow")
    return values, rng


def gff_via_hadamard(op, phi, t) -> FieldSample:
    """``Psi_t = Q_t Phi``."""
    values, rng = _noise_values(op, phi)
    return FieldSample("gff", apply_Q(op, t, values), op.flow, rng, float(t), op.mode)


def gff_via_spectral(spec: SpectralDecomp, rng: RngSpec, domain=None) -> FieldSample:
    """``Psi = sum_i lambda_i^{-1/2} xi_i phi_i`` from the full spectrum."""
    _require_complete(spec)
    xi = rng.normals(len(spec.eigenvalues))
    values = spec.eigenvectors @ (xi / np.sqrt(spec.eigenvalues))
    return FieldSample("gff", values, domain, rng, None, "spectral")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """``Psi_{t_0} = 0, Psi_{t_1}, ..., Psi_{t_M}`` from one white-noise draw."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)
    rng: RngSpec | None = None

    def at(self, k: int):
        return self.values[k]

    @property
    def increments(self):
        return np.diff(self.values, axis=0)


def trajectory(op, phi) -> Trajectory:
    """Accumulate ``Psi_{t_k}`` block by block from one noise draw."""
    values, rng = _noise_values(op, phi)
    M = op.flow.M
    out = np.zeros((M + 1, op.size))
    for k, blk in enumerate(op.blocks, start=1):
        out[k] = out[k - 1]
        out[k, : blk.rows] += blk.apply(values[blk.cols])
    return Trajectory(op.flow.time_grid, out, rng)


def sample_boundary_noise(flow: DomainFlow, t, rng: RngSpec) -> FieldSample:
    """``Xi_t(a) = xi_a sqrt(rho(a) / ds(a))`` on the boundary sites of ``V_t``.

    With this scaling ``sum_a phi(a) Xi_t(a) ds(a)`` has variance
    ``sum_a phi(a)^2 rho(a) ds(a)``.
    """
    k = flow.index_of(t)
    if k == 0:
        raise InvalidParameter("boundary noise needs t > 0")
    mask = flow.masks[k]
    xi = rng.normals(mask.n_boundary)
    values = xi * np.sqrt(flow.boundary_rho(k) / mask.ds)
    return FieldSample("boundary_noise", values, mask, rng, float(t))


def extend_boundary_noise(hm: HarmonicMeasure, xi) -> np.ndarray:
    """Harmonic extension of a boundary-noise sample into the interior."""
    values = xi.values if isinstance(xi, FieldSample) else xi
    return poisson_extend(hm, BoundaryFunction(hm.mask, values))


def boundary_probe(flow: DomainFlow, f, t, hms=None) -> np.ndarray:
    """Vector ``p`` over ``V_M`` with ``<p, Psi_1> = sum_a Psi_1(a) (P_t^* f)(a) ds(a)``.

    The sum runs over the boundary sites ``a`` of ``V_t``; those outside
    ``V_M`` carry ``Psi_1 = 0`` and are dropped.
    """
    f = np.asarray(f, dtype=float)
    k = flow.index_of(t)
    p = np.zeros(flow.n_sites)
    if k == 0:
        raise InvalidParameter("the boundary pairing needs t > 0")
    hm = hms[k] if hms is not None else HarmonicMeasure(flow.masks[k])
    mass = hm.sweep_mass(f[: flow.sizes[k]])
    b = hm.mask.boundary
    pos = flow.mask.index[b[:, 0], b[:, 1]]
    hit = pos >= 0
    p[pos[hit]] = mass[hit] / flow.h ** 2
    return p


def boundary_average(op, phi, t, f, hms=None):
    """Two evaluations of the boundary average ``X_t(f)``.

    Returns ``(boundary_route, noise_route)``: the pairing of the
    boundary trace of ``Psi_1`` with the harmonic sweep of ``f`` onto
    the boundary of ``V_t``, and ``<(Q_1^* - Q_t^*) f, Phi>``.
    """
    f = _check_skeleton_support(op.flow, f)
    values, _ = _noise_values(op, phi)
    h2 = op.h ** 2
    psi1 = apply_Q(op, 1.0, values)
    route_i = float(np.sum(boundary_probe(op.flow, f, t, hms) * psi1) * h2)
    q = apply_Q_star(op, 1.0, f) - apply_Q_star(op, t, f)
    route_ii = float(np.sum(q * values) * h2)
    return route_i, route_ii


def boundary_average_cov(flow: DomainFlow, f, g, t, t2, hms=None) -> float:
    """Quadrature of the covariance of ``X_t(f)`` and ``X_{t2}(g)``.

    ``sum_{k : t_k > max(t, t2)} dtau_k sum_a (P_k^* f)(a) (P_k^* g)(a) rho(a) ds(a)``.
    """
    f = _check_skeleton_support(flow, f)
    g = _check_skeleton_support(flow, g)
    k0 = max(flow.index_of(t), flow.index_of(t2))
    total = 0.0
    for k in range(k0 + 1, flow.M + 1):
        total += flow.dtau[k - 1] * boundary_noise_rate(flow, k, f, g, hms)
    return float(total)


def boundary_noise_rate(flow: DomainFlow, k: int, f, g, hms=None) -> float:
    """``sum_a (P_k^* f)(a) (P_k^* g)(a) rho(a) ds(a)`` on the boundary of ``V_k``."""
    hm = hms[k] if hms is not None else HarmonicMeasure(flow.masks[k])
    n = int(flow.sizes[k])
    ds = hm.mask.ds
    sf = hm.sweep_mass(np.asarray(f, dtype=float)[:n]) / ds
    sg = sf if g is f else hm.sweep_mass(np.asarray(g, dtype=float)[:n]) / ds
    return float(np.sum(sf * sg * flow.boundary_rho(k) * ds))


def pairing_variance(op, f, t) -> float:
    """``Var <f, Psi_t> = h^4 f^T (Q_t W Q_t^T) f``, from the block factors."""
    k = op.flow.index_of(t)
    h4 = op.h ** 4
    total = 0.0
    for blk in op.blocks[:k]:
        c = blk.factor().T @ np.asarray(f, dtype=float)[: blk.rows]
        total += float(c @ c)
    return total * h4


def increment_covariance(op, k: int, f, g) -> float:
    """``Cov(<f, Psi_{t_k} - Psi_{t_{k-1}}>, <g, same>)``."""
    blk = op.block(k)
    F = blk.factor()
    a = F.T @ np.asarray(f, dtype=float)[: blk.rows]
    b = F.T @ np.asarray(g, dtype=float)[: blk.rows]
    return float(a @ b) * op.h ** 4


def sample_pairings(op, probes, seed: int, n_samples: int, start: int = 0,
                    times=None, batch: int = 1024, workers: int = 1) -> np.ndarray:
    """Monte Carlo draws of ``<f_j, Psi_t>`` for several probes and times.

    Uses ``<f, Q_t Phi> = <Q_t^* f, Phi>``: each probe is pulled back once
    and paired with the white noise shell by shell.

    Parameters
    ----------
    probes : (P, N) array
        Test functions over ``V_M`` in flow order.
    seed : int
        Master seed; sample ``i`` uses stream ``start + i``.
    times : sequence, optional
        Times on the grid (default: all of ``t_0, ..., t_M``).

    Returns
    -------
    (n_samples, len(times), P) array

    Notes
    -----
    For a fixed ``batch`` the result is bit-identical for any ``workers``;
    changing ``batch`` can move the last bit through BLAS blocking.
    """
    flow = op.flow
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != op.size:
        raise MaskMismatch("probes must be vectors over V_M")
    times = flow.time_grid if times is None else np.asarray(times, dtype=float)
    ks = np.array([flow.index_of(t) for t in times])
    pulled = np.stack([apply_Q_star(op, 1.0, p) for p in probes], axis=1)  # N x P
    bounds = [blk.cols for blk in op.blocks]
    h = op.h

    def run(lo, hi):
        xi = standard_normals(seed, np.arange(start + lo, start + hi), op.size)
        # <q, Phi> h^2 = <q, xi> h per block
        parts = np.zeros((hi - lo, len(bounds) + 1, probes.shape[0]))
        for j, sl in enumerate(bounds, start=1):
            parts[:, j] = xi[:, sl] @ pulled[sl] * h
        return np.cumsum(parts, axis=1)[:, ks]

    chunks = [(lo, min(lo + batch, n_samples)) for lo in range(0, n_samples, batch)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            pieces = list(pool.map(lambda c: run(*c), chunks))
    else:
        pieces = [run(*c) for c in chunks]
    if not pieces:
        return np.zeros((0, len(ks), probes.shape[0]))
    return np.concatenate(pieces, axis=0)


def sample_spectral_pairings(spec: SpectralDecomp, probes, seed: int, n_samples: int,
                             start: int = 0, batch: int = 1024) -> np.ndarray:
    """Draws of ``<f_j, Psi>`` for the spectral sampler, shape ``(n, P)``.

    ``probes`` are vectors over the interior the spectrum was computed on.
    """
    _require_complete(spec)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    # <f, sum c_i xi_i phi_i> = sum_i xi_i c_i <f, phi_i>
    weights = (spec.eigenvectors.T @ probes.T) * spec.h ** 2 / np.sqrt(spec.eigenvalues)[:, None]
    out = []
    for lo in range(0, n_samples, batch):
        hi = min(lo + batch, n_samples)
        xi = standard_normals(seed, np.arange(start + lo, start + hi), len(spec.eigenvalues))
        out.append(xi @ weights)
    return np.concatenate(out, axis=0) if out else np.zeros((0, probes.shape[0]))


@dataclass(frozen=True)
class TimeChangeReport:
    """Empirical variance of ``<f, Psi_t>`` against the variance clock.

    ``kappa_integral[k]`` is ``sum_{j <= k} kappa(t_j) dtau_j`` and
    ``exact_variance[k]`` the Gram-contract value.  ``increment_z[k-1]``
    is the correlation z-score of the increments over shells ``k`` and
    ``k+1``.
    """

    times: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    exact_variance: np.ndarray
    kappa: np.ndarray
    kappa_integral: np.ndarray
    ratio: np.ndarray
    increment_z: np.ndarray


def time_change_check(op, f, samples: int, seed: int, hms=None, workers: int = 1) -> TimeChangeReport:
    """Compare ``Var <f, Psi_{t_k}>`` with the integrated variance rate."""
    flow = op.flow
    f = np.asarray(f, dtype=float)
    hms = hms if hms is not None else harmonic_measures(flow, workers)
    draws = sample_pairings(op, f[None, :], seed, samples, workers=workers)[:, :, 0]
    acc = CovAccumulator(flow.M + 1)
    acc.accumulate(draws)
    rep = acc.report()
    incs = np.diff(draws, axis=1)
    inc_acc = CovAccumulator(flow.M)
    inc_acc.accumulate(incs)
    z = np.array([independence_z(inc_acc, k, k + 1) for k in range(flow.M - 1)])
    kap = kappa(flow, f, hms)
    integral = np.concatenate([[0.0], np.cumsum(kap * flow.dtau)])
    exact = np.array([pairing_variance(op, f, t) for t in flow.time_grid])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(integral > 0, rep.variance / integral, np.nan)
    return TimeChangeReport(flow.time_grid.copy(), rep.variance, rep.variance_se, exact,
                            kap, integral, ratio, z)


def point_mass(flow: DomainFlow, point) -> np.ndarray:
    """Unit point mass: ``1 / h^2`` at the site of ``V_M`` nearest ``point``."""
    site = flow.grid.site(point)
    pos = flow.mask.site_index(site)
    if pos < 0:
        raise OutsideDomain(f"no site of V_M at {point}")
    out = np.zeros(flow.n_sites)
    out[pos] = 1.0 / flow.h ** 2
    return out


def skeleton_point_mass(flow: DomainFlow, point=None) -> np.ndarray:
    """Unit point mass at the skeleton site nearest ``point`` (default: the centre)."""
    if flow.n_skeleton == 0:
        raise SupportNotOnSkeleton("the skeleton contains no lattice site")
    point = flow.spec.center if point is None else point
    pts = flow.grid.point(flow.skeleton_sites)
    j = int(np.argmin(np.hypot(*(pts - np.asarray(point, dtype=float)).T)))
    if np.hypot(*(pts[j] - np.asarray(point, dtype=float))) > flow.h:
        raise SupportNotOnSkeleton(f"{point} is not within one spacing of a skeleton site")
    out = np.zeros(flow.n_sites)
    out[j] = 1.0 / flow.h ** 2
    return out


def gaussian_bump(flow: DomainFlow, center, width: float) -> np.ndarray:
    """``exp(-|z - center|^2 / (2 width^2))`` on the sites of ``V_M``."""
    if not width > 0:
        raise InvalidParameter("width must be positive")
    d = flow.grid.point(flow.sites) - np.asarray(center, dtype=float)
    return np.exp(-np.sum(d * d, axis=1) / (2.0 * width ** 2))


def indicator_of_disk(flow: DomainFlow, center, radius: float) -> np.ndarray:
    """Indicator of the sites of ``V_M`` within ``radius`` of ``center``."""
    d = flow.grid.point(flow.sites) - np.asarray(center, dtype=float)
    return (np.hypot(d[:, 0], d[:, 1]) <= radius).astype(float)
