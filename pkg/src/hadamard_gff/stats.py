"""Streaming moment and co-moment estimators for Monte Carlo probes.

Batches are reduced with two-pass formulas and folded into the running
state with the pairwise update of Chan et al. extended to third and
fourth central moments (Pebay, 2008), so that accumulating in batches,
sample by sample or by merging partial accumulators gives the same
result up to floating-point reassociation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProbe, EmptyAccumulator, InvalidParameter

__all__ = ["CovAccumulator", "MomentReport", "independence_z"]


class CovAccumulator:
    """Running mean, central moments 2 to 4 and co-moments of ``p`` probes.

    Parameters
    ----------
    probes : int or sequence of str
        Number of probes, or their names.
    """

    def __init__(self, probes):
        if isinstance(probes, (int, np.integer)):
            names = [f"p{i}" for i in range(int(probes))]
        else:
            names = [str(p) for p in probes]
        if not names:
            raise InvalidParameter("an accumulator needs at least one probe")
        self.names = names
        p = len(names)
        self.count = 0
        self.mean = np.zeros(p)
        self.m2 = np.zeros(p)
        self.m3 = np.zeros(p)
        self.m4 = np.zeros(p)
        self.comoment = np.zeros((p, p))

    @property
    def n_probes(self) -> int:
        return len(self.names)

    @classmethod
    def _from_batch(cls, names, x):
        acc = cls(names)
        acc.count = x.shape[0]
        acc.mean = x.mean(axis=0)
        d = x - acc.mean
        d2 = d * d
        acc.m2 = d2.sum(axis=0)
        acc.m3 = (d2 * d).sum(axis=0)
        acc.m4 = (d2 * d2).sum(axis=0)
        acc.comoment = d.T @ d
        return acc

    def accumulate(self, samples):
        """Add samples; ``samples`` has shape ``(p,)`` or ``(m, p)``."""
        x = np.asarray(samples, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_probes:
            raise InvalidParameter(f"expected samples with {self.n_probes} probes, got shape {x.shape}")
        if x.shape[0] == 0:
            return self
        self._absorb(self._from_batch(self.names, x))
        return self

    def merge(self, other: "CovAccumulator") -> "CovAccumulator":
        """Return a new accumulator equal to accumulating both inputs."""
        if other.names != self.names:
            raise InvalidParameter("cannot merge accumulators with different probes")
        out = self.copy()
        out._absorb(other)
        return out

    def copy(self) -> "CovAccumulator":
        out = CovAccumulator(self.names)
        out.count = self.count
        out.mean = self.mean.copy()
        out.m2 = self.m2.copy()
        out.m3 = self.m3.copy()
        out.m4 = self.m4.copy()
        out.comoment = self.comoment.copy()
        return out

    def _absorb(self, b: "CovAccumulator"):
        if b.count == 0:
            return
        if self.count == 0:
            self.count = b.count
            self.mean, self.m2, self.m3, self.m4 = b.mean.copy(), b.m2.copy(), b.m3.copy(), b.m4.copy()
            self.comoment = b.comoment.copy()
            return
        na, nb = float(self.count), float(b.count)
        n = na + nb
        d = b.mean - self.mean
        d2 = d * d
        m2 = self.m2 + b.m2 + d2 * na * nb / n
        m3 = (self.m3 + b.m3 + d2 * d * na * nb * (na - nb) / n ** 2
              + 3.0 * d * (na * b.m2 - nb * self.m2) / n)
        m4 = (self.m4 + b.m4 + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / n ** 3
              + 6.0 * d2 * (na * na * b.m2 + nb * nb * self.m2) / n ** 2
              + 4.0 * d * (na * b.m3 - nb * self.m3) / n)
        self.comoment = self.comoment + b.comoment + np.outer(d, d) * na * nb / n
        self.mean = self.mean + d * nb / n
        self.m2, self.m3, self.m4 = m2, m3, m4
        self.count = self.count + b.count

    def report(self) -> "MomentReport":
        return MomentReport.from_accumulator(self)


@dataclass(frozen=True)
class MomentReport:
    """Moments of every probe with Gaussian-asymptotic standard errors.

    ``variance_se`` is ``sqrt(2 / (count - 1)) * variance``; ``cov_se`` is
    ``sqrt((var_i var_j + cov_ij^2) / count)``; skewness and excess
    kurtosis have standard errors ``sqrt(6 / count)`` and
    ``sqrt(24 / count)``.
    """

    names: list
    count: int
    mean: np.ndarray
    mean_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    skewness_se: float
    kurtosis_se: float
    covariance: np.ndarray
    cov_se: np.ndarray
    correlation: np.ndarray
    z: np.ndarray

    @classmethod
    def from_accumulator(cls, acc: CovAccumulator) -> "MomentReport":
        n = acc.count
        if n < 2:
            raise EmptyAccumulator(f"need at least 2 samples for a report, have {n}")
        var = acc.m2 / (n - 1)
        cov = acc.comoment / (n - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            skew = np.where(acc.m2 > 0, np.sqrt(n) * acc.m3 / acc.m2 ** 1.5, 0.0)
            kurt = np.where(acc.m2 > 0, n * acc.m4 / acc.m2 ** 2 - 3.0, 0.0)
            sd = np.sqrt(np.diag(cov))
            corr = cov / np.outer(sd, sd)
        corr = np.where(np.isfinite(corr), corr, np.nan)
        return cls(
            names=list(acc.names),
            count=n,
            mean=acc.mean.copy(),
            mean_se=np.sqrt(var / n),
            variance=var,
            variance_se=np.sqrt(2.0 / (n - 1)) * var,
            skewness=skew,
            excess_kurtosis=kurt,
            skewness_se=float(np.sqrt(6.0 / n)),
            kurtosis_se=float(np.sqrt(24.0 / n)),
            covariance=cov,
            cov_se=np.sqrt((np.outer(var, var) + cov ** 2) / n),
            correlation=corr,
            z=corr * np.sqrt(n),
        )


def independence_z(acc: CovAccumulator, i, j) -> float:
    """``r * sqrt(count)`` for the empirical correlation of probes ``i``, ``j``.

    Probes may be given by position or by name.
    """
    i = acc.names.index(i) if isinstance(i, str) else int(i)
    j = acc.names.index(j) if isinstance(j, str) else int(j)
    if acc.count < 2:
        raise EmptyAccumulator("need at least 2 samples")
    if acc.m2[i] <= 0 or acc.m2[j] <= 0:
        raise DegenerateProbe("a probe with zero variance has no correlation")
    r = acc.comoment[i, j] / np.sqrt(acc.m2[i] * acc.m2[j])
    return float(r * np.sqrt(acc.count))
