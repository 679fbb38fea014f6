import numpy as np
import pytest

from hadamard_gff.errors import DegenerateProbe, EmptyAccumulator, InvalidParameter
from hadamard_gff.stats import CovAccumulator, independence_z


def rel_close(a, b, tol):
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b)))


def test_constant_probe():
    acc = CovAccumulator(["c"]).accumulate(np.full((50, 1), 3.5))
    rep = acc.report()
    assert rep.mean[0] == 3.5
    assert rep.variance[0] == 0.0


def test_merge_equals_sequential(rng):
    x = rng.standard_normal((1000, 3)) * [1.0, 2.0, 0.5] + [0.0, 5.0, -1.0]
    x[:, 2] += 0.3 * x[:, 0]
    whole = CovAccumulator(3).accumulate(x)
    a = CovAccumulator(3).accumulate(x[:377])
    b = CovAccumulator(3).accumulate(x[377:])
    merged = a.merge(b)
    assert merged.count == whole.count
    for name in ("mean", "m2", "m3", "m4", "comoment"):
        assert rel_close(getattr(merged, name), getattr(whole, name), 1e-10)
    # merge does not modify its inputs
    assert a.count == 377 and b.count == 623


def test_merge_tree_shape_and_single_samples(rng):
    x = rng.standard_normal((240, 2))
    ref = CovAccumulator(2).accumulate(x)
    one_by_one = CovAccumulator(2)
    for row in x:
        one_by_one.accumulate(row)
    parts = [CovAccumulator(2).accumulate(x[i:i + 30]) for i in range(0, 240, 30)]
    while len(parts) > 1:
        parts = [parts[i].merge(parts[i + 1]) for i in range(0, len(parts), 2)]
    for acc in (one_by_one, parts[0]):
        for name in ("mean", "m2", "m3", "m4", "comoment"):
            assert rel_close(getattr(acc, name), getattr(ref, name), 1e-10)


def test_matches_two_pass_formulas(rng):
    x = rng.standard_normal((5000, 4)) @ rng.standard_normal((4, 4)) + 100.0
    acc = CovAccumulator(4)
    for i in range(0, 5000, 701):
        acc.accumulate(x[i:i + 701])
    rep = acc.report()
    assert rel_close(rep.covariance, np.cov(x.T), 1e-9)
    assert rel_close(rep.mean, x.mean(axis=0), 1e-12)


def test_standard_normal_stream(rng):
    x = rng.standard_normal(10 ** 5)
    rep = CovAccumulator(1).accumulate(x[:, None]).report()
    assert abs(rep.mean[0]) <= 3 * rep.mean_se[0]
    assert abs(rep.variance[0] - 1) <= 3 * rep.variance_se[0]
    assert abs(rep.skewness[0]) <= 3 * rep.skewness_se
    assert abs(rep.excess_kurtosis[0]) <= 3 * rep.kurtosis_se


def test_report_needs_two_samples():
    acc = CovAccumulator(2)
    with pytest.raises(EmptyAccumulator):
        acc.report()
    acc.accumulate([1.0, 2.0])
    with pytest.raises(EmptyAccumulator):
        acc.report()


def test_probe_count_is_fixed():
    acc = CovAccumulator(["a", "b"])
    with pytest.raises(InvalidParameter):
        acc.accumulate(np.zeros((4, 3)))
    with pytest.raises(InvalidParameter):
        acc.merge(CovAccumulator(["a", "c"]))
    with pytest.raises(InvalidParameter):
        CovAccumulator([])


def test_perfect_correlations(rng):
    x = rng.standard_normal(200)
    acc = CovAccumulator(["x", "y", "z"]).accumulate(np.stack([x, x, -x], axis=1))
    rep = acc.report()
    assert rep.correlation[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert rep.correlation[0, 2] == pytest.approx(-1.0, abs=1e-12)
    assert independence_z(acc, "x", "z") == pytest.approx(-np.sqrt(200), rel=1e-12)


def test_degenerate_probe(rng):
    acc = CovAccumulator(2).accumulate(np.stack([rng.standard_normal(10), np.ones(10)], axis=1))
    with pytest.raises(DegenerateProbe):
        independence_z(acc, 0, 1)
    with pytest.raises(EmptyAccumulator):
        independence_z(CovAccumulator(2), 0, 1)


def test_independence_null_pass_rate():
    rng = np.random.default_rng(2024)
    passes = 0
    for _ in range(100):
        acc = CovAccumulator(2).accumulate(rng.standard_normal((2000, 2)))
        passes += abs(independence_z(acc, 0, 1)) <= 3
    assert passes >= 99
