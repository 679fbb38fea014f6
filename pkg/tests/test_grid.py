import numpy as np
import pytest

from hadamard_gff.errors import EmptyDomain, GridMismatch, InvalidParameter
from hadamard_gff.grid import NEIGHBOURS, DomainMask, Grid, build_grid, is_nested, mask_from_predicate


def unit_square_grid(n):
    h = 2.0 / n
    return build_grid(n, 2.0, (-1.0 + h / 2, -1.0 + h / 2))


def disk(r):
    return lambda X, Y: X ** 2 + Y ** 2 < r ** 2


def test_build_grid_spacing():
    assert build_grid(4, 2.0, (-1.0, -1.0)).h == 0.5
    assert build_grid(3, 3.0, (0.0, 0.0)).h == 1.0


@pytest.mark.parametrize("n, side", [(2, 1.0), (3, 0.0), (5, -1.0)])
def test_build_grid_rejects_bad_parameters(n, side):
    with pytest.raises(InvalidParameter):
        build_grid(n, side)


def test_site_point_round_trip():
    g = build_grid(17, 3.4, (-1.7, 0.3))
    sites = np.array([(i, j) for i in range(17) for j in range(17)])
    assert np.array_equal(g.site(g.point(sites)), sites)
    assert g.site(g.point((5, 11))) == (5, 11)


def test_disk_site_count():
    g = unit_square_grid(64)
    m = mask_from_predicate(g, disk(1.0))
    area = m.n_interior * g.h ** 2
    assert abs(area - np.pi) / np.pi < 0.03


def test_empty_predicate():
    g = unit_square_grid(16)
    with pytest.raises(EmptyDomain):
        mask_from_predicate(g, lambda X, Y: np.zeros_like(X, dtype=bool))


def test_single_cell_mask():
    g = build_grid(5, 5.0)
    m = mask_from_predicate(g, lambda X, Y: (X == 2.0) & (Y == 2.0))
    assert m.n_interior == 1
    assert m.n_boundary == 4
    assert np.allclose(m.ds, g.h)


def test_boundary_invariants():
    g = unit_square_grid(40)
    m = mask_from_predicate(g, disk(0.8))
    # each boundary site is outside with an inside neighbour
    for i, j in m.boundary:
        assert not m.inside[i, j]
        assert any(m.inside[i + di, j + dj] for di, dj in NEIGHBOURS)
    # each neighbour of an inside site is inside or on the boundary
    for i, j in m.sites:
        for di, dj in NEIGHBOURS:
            assert m.inside[i + di, j + dj] or m.boundary_index[i + di, j + dj] >= 0
    assert np.array_equal(np.sort(m.index[m.inside]), np.arange(m.n_interior))
    assert np.all(m.ds > 0)


def test_arclength_of_circle():
    g = unit_square_grid(128)
    m = mask_from_predicate(g, disk(0.8))
    assert abs(m.ds.sum() - 2 * np.pi * 0.8) / (2 * np.pi * 0.8) < 0.03


def test_incidence_counts_edges():
    g = unit_square_grid(24)
    m = mask_from_predicate(g, disk(0.7))
    assert np.array_equal(np.asarray(m.incidence.sum(axis=0)).ravel(), m.boundary_edges)


def test_nesting():
    g = unit_square_grid(32)
    small = mask_from_predicate(g, disk(0.4))
    big = mask_from_predicate(g, disk(0.8))
    assert is_nested(small, big)
    assert is_nested(big, big)
    assert not is_nested(big, small)
    other = mask_from_predicate(unit_square_grid(30), disk(0.4))
    with pytest.raises(GridMismatch):
        is_nested(small, other)


def test_mask_is_deterministic():
    g = unit_square_grid(32)
    a = mask_from_predicate(g, disk(0.6))
    b = mask_from_predicate(g, disk(0.6))
    assert a == b
    assert np.array_equal(a.ds, b.ds)


def test_mask_touching_edge_rejected():
    g = Grid(6, 1.0)
    inside = np.zeros((6, 6), dtype=bool)
    inside[0, 3] = True
    with pytest.raises(InvalidParameter):
        DomainMask(g, inside)


def test_grid_scatter_gather():
    g = unit_square_grid(20)
    m = mask_from_predicate(g, disk(0.5))
    v = np.arange(m.n_interior, dtype=float)
    assert np.array_equal(m.from_grid(m.to_grid(v)), v)
