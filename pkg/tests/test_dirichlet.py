import threading

import numpy as np
import pytest

from hadamard_gff.dirichlet import (
    apply_inv_sqrt,
    apply_sqrt,
    assemble,
    dirichlet_inner,
    eigendecompose,
    green_kernel,
    green_solver,
    solve_poisson,
    stencil_residual,
)
from hadamard_gff.errors import EmptyDomain, IncompleteSpectrum, OutsideDomain
from hadamard_gff.grid import DomainMask, build_grid, mask_from_predicate


def single_site(h=1.0):
    g = build_grid(3, 3 * h)
    inside = np.zeros((3, 3), dtype=bool)
    inside[1, 1] = True
    return DomainMask(g, inside)


def strip():
    g = build_grid(4, 4.0)
    inside = np.zeros((4, 4), dtype=bool)
    inside[1:3, 1] = True
    return DomainMask(g, inside)


def blob(n=20, r=0.8):
    h = 2.0 / n
    g = build_grid(n, 2.0, (-1 + h / 2, -1 + h / 2))
    return mask_from_predicate(g, lambda X, Y: X ** 2 + 0.7 * Y ** 2 + 0.2 * X * Y < r ** 2)


def unit_disk(n):
    h = 2.2 / (n - 1)
    g = build_grid(n, n * h, (-1.1, -1.1))
    return mask_from_predicate(g, lambda X, Y: X ** 2 + Y ** 2 < 1.0)


def test_single_site_operator():
    m = single_site(h=0.5)
    L = assemble(m)
    assert np.allclose(L.matrix.toarray(), [[4 / 0.25]])


def test_strip_matrix():
    assert np.array_equal(assemble(strip()).matrix.toarray(), [[4, -1], [-1, 4]])


def test_empty_mask():
    with pytest.raises(EmptyDomain):
        assemble(None)


def test_poisson_trivial_cases():
    gs = green_solver(single_site())
    assert solve_poisson(gs, np.array([1.0]))[0] == pytest.approx(0.25)
    assert np.array_equal(solve_poisson(gs, np.zeros(1)), np.zeros(1))


def test_poisson_residual_and_positivity(rng):
    m = blob()
    gs = green_solver(m)
    f = rng.random(m.n_interior)
    u = solve_poisson(gs, f)
    L = assemble(m)
    assert np.max(np.abs(L.apply(u) - f)) <= 1e-10 * np.max(np.abs(f))
    assert np.all(u >= 0)


def test_green_symmetric_positive(rng):
    m = blob()
    gs = green_solver(m)
    G = gs.dense_green()
    assert np.allclose(G, G.T, atol=1e-14)
    assert np.all(G > 0)
    for _ in range(5):
        a, b = (tuple(m.sites[i]) for i in rng.integers(0, m.n_interior, 2))
        assert green_kernel(gs, a, b) == pytest.approx(green_kernel(gs, b, a), abs=1e-14)
    assert green_kernel(green_solver(single_site()), (1, 1), (1, 1)) == pytest.approx(0.25)
    with pytest.raises(OutsideDomain):
        green_kernel(gs, (0, 0), tuple(m.sites[0]))


def test_green_is_point_mass_response():
    m = blob()
    gs = green_solver(m)
    w = m.n_interior // 2
    f = np.zeros(m.n_interior)
    f[w] = 1.0 / m.grid.h ** 2
    assert np.allclose(solve_poisson(gs, f), gs.dense_green()[:, w], atol=1e-13)


def disk_green_at_half(n):
    m = unit_disk(n)
    gs = green_solver(m)
    return green_kernel(gs, m.grid.site((0.0, 0.0)), m.grid.site((0.5, 0.0)))


def test_green_matches_continuum_disk():
    expected = np.log(2.0) / (2 * np.pi)
    g128 = disk_green_at_half(129)
    g256 = disk_green_at_half(257)
    assert abs(g128 - expected) / expected < 0.05
    assert abs(g256 - expected) < abs(g128 - expected) + 1e-3


def test_small_spectra():
    assert np.allclose(eigendecompose(assemble(single_site())).eigenvalues, [4.0])
    assert np.allclose(eigendecompose(assemble(strip())).eigenvalues, [3.0, 5.0])


def test_spectral_invariants():
    m = blob()
    L = assemble(m)
    spec = eigendecompose(L)
    h2 = m.grid.h ** 2
    V = spec.eigenvectors
    assert np.allclose(V.T @ V * h2, np.eye(m.n_interior), atol=1e-10)
    assert np.allclose(L.apply(V), V * spec.eigenvalues, atol=1e-8 * spec.eigenvalues.max())
    assert np.all(spec.eigenvalues > 0)


def test_square_lowest_eigenvalue():
    n, side = 128, 1.0
    g = build_grid(n, side)
    inside = np.zeros((n, n), dtype=bool)
    inside[1:-1, 1:-1] = True
    m = DomainMask(g, inside)
    lam = eigendecompose(assemble(m), count=1).eigenvalues[0]
    s = (n - 1) * g.h  # distance between the two boundary rows
    assert lam == pytest.approx(2 * np.pi ** 2 / s ** 2, rel=0.02)


def test_operator_powers(rng):
    m = blob()
    spec = eigendecompose(assemble(m))
    f = rng.standard_normal(m.n_interior)
    g = rng.standard_normal(m.n_interior)
    back = apply_sqrt(spec, apply_inv_sqrt(spec, f))
    assert np.linalg.norm(back - f) / np.linalg.norm(f) < 1e-9
    twice = apply_inv_sqrt(spec, apply_inv_sqrt(spec, f))
    u = solve_poisson(green_solver(m), f)
    assert np.linalg.norm(twice - u) / np.linalg.norm(u) < 1e-9
    phi1 = spec.eigenvectors[:, 0]
    assert np.allclose(apply_inv_sqrt(spec, phi1), phi1 / np.sqrt(spec.eigenvalues[0]))
    lhs = np.sum(apply_sqrt(spec, f) * apply_sqrt(spec, g)) * m.grid.h ** 2
    assert lhs == pytest.approx(dirichlet_inner(m, f, g), rel=1e-9)


def test_partial_spectrum_refuses_powers():
    m = blob()
    spec = eigendecompose(assemble(m), count=4)
    assert not spec.complete
    with pytest.raises(IncompleteSpectrum):
        apply_sqrt(spec, np.ones(m.n_interior))


def test_dirichlet_inner(rng):
    m = single_site()
    assert dirichlet_inner(m, [1.0], [1.0]) == 4.0
    b = blob()
    L = assemble(b)
    f = rng.standard_normal(b.n_interior)
    g = rng.standard_normal(b.n_interior)
    assert dirichlet_inner(b, f, g) == pytest.approx(np.sum(L.apply(f) * g) * b.grid.h ** 2, rel=1e-12)
    assert dirichlet_inner(b, f, f) > 0
    # two sites far apart share no edge
    e1 = np.zeros(b.n_interior)
    e2 = np.zeros(b.n_interior)
    e1[0], e2[-1] = 1.0, 1.0
    assert dirichlet_inner(b, e1, e2) == 0.0


def test_stencil_residual_of_harmonic_function():
    m = blob()
    X, Y = m.grid.coordinates()
    field = X ** 2 - Y ** 2 + 3 * X  # discrete harmonic on a square lattice
    assert np.max(np.abs(stencil_residual(m, field))) < 1e-12


def test_concurrent_solves(rng):
    m = blob()
    gs = green_solver(m)
    rhs = rng.standard_normal((m.n_interior, 8))
    expected = gs.solve_stencil(rhs)
    out = [None] * 8

    def work(i):
        out[i] = gs.solve_stencil(rhs[:, i])

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert np.allclose(np.stack(out, axis=1), expected, atol=1e-14)
