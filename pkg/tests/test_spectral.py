import itertools

import numpy as np
import pytest

from consensus_filter_design import spectral
from consensus_filter_design.errors import SpectralError
from consensus_filter_design.graphgen import ErdosRenyiParams, Graph
from consensus_filter_design.spectral import MatrixKind, SpectralDensity, Spectrum


def test_symmetric_eigenvalues_match_numpy(rng):
    m = rng.standard_normal((40, 40))
    m = m + m.T
    s = spectral.symmetric_eigenvalues(m)
    np.testing.assert_allclose(s.values, np.linalg.eigvalsh(m), atol=1e-10)
    assert np.all(np.diff(s.values) >= 0)


def _characteristic_polynomial(a):
    """Faddeev-LeVerrier coefficients of det(lambda I - a), highest degree first."""
    n = len(a)
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1]*np.eye(n)
        coeffs.append(-np.trace(a @ m)/k)
    return np.array(coeffs)


def _all_graphs(n):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(2**len(pairs)):
        yield Graph(n, [pair for k, pair in enumerate(pairs) if mask >> k & 1])


@pytest.mark.parametrize('n', [1, 2, 3, 4])
def test_small_graph_eigenvalues_are_characteristic_roots(n):
    for g in _all_graphs(n):
        adjacency = g.dense_adjacency()
        for matrix in (adjacency, np.diag(g.degrees) - adjacency):
            values = spectral.symmetric_eigenvalues(matrix).values
            coeffs = _characteristic_polynomial(matrix)
            np.testing.assert_allclose(np.poly(values), coeffs, atol=1e-9)
            roots = np.sort(np.roots(coeffs).real) if n > 1 else -coeffs[1:]
            np.testing.assert_allclose(values, roots, atol=1e-4)


def test_symmetric_eigenvalues_rejects_bad_input():
    with pytest.raises(SpectralError, match='not symmetric'):
        spectral.symmetric_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(SpectralError, match='square'):
        spectral.symmetric_eigenvalues(np.zeros((2, 3)))


def test_small_graph_spectra(k3, path3):
    np.testing.assert_allclose(spectral.laplacian_spectrum(k3).values, [0, 3, 3], atol=1e-12)
    np.testing.assert_allclose(spectral.laplacian_spectrum(path3).values, [0, 1, 3], atol=1e-12)
    np.testing.assert_allclose(spectral.row_normalized_laplacian_spectrum(path3).values,
                               [0, 1, 2], atol=1e-12)
    np.testing.assert_allclose(spectral.adjacency_spectrum(k3).values, [-1, -1, 2], atol=1e-12)


def test_row_normalized_spectrum_in_unit_range(er50):
    s = spectral.base_spectrum(er50, MatrixKind.row_normalized_laplacian)
    assert abs(s.values[0]) < 1e-10
    assert s.values[-1] <= 2.0 + 1e-10


def test_row_normalized_needs_degrees():
    with pytest.raises(SpectralError, match='zero degree'):
        spectral.row_normalized_laplacian_spectrum(Graph(3, [(0, 1)]))


def test_empirical_distribution():
    s = Spectrum([0.0, 1.0, 1.0, 3.0], MatrixKind.laplacian)
    assert spectral.empirical_distribution_at(s, -0.5) == 0.0
    assert spectral.empirical_distribution_at(s, 1.0) == 0.75
    assert spectral.empirical_distribution_at(s, 10.0) == 1.0


def test_silverman_bandwidth_degenerate():
    assert spectral.silverman_bandwidth([2.0]) == 0.0
    assert spectral.silverman_bandwidth([1.0, 1.0, 1.0]) == 0.0


def test_kernel_density_floor(caplog):
    s = Spectrum([0.5, 0.5, 0.5], MatrixKind.weight)
    with caplog.at_level('WARNING', logger='CFD.design'):
        f = spectral.kernel_density(s, np.linspace(0, 1, 5001))
    assert f.bandwidth == spectral.BANDWIDTH_FLOOR
    assert 'floor' in caplog.text
    assert f.mass == pytest.approx(1.0, abs=1e-3)


def test_kernel_density_unit_mass(er50):
    s = spectral.laplacian_spectrum(er50)
    h = spectral.silverman_bandwidth(s.values)
    grid = spectral.density_grid(s.values[0], s.values[-1], h, 2048)
    f = spectral.kernel_density(s, grid)
    assert f.mass == pytest.approx(1.0, abs=1e-3)
    assert f.provenance == spectral.Provenance.single


def test_monte_carlo_density():
    params = ErdosRenyiParams(60, 0.2)
    f = spectral.monte_carlo_density(params, MatrixKind.laplacian, 3, 512, seed=7)
    assert f.provenance == 'monte-carlo(3)'
    assert f.mass == pytest.approx(1.0, abs=1e-3)
    assert np.all(f.values >= 0)
    again = spectral.monte_carlo_density(params, MatrixKind.laplacian, 3, 512, seed=7)
    np.testing.assert_array_equal(f.values, again.values)


def test_monte_carlo_single_realization_is_kernel_estimate():
    params = ErdosRenyiParams(60, 0.2)
    grid = np.linspace(-1, 25, 300)
    mc = spectral.monte_carlo_density(params, MatrixKind.row_normalized_laplacian, 1, grid,
                                      seed=3, bandwidth=0.05)
    first = spectral.realization_spectra(params, MatrixKind.row_normalized_laplacian, 1, 3)[0]
    single = spectral.kernel_density(first, grid, bandwidth=0.05)
    np.testing.assert_allclose(mc.values, single.values, rtol=1e-12, atol=1e-15)


def test_monte_carlo_bandwidth_shrinks_with_realizations():
    params = ErdosRenyiParams(200, 0.1)
    kind = MatrixKind.row_normalized_laplacian
    spectra = spectral.realization_spectra(params, kind, 4, seed=5)
    f = spectral.monte_carlo_density(params, kind, 4, 2048, seed=5)
    widths = [spectral.silverman_bandwidth(s.values) for s in spectra]
    assert f.bandwidth == pytest.approx(np.mean(widths)/4)
    # support edges sit just outside the extreme realized eigenvalues
    pooled = np.concatenate([s.values for s in spectra])
    low, high = f.support(1e-3*f.peak)
    assert pooled.min() - 3.5*f.bandwidth < low <= pooled.min()
    assert pooled.max() <= high < pooled.max() + 3.5*f.bandwidth


def test_monte_carlo_variance_falls_with_realizations():
    params = ErdosRenyiParams(60, 0.2)
    kind = MatrixKind.row_normalized_laplacian
    grid = np.linspace(0.3, 1.7, 141)

    def pointwise_variance(realizations):
        runs = [spectral.monte_carlo_density(params, kind, realizations, grid, seed=seed,
                                             bandwidth=0.05).values
                for seed in range(100, 112)]
        return np.mean(np.var(runs, axis=0, ddof=1))

    ratio = pointwise_variance(2)/pointwise_variance(8)
    assert 2.0 < ratio < 8.0


def test_trivial_eigenvalue_excluded():
    params = ErdosRenyiParams(30, 0.3)
    kept = spectral.realization_spectra(params, MatrixKind.laplacian, 2, 1, exclude_trivial=False)
    dropped = spectral.realization_spectra(params, MatrixKind.laplacian, 2, 1)
    for full, reduced in zip(kept, dropped):
        assert len(reduced) == len(full) - 1
        assert abs(full.values[0]) < 1e-10
        np.testing.assert_array_equal(reduced.values, full.values[1:])


def test_adjacency_bulk_is_semicircle():
    n, theta = 400, 0.1
    params = ErdosRenyiParams(n, theta)
    scale = np.sqrt(n*theta*(1 - theta))
    spectra = spectral.realization_spectra(params, MatrixKind.adjacency, 3, seed=21)
    # the Perron outlier near n*theta sits far from the bulk
    bulk = np.concatenate([s.values[:-1] for s in spectra])/scale
    f = spectral.kernel_density(Spectrum(bulk, MatrixKind.adjacency), np.linspace(-3, 3, 1201),
                                bandwidth=0.05)
    assert f.mass == pytest.approx(1.0, abs=1e-3)
    assert f.moment(2) == pytest.approx(1.0, abs=0.05)
    low, high = f.support(0.01)
    assert low == pytest.approx(-2.0, abs=0.25)
    assert high == pytest.approx(2.0, abs=0.25)


def test_weight_density_pushforward():
    grid = np.linspace(0, 2, 201)
    f = SpectralDensity(grid, np.full(201, 0.5), 'monte-carlo(1)', bandwidth=0.1)
    w = spectral.weight_density(f, 0.8)
    np.testing.assert_allclose(w.grid, (1 - 0.8*grid)[::-1])
    assert w.mass == pytest.approx(f.mass)
    assert w.bandwidth == pytest.approx(0.08)
    with pytest.raises(SpectralError):
        spectral.weight_density(f, 0.0)


def test_density_file(tmp_path):
    grid = np.linspace(-1, 1, 101)
    values = 0.75*(1 - grid**2)
    f = SpectralDensity(grid, values, 'monte-carlo(4)', bandwidth=0.0123)
    path = str(tmp_path/'f.txt')
    spectral.save_density(f, path)
    with open(path) as fh:
        assert fh.readline().strip() == spectral.DENSITY_HEADER
    loaded = spectral.load_analytic_density(path)
    np.testing.assert_array_equal(loaded.grid, grid)
    np.testing.assert_array_equal(loaded.values, values)
    assert loaded.bandwidth == 0.0123
    assert loaded.provenance == spectral.Provenance.analytic


def test_density_file_renormalized(tmp_path):
    grid = np.linspace(0, 1, 11)
    path = str(tmp_path/'f.txt')
    spectral.save_density(SpectralDensity(grid, np.full(11, 1.03), 'x'), path)
    assert spectral.load_analytic_density(path).mass == pytest.approx(1.0)
    spectral.save_density(SpectralDensity(grid, np.full(11, 1.2), 'x'), path)
    with pytest.raises(SpectralError, match='deviates'):
        spectral.load_analytic_density(path)


def test_density_file_malformed(tmp_path):
    path = tmp_path/'f.txt'
    path.write_text('0 1\n1 1\n')
    with pytest.raises(SpectralError, match='header'):
        spectral.load_analytic_density(str(path))
    path.write_text(spectral.DENSITY_HEADER + '\n0 1\n1\n')
    with pytest.raises(SpectralError, match='expected'):
        spectral.load_analytic_density(str(path))


def test_density_validation():
    with pytest.raises(SpectralError):
        SpectralDensity([0, 1, 1], [1, 1, 1], 'x')
    with pytest.raises(SpectralError):
        SpectralDensity([0, 1], [1, -1], 'x')


def _two_bumps():
    grid = np.linspace(-1, 1, 201)
    values = np.where((grid > -0.605) & (grid < 0.205), 1.0, 0.0)
    values += np.where((grid > 0.495) & (grid < 0.955), 1.0, 0.0)
    return SpectralDensity(grid, values, 'x')


def test_support_region_drops_gaps():
    f = _two_bumps()
    region = spectral.support_region(f, kappa=0.1, tau=0.5, count=200)
    assert region.lambda_min == pytest.approx(-0.6)
    assert 0.88 < region.lambda_max < 0.9
    assert np.all(region.points < 0.9)
    assert not np.any((region.points > 0.22) & (region.points < 0.48))
    assert np.all(f.at(region.points[1:-1]) > 0.5)


def test_support_region_empty():
    f = _two_bumps()
    with pytest.raises(SpectralError, match='no spectral mass'):
        spectral.support_region(f, kappa=1.7, tau=0.5, count=10)
    with pytest.raises(SpectralError):
        spectral.support_region(f, kappa=0.0, tau=0.5, count=10)


def test_support_region_single_point():
    f = _two_bumps()
    region = spectral.support_region(f, kappa=0.1, tau=0.5, count=1)
    assert len(region) == 1
    assert region.lambda_min == region.lambda_max == pytest.approx(-0.6)


def test_support_region_of_uniform_density():
    grid = np.linspace(-0.5, 1.0, 301)
    values = np.where((grid > -1e-9) & (grid < 0.5 + 1e-9), 2.0, 0.0)
    f = SpectralDensity(grid, values, 'x')
    region = spectral.support_region(f, kappa=0.05, tau=0.1, count=3)
    np.testing.assert_allclose(region.points, [0.0, 0.25, 0.5], atol=1e-12)
