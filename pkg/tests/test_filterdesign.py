import numpy as np
import pytest
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import linprog

from consensus_filter_design import filterdesign, weights
from consensus_filter_design.errors import DesignError
from consensus_filter_design.filterdesign import (
    ChebyshevBasis,
    DesignProblem,
    FilterPolynomial,
    Method,
    QBasis,
    )
from consensus_filter_design.spectral import MatrixKind, Spectrum, SupportRegion

# [0.2, 1.6] in L̂_R coordinates is [-0.6, 0.8] for W = I - L̂_R
LOW, HIGH = 1 - 1.6, 1 - 0.2
POINTS = np.linspace(LOW, HIGH, 401)


def _region(points=POINTS, kappa=0.1):
    return SupportRegion(points, kappa, 0.0)


def _design(degree, q_basis=QBasis.chebyshev, points=POINTS):
    return filterdesign.design_minimax_filter(DesignProblem(_region(points), degree), q_basis)


def _chebyshev_optimum(degree):
    """Continuous minimax filter over [LOW, HIGH] and its max modulus."""
    s = (2*POINTS - LOW - HIGH)/(HIGH - LOW)
    s1 = (2 - LOW - HIGH)/(HIGH - LOW)
    t = np.zeros(degree + 1)
    t[-1] = 1.0
    eps = 1.0/np.cosh(degree*np.arccosh(s1))
    return cheb.chebval(s, t)*eps, eps


def test_degree_one_closed_form():
    p = _design(1)
    # zero at the region midpoint
    assert p.achieved_eps == pytest.approx(0.7/0.9, rel=1e-12)
    np.testing.assert_allclose(p.p_monomial, [-0.1/0.9, 1/0.9], atol=1e-12)


def test_degree_one_on_unit_half_interval():
    p = _design(1, points=np.linspace(0.0, 0.5, 400))
    assert p.achieved_eps == pytest.approx(1/3, rel=1e-12)
    np.testing.assert_allclose(p.p_monomial, [-1/3, 4/3], atol=1e-12)


def test_region_at_zero_gives_plain_filter():
    p = _design(1, points=np.array([0.0]))
    assert p.achieved_eps == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(p.p_monomial, [0.0, 1.0], atol=1e-12)


@pytest.mark.parametrize('degree', [3, 5, 6, 7, 8])
def test_full_region_lp_is_optimal(degree):
    basis = ChebyshevBasis.for_interval(LOW, HIGH)
    problem = filterdesign.minimax_tableau(POINTS, degree, basis)
    bounds = [(None, None) if free else (0, None) for free in problem.free]
    reference = linprog(problem.c, A_ub=problem.a_ub, b_ub=problem.b_ub, bounds=bounds,
                        method='highs-ds')
    p = _design(degree)
    assert 1 - p.achieved_eps == pytest.approx(-reference.fun, abs=1e-9)
    assert np.max(np.abs(p(POINTS))) <= p.achieved_eps + 1e-9


@pytest.mark.parametrize('degree', [2, 3, 4, 5, 6, 7, 8])
def test_matches_chebyshev_solution(degree):
    p = _design(degree)
    values, eps = _chebyshev_optimum(degree)
    assert p.achieved_eps <= eps*(1 + 1e-9)
    assert (eps - p.achieved_eps)/eps <= 5e-3
    if degree <= 4:
        np.testing.assert_allclose(p(POINTS), values, atol=0.02*eps)


@pytest.mark.parametrize('degree', [1, 3, 6])
def test_equioscillation(degree):
    p = _design(degree)
    assert filterdesign.alternation_count(p, POINTS, p.achieved_eps) >= degree + 1


def test_eps_matches_max_modulus():
    p = _design(5)
    assert np.max(np.abs(p(POINTS))) == pytest.approx(p.achieved_eps, abs=1e-9)


def test_eps_non_increasing_in_degree():
    eps = [_design(d).achieved_eps for d in range(1, 9)]
    assert all(b <= a + 1e-12 for a, b in zip(eps, eps[1:]))


def test_unit_gain_at_one():
    for d in (1, 4, 7):
        p = _design(d)
        assert p(1.0) == pytest.approx(1.0, abs=1e-12)
        assert np.polyval(p.p_monomial[::-1], 1.0) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(np.polyval(p.p_monomial[::-1], POINTS), p(POINTS),
                                   atol=1e-9)


def test_monomial_basis_agrees_at_low_degree():
    for d in (2, 4):
        assert _design(d, QBasis.monomial).achieved_eps == pytest.approx(
            _design(d).achieved_eps, abs=1e-8)


def test_lp_matches_reference_solver():
    points = POINTS[::8]
    basis = ChebyshevBasis.for_interval(points.min(), points.max())
    problem = filterdesign.minimax_tableau(points, 4, basis)
    bounds = [(None, None) if free else (0, None) for free in problem.free]
    reference = linprog(problem.c, A_ub=problem.a_ub, b_ub=problem.b_ub, bounds=bounds,
                        method='highs-ds')
    p = _design(4, points=points)
    assert 1 - p.achieved_eps == pytest.approx(-reference.fun, abs=1e-9)


def test_single_point_region():
    p = _design(1, points=np.array([0.3]))
    assert p.basis.half_width == 1.0
    assert p.achieved_eps == pytest.approx(0.0, abs=1e-12)
    assert p(0.3) == pytest.approx(0.0, abs=1e-12)


def test_region_must_stay_below_one():
    region = SupportRegion([0.5, 1.0], -0.5, 0.0)
    with pytest.raises(DesignError, match='>= 1'):
        filterdesign.design_minimax_filter(DesignProblem(region, 2))


def test_design_problem_validation():
    with pytest.raises(DesignError):
        DesignProblem(_region(), 0)


def _toy_spectrum():
    return Spectrum([1.0, 0.5, -0.3, 0.2, 0.2], MatrixKind.weight)


def test_newton_zeros_and_filter():
    s = _toy_spectrum()
    np.testing.assert_allclose(filterdesign.newton_zeros(s, 2), [0.5, -0.3])
    p = filterdesign.newton_baseline_filter(s, 2)
    assert p.method == Method.newton_baseline
    np.testing.assert_allclose(p([0.5, -0.3, 1.0]), [0.0, 0.0, 1.0], atol=1e-12)
    rho = filterdesign.predicted_spectral_radius(p, s)
    assert rho == pytest.approx(0.3*0.5/0.65)
    assert p.achieved_eps == pytest.approx(rho)


def test_newton_needs_enough_distinct_eigenvalues():
    s = _toy_spectrum()
    assert filterdesign.distinct_non_unit_count(s) == 3
    with pytest.raises(DesignError, match='distinct'):
        filterdesign.newton_baseline_filter(s, 4)


def test_newton_full_degree_is_exact():
    s = _toy_spectrum()
    p = filterdesign.newton_baseline_filter(s, 3)
    rho = filterdesign.predicted_spectral_radius(p, s)
    assert rho == pytest.approx(0.0, abs=1e-12)


def test_per_iteration_rate():
    p = _design(2)
    assert filterdesign.per_iteration_rate(p, 0.25) == pytest.approx(np.log(0.25)/2)
    assert filterdesign.per_iteration_rate(p, 0.0) == float('-inf')
    with pytest.raises(DesignError):
        filterdesign.per_iteration_rate(p, -0.1)


def test_identity_filter():
    p = filterdesign.identity_filter()
    np.testing.assert_allclose(p.p_monomial, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(p(POINTS), POINTS, atol=1e-15)
    s = _toy_spectrum()
    assert filterdesign.predicted_spectral_radius(p, s) == pytest.approx(0.5)


def test_predicted_radius_needs_simple_unit_eigenvalue():
    s = Spectrum([0.1, 1.0, 1.0], MatrixKind.weight)
    with pytest.raises(DesignError):
        filterdesign.predicted_spectral_radius(filterdesign.identity_filter(), s)


def test_oracle_filter_radius_is_design_value(er50):
    wm = weights.row_normalized_laplacian_weight(er50, 0.9)
    s = wm.spectrum()
    p = filterdesign.oracle_minimax_filter(s, 0.05, 3)
    assert p.method == Method.oracle_minimax
    assert filterdesign.predicted_spectral_radius(p, s) == pytest.approx(p.achieved_eps, abs=1e-9)
    plain = filterdesign.predicted_spectral_radius(filterdesign.identity_filter(), s)
    assert p.achieved_eps < plain**3


def test_oracle_needs_eigenvalues_below_gap():
    s = Spectrum([0.99, 1.0], MatrixKind.weight)
    with pytest.raises(DesignError):
        filterdesign.oracle_minimax_filter(s, 0.05, 1)


def test_chebyshev_eval():
    unit = ChebyshevBasis(0.0, 1.0)
    assert filterdesign.chebyshev_eval(2, 0.5, unit) == pytest.approx(-0.5)
    shifted = ChebyshevBasis(1.0, 2.0)
    assert filterdesign.chebyshev_eval(5, 3.0, shifted) == pytest.approx(1.0)
    with pytest.raises(DesignError):
        filterdesign.chebyshev_eval(-1, 0.0, unit)


def test_filter_polynomial_validation():
    with pytest.raises(DesignError):
        FilterPolynomial(2, [1.0], ChebyshevBasis(0.0, 1.0), None, Method.minimax_lp)
    with pytest.raises(DesignError):
        ChebyshevBasis(0.0, 0.0)


def test_filter_file(tmp_path):
    p = _design(3)
    path = str(tmp_path/'p.json')
    filterdesign.save_filter(p, path)
    loaded = filterdesign.load_filter(path)
    assert loaded.degree == 3
    assert loaded.achieved_eps == p.achieved_eps
    np.testing.assert_array_equal(loaded.q_coeffs, p.q_coeffs)
    np.testing.assert_array_equal(loaded(POINTS), p(POINTS))


def test_filter_file_malformed(tmp_path):
    path = tmp_path/'p.json'
    path.write_text('{"degree": 2}')
    with pytest.raises(DesignError, match='Cannot read'):
        filterdesign.load_filter(str(path))


def test_high_degree_uses_basis_form():
    p = _design(12, points=POINTS[::2])
    assert p.p_monomial is None
    _, eps = _chebyshev_optimum(12)
    assert filterdesign.evaluate_filter(p, 1.0) == pytest.approx(1.0)
    assert np.max(np.abs(filterdesign.evaluate_filter(p, POINTS[::2]))) == pytest.approx(
        p.achieved_eps, abs=1e-9)
    assert p.achieved_eps <= eps*(1 + 1e-9)


def test_more_points_never_lower_eps(rng):
    coarse = np.sort(rng.uniform(LOW, HIGH, 40))
    fine = np.sort(np.concatenate((coarse, rng.uniform(LOW, HIGH, 60))))
    for d in (2, 5):
        assert _design(d, points=fine).achieved_eps >= _design(d, points=coarse).achieved_eps - 1e-9


def test_design_bound_transfers_to_spectrum_inside_region():
    p = _design(4)
    inside = Spectrum(np.concatenate(([1.0], POINTS[::7])), MatrixKind.weight)
    assert filterdesign.predicted_spectral_radius(p, inside) <= p.achieved_eps + 1e-9
