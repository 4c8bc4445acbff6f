"""Consensus acceleration filter design.

A filter is a polynomial p of degree d with p(1) = 1. Writing

    p(lambda) = 1 + (1 - lambda) q(lambda),   q = sum_n a_n phi_n,

removes the equality constraint, and the minimax problem

    minimise  max_{lambda_i in region} |p(lambda_i)|

becomes a small LP in (a_0 ... a_{d-1}, eps). The phi_n are Chebyshev
polynomials of the first kind scaled to the region:

    phi_n(lambda) = T_n((lambda - center)/half_width),

which keeps the LP well conditioned for the degrees used here.

The LP is posed with eps = 1 - delta, 0 <= delta <= 1 (q = 0 already gives
eps = 1), which makes every right-hand side nonnegative:

    (1 - lambda_i) sum_n a_n phi_n(lambda_i) + delta <= 0
   -(1 - lambda_i) sum_n a_n phi_n(lambda_i) + delta <= 2
                                              delta <= 1

and delta is maximised.
"""
import json

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as poly

from consensus_filter_design.errors import DesignError, WeightError
from consensus_filter_design.logger import log
from consensus_filter_design.lp_tools import LpProblem, solve_lp
from consensus_filter_design.spectral import SupportRegion
from consensus_filter_design.weights import non_unit_eigenvalues

# Monomial coefficients of p are stored up to this degree only.
MAX_MONOMIAL_DEGREE = 10
# Eigenvalues closer than this are one zero of the Newton baseline.
DISTINCT_TOL = 1e-6

class Method:
    """Design methods."""
    minimax_lp = 'minimax-lp'
    newton_baseline = 'newton-baseline'
    newton_mean = 'newton-mean'
    oracle_minimax = 'oracle-minimax'
    plain = 'plain'

    all = (minimax_lp, newton_baseline, newton_mean, oracle_minimax, plain)

class QBasis:
    chebyshev = 'chebyshev'
    monomial = 'monomial'

class ChebyshevBasis(object):
    """Chebyshev basis scaled to [center - half_width, center + half_width]."""

    def __init__(self, center, half_width):
        if not half_width > 0:
            raise DesignError('Chebyshev half width must be positive, got {}'.format(half_width))
        self.center = float(center)
        self.half_width = float(half_width)

    @classmethod
    def for_interval(cls, lambda_min, lambda_max):
        """Basis for an interval; a single point gets half width 1."""
        if lambda_max - lambda_min <= 1e-12:
            return cls(lambda_min, 1.0)
        return cls(0.5*(lambda_max + lambda_min), 0.5*(lambda_max - lambda_min))

    @property
    def domain(self):
        return [self.center - self.half_width, self.center + self.half_width]

    def scaled(self, lam):
        return (np.asarray(lam, dtype=float) - self.center)/self.half_width

    def as_dict(self):
        return {'center': self.center, 'half_width': self.half_width}

class FilterPolynomial(object):
    """Filter p(lambda) = 1 + (1 - lambda) q(lambda).

    Attributes:
        degree (int): d >= 1.
        q_coeffs (array): a_0 ... a_{d-1} of q in the scaled Chebyshev basis
        (or the monomial basis when q_basis is monomial).
        p_monomial (array): a_0 ... a_d of p in powers of lambda; None when
        d exceeds MAX_MONOMIAL_DEGREE.
        basis (ChebyshevBasis): basis scaling.
        achieved_eps (float): design value of max |p| over the design set.
        method (str): how the filter was obtained.
    """

    def __init__(self, degree, q_coeffs, basis, achieved_eps, method, q_basis=QBasis.chebyshev):
        degree = int(degree)
        q_coeffs = np.asarray(q_coeffs, dtype=float).ravel()
        if degree < 1:
            raise DesignError('Filter degree must be >= 1, got {}'.format(degree))
        if len(q_coeffs) != degree:
            raise DesignError('Expected {} q coefficients, got {}'.format(degree, len(q_coeffs)))
        self.degree = degree
        self.q_coeffs = q_coeffs
        self.basis = basis
        self.achieved_eps = None if achieved_eps is None else float(achieved_eps)
        self.method = method
        self.q_basis = q_basis
        self.p_monomial = self._expand() if degree <= MAX_MONOMIAL_DEGREE else None

    def q(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.q_basis == QBasis.monomial:
            return poly.polyval(lam, self.q_coeffs)
        return cheb.chebval(self.basis.scaled(lam), self.q_coeffs)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return 1.0 + (1.0 - lam)*self.q(lam)

    def _expand(self):
        if self.q_basis == QBasis.monomial:
            q_mono = Polynomial(self.q_coeffs)
        else:
            q_mono = Chebyshev(self.q_coeffs, domain=self.basis.domain).convert(kind=Polynomial)
        p_mono = (1 + Polynomial([1.0, -1.0])*q_mono).coef
        out = np.zeros(self.degree + 1)
        out[:len(p_mono)] = p_mono[:self.degree + 1]
        return out

    def as_dict(self):
        return {'degree': self.degree,
                'method': self.method,
                'q_basis': self.q_basis,
                'basis': self.basis.as_dict(),
                'q_coeffs': self.q_coeffs.tolist(),
                'p_monomial': None if self.p_monomial is None else self.p_monomial.tolist(),
                'achieved_eps': self.achieved_eps}

    @classmethod
    def from_dict(cls, d):
        basis = ChebyshevBasis(d['basis']['center'], d['basis']['half_width'])
        return cls(d['degree'], d['q_coeffs'], basis, d['achieved_eps'], d.get('method'),
                   q_basis=d.get('q_basis', QBasis.chebyshev))

    def __repr__(self):
        return 'FilterPolynomial({}, d={}, eps={})'.format(self.method, self.degree,
                                                          self.achieved_eps)

class DesignProblem(object):
    """Region, degree and method of one design."""

    def __init__(self, region, degree, method=Method.minimax_lp):
        if int(degree) < 1:
            raise DesignError('Filter degree must be >= 1, got {}'.format(degree))
        if region is None or len(region) == 0:
            raise DesignError('Design region is empty')
        self.region = region
        self.degree = int(degree)
        self.method = method

def chebyshev_eval(n, lam, basis):
    """phi_n(lambda) = T_n((lambda - center)/half_width), any lambda."""
    if n < 0:
        raise DesignError('Chebyshev index must be >= 0, got {}'.format(n))
    return Chebyshev.basis(int(n), domain=basis.domain)(lam)

def _q_vander(points, degree, basis, q_basis):
    if q_basis == QBasis.monomial:
        return poly.polyvander(points, degree - 1)
    return cheb.chebvander(basis.scaled(points), degree - 1)

def minimax_tableau(points, degree, basis, q_basis=QBasis.chebyshev):
    """LP in (a_0 ... a_{d-1}, delta) for the sampled minimax problem.

    Args:
        points (array): design sample points, all < 1.
        degree (int): filter degree d.
        basis (ChebyshevBasis): scaling of the q basis.
        q_basis (str): chebyshev or monomial.

    Returns:
        LpProblem minimising -delta; eps = 1 - delta.
    """
    points = np.asarray(points, dtype=float)
    rows = (1.0 - points)[:, None]*_q_vander(points, degree, basis, q_basis)
    ones = np.ones((len(points), 1))
    a_ub = np.vstack((np.hstack((rows, ones)),
                      np.hstack((-rows, ones)),
                      np.hstack((np.zeros((1, degree)), np.ones((1, 1))))))
    b_ub = np.concatenate((np.zeros(len(points)), np.full(len(points), 2.0), [1.0]))
    c = np.zeros(degree + 1)
    c[-1] = -1.0
    free = np.ones(degree + 1, dtype=bool)
    free[-1] = False
    return LpProblem(c, a_ub, b_ub, free)

def design_minimax_filter(problem, q_basis=QBasis.chebyshev):
    """Minimax filter over the sampled design region.

    Args:
        problem (DesignProblem): region and degree.
        q_basis (str): basis for q; chebyshev unless testing conditioning.

    Returns:
        FilterPolynomial with achieved_eps set to the LP optimum.

    Raises:
        DesignError: a region point is >= 1.
    """
    points = np.asarray(problem.region.points, dtype=float)
    if np.any(points >= 1.0):
        raise DesignError('Design region contains lambda >= 1; p(1) = 1 cannot be met')
    basis = ChebyshevBasis.for_interval(points.min(), points.max())
    solution = solve_lp(minimax_tableau(points, problem.degree, basis, q_basis))
    eps = 1.0 - solution.x[-1]
    f = FilterPolynomial(problem.degree, solution.x[:-1], basis, eps, problem.method,
                         q_basis=q_basis)
    log.info('Designed {} filter d={} over {} points in [{:.4g}, {:.4g}]: eps={:.6g} '
             '({} pivots)'.format(problem.method, problem.degree, len(points), points.min(),
                                  points.max(), eps, solution.pivots))
    return f

def oracle_minimax_filter(spectrum, kappa, degree):
    """Minimax design on the realized eigenvalues below 1 - kappa.

    Raises:
        DesignError: no eigenvalue below 1 - kappa.
    """
    points = np.unique(spectrum.values[spectrum.values < 1.0 - kappa])
    if len(points) == 0:
        raise DesignError('No eigenvalue below 1 - kappa = {}'.format(1.0 - kappa))
    region = SupportRegion(points, kappa, 0.0)
    return design_minimax_filter(DesignProblem(region, degree, Method.oracle_minimax))

def newton_zeros(spectrum, degree):
    """The degree distinct non-unit eigenvalues of largest modulus."""
    try:
        values = non_unit_eigenvalues(spectrum)
    except WeightError as err:
        raise DesignError(str(err)) from err
    order = np.lexsort((values, -np.abs(values)))
    zeros = []
    for lam in values[order]:
        if all(abs(lam - z) > DISTINCT_TOL for z in zeros):
            zeros.append(float(lam))
        if len(zeros) == degree:
            return np.array(zeros)
    raise DesignError('Only {} distinct eigenvalues other than 1; cannot place {} zeros'.format(
        len(zeros), degree))

def distinct_non_unit_count(spectrum):
    """Number of distinct eigenvalues other than 1 (tolerance DISTINCT_TOL)."""
    values = np.sort(non_unit_eigenvalues(spectrum))
    if len(values) == 0:
        return 0
    return 1 + int(np.count_nonzero(np.diff(values) > DISTINCT_TOL))

def newton_baseline_filter(spectrum, degree, method=Method.newton_baseline):
    """Interpolating filter with zeros at the slowest modes.

    p(lambda) = prod_j (lambda - z_j) / prod_j (1 - z_j), the z_j being the
    degree distinct non-unit eigenvalues of largest modulus.

    Raises:
        DesignError: fewer than degree distinct non-unit eigenvalues.
    """
    zeros = newton_zeros(spectrum, degree)
    p = Polynomial.fromroots(zeros)/np.prod(1.0 - zeros)
    quotient, _ = divmod(p - 1, Polynomial([-1.0, 1.0]))
    values = non_unit_eigenvalues(spectrum)
    basis = ChebyshevBasis.for_interval(values.min(), values.max())
    q_cheb = (-quotient).convert(kind=Chebyshev, domain=basis.domain).coef
    q_coeffs = np.zeros(degree)
    q_coeffs[:len(q_cheb)] = q_cheb[:degree]
    f = FilterPolynomial(degree, q_coeffs, basis, None, method)
    f.achieved_eps = float(np.max(np.abs(f(values))))
    log.info('Newton baseline d={} zeros {}'.format(degree, np.array2string(zeros, precision=4)))
    return f

def evaluate_filter(p, lam):
    """p(lambda) from the stored q coefficients; valid at every degree."""
    return p(lam)

def predicted_spectral_radius(p, spectrum):
    """rho(p(W) - J_ell) = max |p(lambda_i)| over eigenvalues other than 1.

    Raises:
        DesignError: eigenvalue 1 is not simple.
    """
    try:
        values = non_unit_eigenvalues(spectrum)
    except WeightError as err:
        raise DesignError(str(err)) from err
    if len(values) == 0:
        return 0.0
    return float(np.max(np.abs(evaluate_filter(p, values))))

def per_iteration_rate(p, rho):
    """(1/d) ln rho; -inf when rho is 0."""
    if rho < 0:
        raise DesignError('Spectral radius must be >= 0, got {}'.format(rho))
    if rho == 0:
        return float('-inf')
    return float(np.log(rho))/p.degree

def identity_filter():
    """p(lambda) = lambda, i.e. plain consensus."""
    return FilterPolynomial(1, [-1.0], ChebyshevBasis(0.0, 1.0), None, Method.plain)

def alternation_count(p, points, eps, tol=1e-7):
    """Longest sign-alternating run of near-extremal residuals.

    Counts points with |p| >= eps - tol, in ascending order, as one
    alternation per sign change (plus one).
    """
    points = np.sort(np.asarray(points, dtype=float))
    residual = p(points)
    signs = np.sign(residual[np.abs(residual) >= eps - tol])
    if len(signs) == 0:
        return 0
    return 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))

def save_filter(p, path):
    """Write a filter as JSON (floats round-trip exactly)."""
    with open(path, 'w') as f:
        json.dump(p.as_dict(), f, indent=2)
        f.write('\n')

def load_filter(path):
    """Read a filter written by save_filter."""
    try:
        with open(path, 'r') as f:
            return FilterPolynomial.from_dict(json.load(f))
    except (IOError, ValueError, KeyError) as err:
        raise DesignError('Cannot read filter file {}: {}'.format(path, err)) from err
