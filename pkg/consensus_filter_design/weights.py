"""Consensus weight matrices and the consensus conditions.

Two schemes are supported:

    laplacian:                 W = I - alpha L,     L = D - A
    row-normalized-laplacian:  W = I - alpha L̂_R,  L̂_R = I - D^-1 A

Both are similar to a symmetric matrix through a diagonal scaling S
(S = I for the Laplacian scheme, S = D^1/2 for the row-normalized one), so
their spectra are real and every spectral quantity below is computed with the
symmetric eigensolver on S W S^-1.
"""
import numpy as np
import scipy.sparse as sp

from consensus_filter_design.errors import WeightError
from consensus_filter_design.logger import log
from consensus_filter_design import graphgen
from consensus_filter_design.spectral import (
    MatrixKind,
    Spectrum,
    symmetric_eigenvalues,
    )

# Tolerance for declaring an eigenvalue equal to 1.
UNIT_TOL = 1e-8
# Margin below 1 required of rho(W - J) for a strict contraction.
CONTRACTION_TOL = 1e-10

class Scheme:
    """Weight schemes."""
    laplacian = 'laplacian'
    row_normalized_laplacian = 'row-normalized-laplacian'

    all = (laplacian, row_normalized_laplacian)

    @staticmethod
    def base_matrix(scheme):
        """Matrix kind whose spectrum the scheme maps through 1 - alpha*nu."""
        if scheme == Scheme.laplacian:
            return MatrixKind.laplacian
        if scheme == Scheme.row_normalized_laplacian:
            return MatrixKind.row_normalized_laplacian
        raise WeightError('Unknown weight scheme {!r}'.format(scheme))

class WeightMatrix(object):
    """Consensus update matrix with its left Perron vector.

    Attributes:
        w (array): dense N x N matrix.
        w_sparse (scipy.sparse.csr_matrix): same matrix, used for iteration.
        ell (array): left eigenvector for eigenvalue 1.
        scheme (str): one of Scheme.
        alpha (float): weight scale.
        similarity (array): diagonal of S with S W S^-1 symmetric.
    """

    def __init__(self, w_sparse, ell, scheme, alpha, similarity):
        self.w_sparse = w_sparse.tocsr()
        self.w = self.w_sparse.toarray()
        self.ell = np.asarray(ell, dtype=float)
        self.scheme = scheme
        self.alpha = float(alpha)
        self.similarity = np.asarray(similarity, dtype=float)

    @property
    def n(self):
        return self.w.shape[0]

    def symmetrized(self):
        """S W S^-1, symmetric by construction."""
        s = self.similarity
        sym = s[:, None]*self.w/s[None, :]
        return 0.5*(sym + sym.T)

    def spectrum(self):
        """Real spectrum of W."""
        return Spectrum(symmetric_eigenvalues(self.symmetrized()).values, MatrixKind.weight)

    def __repr__(self):
        return 'WeightMatrix({}, alpha={:.4g}, N={})'.format(self.scheme, self.alpha, self.n)

class ConsensusProjector(object):
    """Rank-one projector J_ell = 1 ell^T / (ell^T 1)."""

    def __init__(self, ell):
        self.ell = np.asarray(ell, dtype=float)
        self.normalization = float(np.sum(self.ell))

    def apply(self, x):
        """((ell^T x)/(ell^T 1)) 1"""
        x = np.asarray(x, dtype=float)
        return np.full(len(x), np.dot(self.ell, x)/self.normalization)

    def matrix(self):
        return np.outer(np.ones(len(self.ell)), self.ell)/self.normalization

class ConsensusReport(object):
    """Outcome of check_consensus_conditions."""

    def __init__(self, row_sums_one, left_eigenvector, contraction, rho):
        self.row_sums_one = bool(row_sums_one)
        self.left_eigenvector = bool(left_eigenvector)
        self.contraction = bool(contraction)
        self.rho = float(rho)

    @property
    def ok(self):
        return self.row_sums_one and self.left_eigenvector and self.contraction

    def as_dict(self):
        return {'row_sums_one': self.row_sums_one,
                'left_eigenvector': self.left_eigenvector,
                'contraction': self.contraction,
                'rho': self.rho}

def _require_connected(g):
    if not g.connected:
        raise WeightError('Graph is disconnected: eigenvalue 1 of W is not simple')

def laplacian_weight(g, alpha):
    """W = I - alpha (D - A), doubly stochastic with ell = 1.

    Raises:
        WeightError: disconnected graph or alpha <= 0.
    """
    if alpha <= 0:
        raise WeightError('alpha must be positive, got {}'.format(alpha))
    _require_connected(g)
    degrees = g.degrees.astype(float)
    w = sp.diags(1.0 - alpha*degrees) + alpha*g.adjacency
    return WeightMatrix(w, np.ones(g.n), Scheme.laplacian, alpha, np.ones(g.n))

def row_normalized_laplacian_weight(g, alpha):
    """W = I - alpha (I - D^-1 A), row stochastic with ell = d.

    Raises:
        WeightError: disconnected graph or alpha <= 0.
    """
    if alpha <= 0:
        raise WeightError('alpha must be positive, got {}'.format(alpha))
    _require_connected(g)
    degrees = g.degrees.astype(float)
    w = sp.diags(np.full(g.n, 1.0 - alpha)) + alpha*sp.diags(1.0/degrees) @ g.adjacency
    return WeightMatrix(w, degrees, Scheme.row_normalized_laplacian, alpha, np.sqrt(degrees))

def build_weight(g, scheme, alpha):
    """Dispatch on the scheme name."""
    if scheme == Scheme.laplacian:
        return laplacian_weight(g, alpha)
    if scheme == Scheme.row_normalized_laplacian:
        return row_normalized_laplacian_weight(g, alpha)
    raise WeightError('Unknown weight scheme {!r}'.format(scheme))

def choose_alpha(f, tau):
    """alpha = 1/c with c the midpoint of {lambda : f(lambda) > tau}.

    Args:
        f (SpectralDensity): density of L or L̂_R eigenvalues.
        tau (float): absolute density threshold.

    Raises:
        WeightError: no mass above tau, or a support centre <= 0.
    """
    support = f.support(tau)
    if support is None:
        raise WeightError('Density has no mass above tau={:.3g}'.format(tau))
    centre = 0.5*(support[0] + support[1])
    if centre <= 0:
        raise WeightError('Support centre {:.4g} is not positive'.format(centre))
    log.info('Support [{:.4g}, {:.4g}], alpha = 1/{:.4g}'.format(support[0], support[1], centre))
    return 1.0/centre

def consensus_projector(ell):
    """Build J_ell.

    Raises:
        WeightError: ell has negative entries or zero sum.
    """
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < 0) or not np.any(ell > 0):
        raise WeightError('ell must be entrywise nonnegative with a positive entry')
    return ConsensusProjector(ell)

def check_consensus_conditions(wm):
    """Check W 1 = 1, ell^T W = ell^T and rho(W - J_ell) < 1.

    Returns:
        ConsensusReport with the three flags and the measured rho.
    """
    ones = np.ones(wm.n)
    row_sums_one = np.max(np.abs(wm.w_sparse @ ones - ones)) <= 1e-12
    left = wm.w_sparse.T @ wm.ell
    left_eigenvector = np.max(np.abs(left - wm.ell)) <= 1e-10*max(1.0, np.max(np.abs(wm.ell)))
    s = wm.similarity
    projector = consensus_projector(wm.ell).matrix()
    deflated = s[:, None]*projector/s[None, :]
    deflated = wm.symmetrized() - 0.5*(deflated + deflated.T)
    rho = float(np.max(np.abs(symmetric_eigenvalues(deflated).values)))
    report = ConsensusReport(row_sums_one, left_eigenvector, rho < 1.0 - CONTRACTION_TOL, rho)
    log.debug('Consensus conditions for {}: {}'.format(wm, report.as_dict()))
    return report

def degree_correction(x, degrees):
    """(mean of degrees) * x / degrees, entrywise."""
    degrees = np.asarray(degrees, dtype=float)
    if np.any(degrees == 0):
        raise WeightError('zero degree; corrective transform undefined')
    return np.mean(degrees)*np.asarray(x, dtype=float)/degrees

def corrective_transform(x, g):
    """(mean degree) D^-1 x.

    Premultiplying the initial data by this transform makes the
    degree-weighted consensus value equal the unweighted mean of the data.

    Raises:
        WeightError: some node has zero degree.
    """
    return degree_correction(x, g.degrees)

def mean_weight_spectrum(params, scheme, alpha):
    """Spectrum of the weight matrix built from the mean adjacency E[A].

    Args:
        params: graph model parameters.
        scheme (str): weight scheme.
        alpha (float): weight scale.

    Returns:
        Spectrum of W(E[A]).
    """
    mean = graphgen.expected_adjacency(params)
    degrees = mean.sum(axis=1)
    if np.any(degrees <= 0):
        raise WeightError('Mean graph has an isolated node')
    if scheme == Scheme.laplacian:
        sym = np.eye(len(mean)) - alpha*(np.diag(degrees) - mean)
    elif scheme == Scheme.row_normalized_laplacian:
        scale = 1.0/np.sqrt(degrees)
        sym = (1.0 - alpha)*np.eye(len(mean)) + alpha*scale[:, None]*mean*scale[None, :]
    else:
        raise WeightError('Unknown weight scheme {!r}'.format(scheme))
    return Spectrum(symmetric_eigenvalues(sym).values, MatrixKind.weight)

def non_unit_eigenvalues(s):
    """Eigenvalues of a weight spectrum with the single consensus eigenvalue removed.

    Raises:
        WeightError: eigenvalue 1 is absent or not simple.
    """
    unit = np.abs(s.values - 1.0) <= UNIT_TOL
    if np.count_nonzero(unit) != 1:
        raise WeightError('Eigenvalue 1 is not simple ({} eigenvalues within {} of 1)'.format(
            np.count_nonzero(unit), UNIT_TOL))
    return s.values[~unit]
