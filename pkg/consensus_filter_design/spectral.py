"""Spectra, empirical spectral densities and the design region.

The filter designer never sees a single graph's eigenvalues (outside oracle
mode). It works from a density that approximates the expected empirical
spectral density of the weight-matrix model. Here that density is the
Monte Carlo average of Gaussian kernel estimates over independent
realizations; densities computed elsewhere (for instance from a
deterministic-equivalent solver) can be read from file instead.

Density file format:

    # spectral-density v1
    # provenance: monte-carlo(20)
    # bandwidth: 0.0123
    <lambda> <value>
    ...

with ascending lambda, values written with 17 significant digits.
"""
import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid
from sklearn.neighbors import KernelDensity

from consensus_filter_design.errors import SpectralError
from consensus_filter_design.logger import log
from consensus_filter_design.seeding import sub_seed, DESIGN_STREAM
from consensus_filter_design import graphgen

DENSITY_HEADER = '# spectral-density v1'
# Relative symmetry tolerance accepted by the eigensolver.
SYMMETRY_TOL = 1e-12
# Smallest kernel width used for degenerate spectra.
BANDWIDTH_FLOOR = 1e-3
# Allowed mass deviation when loading an external density.
LOAD_MASS_TOL = 0.05
# Mass deviation accepted as already normalized.
NORMALIZED_MASS_TOL = 0.01

class MatrixKind:
    """Matrices whose spectra the pipeline handles."""
    adjacency = 'adjacency'
    laplacian = 'laplacian'
    row_normalized_laplacian = 'row-normalized-laplacian'
    weight = 'weight'

    all = (adjacency, laplacian, row_normalized_laplacian, weight)

class Spectrum(object):
    """Sorted real eigenvalues of one matrix.

    Args:
        values (array): eigenvalues (sorted on construction).
        source (str): one of MatrixKind.
    """

    def __init__(self, values, source):
        values = np.sort(np.asarray(values, dtype=float).ravel())
        values.setflags(write=False)
        self.values = values
        self.source = source

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return 'Spectrum({}, N={}, [{:.4g}, {:.4g}])'.format(
            self.source, len(self), self.values[0], self.values[-1])

class Provenance:
    single = 'single-realization'
    analytic = 'analytic-file'

    @staticmethod
    def monte_carlo(realizations):
        return 'monte-carlo({})'.format(int(realizations))

class SpectralDensity(object):
    """Grid-sampled density approximating an empirical spectral density.

    Args:
        grid (array): ascending abscissae.
        values (array): nonnegative density samples.
        provenance (str): where the density came from.
        bandwidth (float): kernel width in units of lambda (None for
        external densities).
    """

    def __init__(self, grid, values, provenance, bandwidth=None):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
            raise SpectralError('Density grid and values must be matching 1-D arrays')
        if np.any(np.diff(grid) <= 0):
            raise SpectralError('Density grid must be strictly ascending')
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise SpectralError('Density values must be finite and nonnegative')
        self.grid = grid
        self.values = values
        self.provenance = provenance
        self.bandwidth = bandwidth

    @property
    def mass(self):
        """Trapezoidal integral over the grid."""
        return float(trapezoid(self.values, self.grid))

    @property
    def peak(self):
        return float(np.max(self.values))

    def at(self, lam):
        """Linear interpolation of the density, zero outside the grid."""
        return np.interp(lam, self.grid, self.values, left=0.0, right=0.0)

    def moment(self, k):
        """k-th raw moment by the trapezoidal rule."""
        return float(trapezoid(self.grid**k*self.values, self.grid))

    def support(self, tau):
        """Extreme grid locations where the density exceeds tau.

        Returns:
            (low, high) or None when no sample exceeds tau.
        """
        above = self.grid[self.values > tau]
        if len(above) == 0:
            return None
        return float(above[0]), float(above[-1])

class SupportRegion(object):
    """Finite sample set of the design region.

    Args:
        points (array): ascending sample locations.
        kappa (float): gap kept below lambda = 1.
        tau (float): absolute density threshold used.
    """

    def __init__(self, points, kappa, tau):
        points = np.sort(np.asarray(points, dtype=float).ravel())
        if len(points) == 0:
            raise SpectralError('no spectral mass below 1-κ; check κ, τ, density')
        if np.any(points >= 1.0 - kappa):
            raise SpectralError('Design region contains points >= 1-kappa={}'.format(1.0 - kappa))
        self.points = points
        self.kappa = float(kappa)
        self.tau = float(tau)

    @property
    def lambda_min(self):
        return float(self.points[0])

    @property
    def lambda_max(self):
        return float(self.points[-1])

    def __len__(self):
        return len(self.points)

def symmetric_eigenvalues(matrix, source=MatrixKind.weight):
    """Full spectrum of a dense real symmetric matrix.

    LAPACK's tridiagonalisation with divide and conquer (syevd) is used.

    Args:
        matrix (array): N x N real matrix, symmetric within 1e-12 relative.
        source (str): label stored on the Spectrum.

    Returns:
        Spectrum with ascending eigenvalues.

    Raises:
        SpectralError: the input is not square or not symmetric.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise SpectralError('Expected a square matrix, got shape {}'.format(matrix.shape))
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_TOL*scale:
        raise SpectralError('Matrix is not symmetric: max |M - M^T| = {:.3e}'.format(asymmetry))
    values = linalg.eigh(matrix, eigvals_only=True, driver='evd')
    return Spectrum(values, source)

def adjacency_spectrum(g):
    return symmetric_eigenvalues(g.dense_adjacency(), MatrixKind.adjacency)

def laplacian_spectrum(g):
    """Spectrum of L = D - A."""
    adjacency = g.dense_adjacency()
    return symmetric_eigenvalues(np.diag(g.degrees.astype(float)) - adjacency,
                                 MatrixKind.laplacian)

def row_normalized_laplacian_spectrum(g):
    """Spectrum of I - D^-1 A.

    Computed from the similar symmetric matrix I - D^-1/2 A D^-1/2.

    Raises:
        SpectralError: some node has zero degree.
    """
    if np.any(g.degrees == 0):
        raise SpectralError('zero degree; L̂_R undefined')
    scale = 1.0/np.sqrt(g.degrees.astype(float))
    normalized = scale[:, None]*g.dense_adjacency()*scale[None, :]
    values = symmetric_eigenvalues(np.eye(g.n) - normalized).values
    return Spectrum(values, MatrixKind.row_normalized_laplacian)

def base_spectrum(g, matrix_kind):
    """Spectrum of the named graph matrix."""
    if matrix_kind == MatrixKind.adjacency:
        return adjacency_spectrum(g)
    if matrix_kind == MatrixKind.laplacian:
        return laplacian_spectrum(g)
    if matrix_kind == MatrixKind.row_normalized_laplacian:
        return row_normalized_laplacian_spectrum(g)
    raise SpectralError('No base spectrum for matrix kind {!r}'.format(matrix_kind))

def empirical_distribution_at(s, lam):
    """Fraction of eigenvalues <= lam."""
    return float(np.searchsorted(s.values, lam, side='right'))/len(s)

def silverman_bandwidth(values):
    """Silverman's rule 0.9 min(sigma, IQR/1.34) N^-1/5.

    Falls back to whichever spread estimate is positive; returns 0 when
    both vanish.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    sigma = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)/1.34
    spread = min(sigma, iqr) if iqr > 0 else sigma
    return 0.9*spread*len(values)**(-0.2)

def _kernel_values(eigenvalues, grid, bandwidth):
    kde = KernelDensity(kernel='gaussian', bandwidth=bandwidth)
    kde.fit(np.asarray(eigenvalues, dtype=float).reshape(-1, 1))
    return np.exp(kde.score_samples(np.asarray(grid, dtype=float).reshape(-1, 1)))

def _checked_bandwidth(bandwidth, values):
    if bandwidth is None:
        bandwidth = silverman_bandwidth(values)
    if not np.isfinite(bandwidth) or bandwidth < BANDWIDTH_FLOOR:
        log.warning('Kernel bandwidth {:.3g} raised to floor {}'.format(
            bandwidth, BANDWIDTH_FLOOR))
        bandwidth = BANDWIDTH_FLOOR
    return float(bandwidth)

def kernel_density(s, grid, bandwidth=None):
    """Gaussian kernel estimate of the eigenvalue density of one spectrum.

    Args:
        s (Spectrum): eigenvalues.
        grid (array): ascending abscissae; should span
        [min(s) - 3h, max(s) + 3h].
        bandwidth (float): kernel width h; Silverman's rule when None.

    Returns:
        SpectralDensity with single-realization provenance.
    """
    h = _checked_bandwidth(bandwidth, s.values)
    grid = np.asarray(grid, dtype=float)
    if grid[0] > s.values[0] - 3*h or grid[-1] < s.values[-1] + 3*h:
        log.warning('Grid [{:.4g}, {:.4g}] does not cover the spectrum +/- 3h'.format(
            grid[0], grid[-1]))
    return SpectralDensity(grid, _kernel_values(s.values, grid, h),
                           Provenance.single, bandwidth=h)

def density_grid(low, high, bandwidth, points):
    """Uniform grid covering [low - 4h, high + 4h]."""
    return np.linspace(low - 4*bandwidth, high + 4*bandwidth, int(points))

def _realization_spectrum(params, matrix_kind, seed, exclude_trivial):
    """Draw one graph and return its spectrum.

    The Laplacian kinds need a connected draw (otherwise L̂_R may be undefined
    and the consensus eigenvalue is not simple), so disconnected draws are
    resampled.
    """
    needs_connected = matrix_kind in (MatrixKind.laplacian, MatrixKind.row_normalized_laplacian)
    if needs_connected:
        g = graphgen.generate_connected(params, seed)
    else:
        g = graphgen.generate(params, seed)
    s = base_spectrum(g, matrix_kind)
    if exclude_trivial and needs_connected:
        # the smallest eigenvalue is the known zero of the consensus mode
        s = Spectrum(s.values[1:], s.source)
    return s

def realization_spectra(params, matrix_kind, realizations, seed, exclude_trivial=True):
    """Spectra of independent realizations with derived seeds.

    Realization r uses sub_seed(seed, DESIGN_STREAM, r).
    """
    if realizations < 1:
        raise SpectralError('Need at least one realization, got {}'.format(realizations))
    return [_realization_spectrum(params, matrix_kind, sub_seed(seed, DESIGN_STREAM, r),
                                  exclude_trivial)
            for r in range(realizations)]

def monte_carlo_bandwidth(spectra):
    """Mean single-realization Silverman width divided by the realization count.

    The kernel tails past the support edge must stay within the spread of
    the realized extreme eigenvalues, which pooled Silverman does not ensure.
    """
    widths = [silverman_bandwidth(s.values) for s in spectra]
    return float(np.mean(widths))/len(spectra)

def monte_carlo_density(params, matrix_kind, realizations, grid, seed,
                        bandwidth=None, exclude_trivial=True):
    """Expected empirical spectral density by Monte Carlo averaging.

    One bandwidth is used for every realization: the supplied one, or
    monte_carlo_bandwidth. The average of the per-realization estimates is
    then the pooled estimate, and R = 1 reduces to kernel_density.

    Args:
        params: graph model parameters.
        matrix_kind (str): adjacency, laplacian or row-normalized-laplacian.
        realizations (int): R >= 1.
        grid (array or int): abscissae, or a point count for an automatic
        grid spanning the pooled spectrum +/- 4h.
        seed (int): master seed.
        bandwidth (float): optional kernel width.
        exclude_trivial (bool): drop the consensus eigenvalue of Laplacian
        kinds before smoothing.

    Returns:
        SpectralDensity with provenance monte-carlo(R).
    """
    spectra = realization_spectra(params, matrix_kind, realizations, seed, exclude_trivial)
    pooled = np.concatenate([s.values for s in spectra])
    if bandwidth is None:
        bandwidth = monte_carlo_bandwidth(spectra)
    h = _checked_bandwidth(bandwidth, pooled)
    if np.isscalar(grid):
        grid = density_grid(pooled.min(), pooled.max(), h, grid)
    grid = np.asarray(grid, dtype=float)
    total = np.zeros(len(grid))
    for r, s in enumerate(spectra):
        total += _kernel_values(s.values, grid, h)
        log.debug('Monte Carlo realization {}/{} smoothed'.format(r + 1, realizations))
    density = SpectralDensity(grid, total/len(spectra),
                              Provenance.monte_carlo(realizations), bandwidth=h)
    log.info('Monte Carlo {} density from {} realizations (h={:.4g}, mass={:.4f})'.format(
        matrix_kind, realizations, h, density.mass))
    return density

def weight_density(f, alpha):
    """Push a base-matrix density through lambda = 1 - alpha*nu.

    Args:
        f (SpectralDensity): density of L or L̂_R eigenvalues nu.
        alpha (float): weight scale, > 0.

    Returns:
        SpectralDensity of the weight-matrix eigenvalues.
    """
    if alpha <= 0:
        raise SpectralError('Weight scale alpha must be positive, got {}'.format(alpha))
    grid = (1.0 - alpha*f.grid)[::-1]
    values = (f.values/alpha)[::-1]
    bandwidth = None if f.bandwidth is None else alpha*f.bandwidth
    return SpectralDensity(grid, values, f.provenance, bandwidth=bandwidth)

def save_density(f, path):
    """Write a density in the spectral-density v1 text format."""
    with open(path, 'w') as out:
        out.write(DENSITY_HEADER + '\n')
        out.write('# provenance: {}\n'.format(f.provenance))
        if f.bandwidth is not None:
            out.write('# bandwidth: {!r}\n'.format(float(f.bandwidth)))
        for lam, value in zip(f.grid, f.values):
            out.write('{:.17g} {:.17g}\n'.format(lam, value))
    log.info('Density written to {}'.format(path))

def load_analytic_density(path):
    """Read a density file.

    Densities off unit mass by more than 1% but at most 5% are renormalized;
    the provenance is analytic-file.

    Raises:
        SpectralError: malformed file, negative values or mass off by more
        than 5%.
    """
    try:
        with open(path, 'r') as f:
            lines = f.read().splitlines()
    except IOError as err:
        raise SpectralError('Cannot read density file {}'.format(path)) from err
    if not lines or lines[0].strip() != DENSITY_HEADER:
        raise SpectralError('{}: missing "{}" header'.format(path, DENSITY_HEADER))
    bandwidth = None
    grid, values = [], []
    for number, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith('#'):
            if line.startswith('# bandwidth:'):
                bandwidth = float(line.split(':', 1)[1])
            continue
        fields = line.split()
        try:
            lam, value = float(fields[0]), float(fields[1])
        except (ValueError, IndexError) as err:
            raise SpectralError('{}:{}: expected "lambda value", got {!r}'.format(
                path, number, line)) from err
        grid.append(lam)
        values.append(value)
    density = SpectralDensity(grid, values, Provenance.analytic, bandwidth=bandwidth)
    mass = density.mass
    if abs(mass - 1.0) > LOAD_MASS_TOL:
        raise SpectralError('{}: density mass {:.4f} deviates from 1 by more than {:.0%}'.format(
            path, mass, LOAD_MASS_TOL))
    if abs(mass - 1.0) > NORMALIZED_MASS_TOL:
        density = SpectralDensity(density.grid, density.values/mass, Provenance.analytic,
                                  bandwidth=bandwidth)
    return density

def support_region(f, kappa, tau, count):
    """Sample the design region {lambda < 1 - kappa : f(lambda) > tau}.

    count uniformly spaced points cover [lambda_min, lambda_max], the extreme
    grid locations passing both tests; both endpoints are always kept and
    interior points where the density drops to tau or below are dropped.

    Args:
        f (SpectralDensity): density in weight-matrix coordinates.
        kappa (float): gap below 1, > 0.
        tau (float): absolute density threshold, > 0.
        count (int): number of uniformly spaced candidates.

    Returns:
        SupportRegion

    Raises:
        SpectralError: empty region.
    """
    if kappa <= 0 or tau <= 0:
        raise SpectralError('kappa and tau must be positive (got {}, {})'.format(kappa, tau))
    passing = f.grid[(f.grid < 1.0 - kappa) & (f.values > tau)]
    if len(passing) == 0:
        raise SpectralError('no spectral mass below 1-κ; check κ, τ, density')
    low, high = float(passing[0]), float(passing[-1])
    candidates = np.linspace(low, high, int(count)) if count > 1 else np.array([low])
    inside = f.at(candidates) > tau
    inside[0] = inside[-1] = True
    points = np.unique(candidates[inside])
    dropped = len(candidates) - len(points)
    if dropped:
        log.debug('Dropped {} region samples inside density gaps'.format(dropped))
    return SupportRegion(points, kappa, tau)
