"""Plain and filter-accelerated distributed average consensus.

Every node repeats x_{n+1} = W x_n. With a filter p of degree d the node
also keeps its last d+1 values and, on every d-th iteration, replaces the
current value by

    x_n <- sum_{k=0}^{d} a_k x_{n-d+k},

a_k being the monomial coefficients of p. Since x_{n-d+k} = W^k x_{n-d}, this
is x_n = p(W) x_{n-d}. The first application happens at n = d.
"""
import collections

import numpy as np
import pandas as pd

from consensus_filter_design.errors import DesignError, SimulationError
from consensus_filter_design.filterdesign import identity_filter, predicted_spectral_radius
from consensus_filter_design.logger import log
from consensus_filter_design.seeding import make_rng
from consensus_filter_design.weights import (
    CONTRACTION_TOL,
    Scheme,
    consensus_projector,
    degree_correction,
    )

# Errors at or below this level are treated as numerical underflow.
ERROR_FLOOR = 1e-14
# Default fraction of the recorded trajectory skipped before fitting a rate.
DEFAULT_BURN_IN = 0.2
TRAJECTORY_COLUMNS = ['step', 'error']

class SimulationConfig(object):
    """Settings of one consensus run.

    Args:
        horizon (int): total iterations T >= 1.
        filter (FilterPolynomial): optional acceleration filter.
        record_every (int): recording stride; the filter degree (or 1 for
        plain runs) when None.
        x0_seed (int): seed of the i.i.d. standard normal initial data.
        corrective (bool): premultiply the initial data by the corrective
        transform (row-normalized scheme only).
        x0 (array): explicit initial data, overriding x0_seed.
        keep_states (bool): also store the state at every recorded step.
    """

    def __init__(self, horizon, filter=None, record_every=None, x0_seed=0, corrective=True,
                 x0=None, keep_states=False):
        if int(horizon) < 1:
            raise SimulationError('horizon must be >= 1, got {}'.format(horizon))
        self.horizon = int(horizon)
        self.filter = filter
        if record_every is None:
            record_every = filter.degree if filter is not None else 1
        if int(record_every) < 1:
            raise SimulationError('record_every must be >= 1, got {}'.format(record_every))
        self.record_every = int(record_every)
        self.x0_seed = x0_seed
        self.corrective = bool(corrective)
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)
        self.keep_states = bool(keep_states)
        if filter is not None and self.horizon % filter.degree != 0:
            log.warning('Horizon {} is not a multiple of the filter degree {}'.format(
                self.horizon, filter.degree))

class Trajectory(object):
    """Recorded normalized consensus errors of one run.

    Attributes:
        errors (array): ||x_n - J x_0|| / ||x_0 - J x_0|| at the recorded steps.
        steps (array): matching iteration indices, starting at 0.
        final_state (array): x_T.
        unweighted_error (float): ||x_T - mean(x_0) 1|| / ||x_0 - mean(x_0) 1||,
        x_0 being the data before any corrective transform.
        states (array): recorded states, one row per step, when kept.
    """

    def __init__(self, errors, steps, final_state, unweighted_error=None, states=None):
        self.errors = np.asarray(errors, dtype=float)
        self.steps = np.asarray(steps, dtype=np.int64)
        self.final_state = final_state
        self.unweighted_error = unweighted_error
        self.states = None if states is None else np.asarray(states)

    def __len__(self):
        return len(self.steps)

def _initial_state(wm, cfg):
    if cfg.x0 is not None:
        if cfg.x0.shape != (wm.n,):
            raise SimulationError('Initial state has shape {}, weight matrix is {}x{}'.format(
                cfg.x0.shape, wm.n, wm.n))
        return cfg.x0.copy()
    return make_rng(cfg.x0_seed).standard_normal(wm.n)

def _filter_radius(wm, p, spectrum):
    if spectrum is None:
        spectrum = wm.spectrum()
    try:
        return predicted_spectral_radius(p, spectrum)
    except DesignError as err:
        raise SimulationError(str(err)) from err

def simulate(wm, cfg, spectrum=None):
    """Run the consensus iteration for cfg.horizon steps.

    Args:
        wm (WeightMatrix): update matrix.
        cfg (SimulationConfig): run settings.
        spectrum (Spectrum): spectrum of wm when already known; computed
        otherwise.

    Returns:
        Trajectory

    Raises:
        SimulationError: mismatched initial data, a plain run whose W does
        not contract, or a filter without stored monomial coefficients.
    """
    p = cfg.filter
    if p is not None and p.p_monomial is None:
        raise SimulationError('Filter of degree {} has no monomial form to apply'.format(p.degree))
    rho = _filter_radius(wm, p if p is not None else identity_filter(), spectrum)
    if p is None and rho >= 1.0 - CONTRACTION_TOL:
        raise SimulationError('Consensus conditions fail: rho(W - J) = {:.6g}'.format(rho))
    if p is not None and rho >= 1.0 - CONTRACTION_TOL:
        log.warning('Filter d={} has rho(p(W) - J) = {:.6g} >= 1; the run may diverge'.format(
            p.degree, rho))

    raw = _initial_state(wm, cfg)
    x = raw
    if cfg.corrective and wm.scheme == Scheme.row_normalized_laplacian:
        x = degree_correction(raw, wm.ell)
    target = consensus_projector(wm.ell).apply(x)
    scale = np.linalg.norm(x - target)
    if scale == 0:
        raise SimulationError('Initial state is already at consensus')

    degree = p.degree if p is not None else None
    window = collections.deque([x], maxlen=(degree + 1) if degree else 1)
    errors, steps = [1.0], [0]
    states = [x] if cfg.keep_states else None
    for n in range(1, cfg.horizon + 1):
        x = wm.w_sparse @ x
        if degree:
            window.append(x)
            if n % degree == 0:
                x = p.p_monomial[0]*window[0]
                for k in range(1, degree + 1):
                    x = x + p.p_monomial[k]*window[k]
                window[-1] = x
        if n % cfg.record_every == 0:
            errors.append(np.linalg.norm(x - target)/scale)
            steps.append(n)
            if states is not None:
                states.append(x)

    mean = np.mean(raw)
    unweighted = np.linalg.norm(x - mean)/np.linalg.norm(raw - mean)
    log.debug('Simulated {} steps ({}): final error {:.3e}'.format(
        cfg.horizon, 'plain' if p is None else 'd={}'.format(degree), errors[-1]))
    return Trajectory(errors, steps, x, unweighted, states)

def measure_rate(t, burn_in=DEFAULT_BURN_IN):
    """Least-squares slope of ln(error) against the iteration index.

    Points before burn_in times the last recorded step are skipped. When
    errors underflow to ERROR_FLOOR the fit uses the positive points before
    the first underflow and the result is flagged as truncated.

    Args:
        t (Trajectory): recorded run.
        burn_in (float): fraction in [0, 1).

    Returns:
        (rate, truncated)

    Raises:
        SimulationError: fewer than two usable points.
    """
    if not 0.0 <= burn_in < 1.0:
        raise SimulationError('burn_in must lie in [0, 1), got {}'.format(burn_in))
    steps = t.steps.astype(float)
    errors = t.errors
    underflow = np.flatnonzero(errors <= ERROR_FLOOR)
    truncated = len(underflow) > 0
    end = underflow[0] if truncated else len(errors)
    window = np.flatnonzero((steps >= burn_in*steps[-1]) & (np.arange(len(errors)) < end))
    if truncated and len(window) < 2:
        window = np.arange(end)
    if len(window) < 2:
        raise SimulationError('Need at least two positive errors to fit a rate, got {}'.format(
            len(window)))
    if truncated:
        log.warning('Error underflow at step {}; rate fitted on {} points before it'.format(
            int(steps[end]), len(window)))
    slope = np.polyfit(steps[window], np.log(errors[window]), 1)[0]
    return float(slope), truncated

def worst_case_error_bounds(wm, p, m):
    """Dense check of rho^m <= ||p(W)^m - J||_2 <= cond(V) rho^m.

    W = V diag(lambda) V^-1 with V = S^-1 U, U orthogonal, so cond(V) is the
    ratio of the extreme entries of the diagonal similarity S.

    Args:
        wm (WeightMatrix): small weight matrix.
        p (FilterPolynomial): filter, or None for plain consensus.
        m (int): number of filter applications.

    Returns:
        (lower, measured, upper)
    """
    p = p if p is not None else identity_filter()
    if p.p_monomial is None:
        raise SimulationError('Filter of degree {} has no monomial form'.format(p.degree))
    rho = _filter_radius(wm, p, None)
    filtered = np.zeros_like(wm.w)
    for a in p.p_monomial[::-1]:
        filtered = filtered @ wm.w + a*np.eye(wm.n)
    error = np.linalg.matrix_power(filtered, int(m)) - consensus_projector(wm.ell).matrix()
    measured = float(np.linalg.norm(error, 2))
    condition = float(np.max(wm.similarity)/np.min(wm.similarity))
    return rho**m, measured, condition*rho**m

def write_trajectory(t, path):
    """Write a trajectory as CSV with header "step,error"."""
    frame = pd.DataFrame({'step': t.steps, 'error': t.errors}, columns=TRAJECTORY_COLUMNS)
    frame.to_csv(path, index=False, float_format='%.17g')
    log.debug('Trajectory written to {}'.format(path))

def read_trajectory(path):
    """Read a trajectory CSV (final state not stored)."""
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (IOError, ValueError) as err:
        raise SimulationError('Cannot read trajectory {}: {}'.format(path, err)) from err
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise SimulationError('{}: expected columns {}, got {}'.format(
            path, TRAJECTORY_COLUMNS, list(frame.columns)))
    return Trajectory(frame['error'].to_numpy(), frame['step'].to_numpy(), None)
