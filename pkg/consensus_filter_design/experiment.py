"""Config-driven experiments: generate, design, simulate, report.

One experiment fixes a graph model and sweeps weight schemes, filter
degrees and design methods. For every scheme the design stage runs once:

    - Monte Carlo density of the base matrix (L or L̂_R) from design seeds,
    - alpha = 1/(centre of the tau-thresholded support),
    - push-forward to weight-matrix coordinates and the design region,
    - one filter per (method, degree) for the density-based methods.

Each trial then draws its own evaluation graph, builds W for every scheme,
designs the oracle filters on the realized spectrum, and simulates every
filter. Trials are independent and run in a process pool when CFD_WORKERS
is larger than 1.

Output layout under output_dir:

    results.json                 config, design summary, per-trial records
    rates.csv                    per (scheme, method, degree) rates
    timings.json                 per-stage runtimes
    densities/<scheme>.txt       base-matrix density
    densities/<scheme>_weight.txt
    filters/<scheme>/<method>_d<d>_t<trial>.json
    spectra/<scheme>_t<trial>.txt
    trajectories/<scheme>/<method>_d<d>_t<trial>.csv
"""
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np
import pandas as pd
import yaml

from consensus_filter_design import consensus, filterdesign, graphgen, spectral, weights
from consensus_filter_design.errors import ConfigError
from consensus_filter_design.filterdesign import Method
from consensus_filter_design.logger import log
from consensus_filter_design.seeding import (
    sub_seed,
    DESIGN_STREAM,
    TRIAL_STREAM,
    INITIAL_STATE_STREAM,
    )
from consensus_filter_design.spectral import MatrixKind
from consensus_filter_design.weights import Scheme

# Environment variable holding the worker-pool size.
WORKERS_ENV = 'CFD_WORKERS'
# Largest filter degree accepted in a sweep.
MAX_DEGREE = 10
RATE_COLUMNS = ['scheme', 'method', 'degree', 'predicted_rate',
                'measured_rate_mean', 'measured_rate_std']

DEFAULTS = {
    'schemes': [Scheme.row_normalized_laplacian],
    'degrees': list(range(1, MAX_DEGREE + 1)),
    'methods': [Method.minimax_lp, Method.newton_baseline, Method.oracle_minimax, Method.plain],
    'mc_realizations': 20,
    'kappa': 0.05,
    'tau_rel': 1e-3,
    'sample_count': 400,
    'grid_points': 1024,
    'trials': 1,
    'horizon_factor': 40,
    'burn_in': 0.2,
    'corrective': True,
    'seed': 0,
    'output_dir': 'results',
    }

def _is_int(value):
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)

def _is_number(value):
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)

def _integer(cfg, field, minimum=None, maximum=None, path=None):
    value = cfg[field]
    path = path or field
    if not _is_int(value):
        raise ConfigError('{}: must be an integer, got {!r}'.format(path, value))
    if minimum is not None and value < minimum:
        raise ConfigError('{}: must be >= {}, got {}'.format(path, minimum, value))
    if maximum is not None and value > maximum:
        raise ConfigError('{}: must be <= {}, got {}'.format(path, maximum, value))
    return int(value)

def _probability(value, path):
    if not _is_number(value) or not 0.0 <= float(value) <= 1.0:
        raise ConfigError('{}: must lie in [0, 1]'.format(path))
    return float(value)

def _open_fraction(value, path):
    if not _is_number(value) or not 0.0 < float(value) < 1.0:
        raise ConfigError('{}: must lie in (0, 1)'.format(path))
    return float(value)

def _choices(value, allowed, path):
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise ConfigError('{}: must be a list'.format(path))
    for k, item in enumerate(value):
        if item not in allowed:
            raise ConfigError('{}[{}]: unknown value {!r}; expected one of {}'.format(
                path, k, item, ', '.join(allowed)))
    # keep first occurrence order
    return list(dict.fromkeys(value))

def parse_model(model):
    """Graph model parameters from the `model` mapping."""
    if not isinstance(model, dict):
        raise ConfigError('model: must be a mapping with a kind')
    kind = model.get('kind')
    if kind == graphgen.ErdosRenyiParams.kind:
        known = {'kind', 'n', 'theta'}
        for key in ('n', 'theta'):
            if key not in model:
                raise ConfigError('model.{}: required for kind {}'.format(key, kind))
        n = _integer(model, 'n', minimum=2, path='model.n')
        theta = _probability(model['theta'], 'model.theta')
        params = graphgen.ErdosRenyiParams(n, theta)
    elif kind == graphgen.LatticeSbmParams.kind:
        known = {'kind', 'dims', 'm', 'theta0', 'thetas'}
        for key in ('dims', 'm', 'theta0', 'thetas'):
            if key not in model:
                raise ConfigError('model.{}: required for kind {}'.format(key, kind))
        dims = model['dims']
        if not isinstance(dims, list) or len(dims) == 0:
            raise ConfigError('model.dims: must be a nonempty list of extents')
        for k, extent in enumerate(dims):
            if not _is_int(extent) or extent < 1:
                raise ConfigError('model.dims[{}]: must be an integer >= 1'.format(k))
        m = _integer(model, 'm', minimum=1, path='model.m')
        theta0 = _probability(model['theta0'], 'model.theta0')
        thetas = model['thetas']
        if not isinstance(thetas, list) or len(thetas) != len(dims):
            raise ConfigError('model.thetas: must list one probability per dimension ({})'.format(
                len(dims)))
        thetas = [_probability(t, 'model.thetas[{}]'.format(k)) for k, t in enumerate(thetas)]
        params = graphgen.LatticeSbmParams(dims, m, theta0, thetas)
    else:
        raise ConfigError('model.kind: unknown graph model {!r}; expected {} or {}'.format(
            kind, graphgen.ErdosRenyiParams.kind, graphgen.LatticeSbmParams.kind))
    for key in model:
        if key not in known:
            raise ConfigError('model.{}: unknown field'.format(key))
    return params

class ExperimentConfig(object):
    """Validated experiment configuration.

    Attributes mirror the YAML keys (see docs/Configuration.md); `model`
    holds ErdosRenyiParams or LatticeSbmParams.
    """

    def __init__(self, cfg, source=None):
        if not isinstance(cfg, dict):
            raise ConfigError('<root>: config must be a mapping')
        for key in cfg:
            if key != 'model' and key not in DEFAULTS:
                raise ConfigError('{}: unknown field'.format(key))
        if 'model' not in cfg:
            raise ConfigError('model: required')
        merged = dict(DEFAULTS)
        merged.update(cfg)
        self.source = source
        self.model = parse_model(cfg['model'])
        self.schemes = _choices(merged['schemes'], Scheme.all, 'schemes')
        if not self.schemes:
            raise ConfigError('schemes: at least one weight scheme is needed')
        self.methods = _choices(merged['methods'], Method.all, 'methods')
        if not self.methods:
            raise ConfigError('methods: at least one method is needed')
        degrees = merged['degrees']
        if not isinstance(degrees, list):
            raise ConfigError('degrees: must be a list')
        for k, d in enumerate(degrees):
            if not _is_int(d) or not 1 <= d <= MAX_DEGREE:
                raise ConfigError('degrees[{}]: must be an integer in [1, {}]'.format(k, MAX_DEGREE))
        self.degrees = sorted(set(int(d) for d in degrees))
        self.mc_realizations = _integer(merged, 'mc_realizations', minimum=1)
        self.kappa = _open_fraction(merged['kappa'], 'kappa')
        self.tau_rel = _open_fraction(merged['tau_rel'], 'tau_rel')
        self.sample_count = _integer(merged, 'sample_count', minimum=1)
        self.grid_points = _integer(merged, 'grid_points', minimum=16)
        self.trials = _integer(merged, 'trials', minimum=1)
        self.horizon_factor = _integer(merged, 'horizon_factor', minimum=1)
        burn_in = merged['burn_in']
        if not _is_number(burn_in) or not 0.0 <= float(burn_in) < 1.0:
            raise ConfigError('burn_in: must lie in [0, 1)')
        self.burn_in = float(burn_in)
        if not isinstance(merged['corrective'], bool):
            raise ConfigError('corrective: must be true or false')
        self.corrective = merged['corrective']
        self.seed = _integer(merged, 'seed', minimum=0)
        if not isinstance(merged['output_dir'], str) or not merged['output_dir']:
            raise ConfigError('output_dir: must be a nonempty path')
        self.output_dir = merged['output_dir']

    @classmethod
    def from_file(cls, cfg_file):
        """Load and validate a YAML config file.

        Raises:
            ConfigError: unreadable file, YAML syntax error or invalid field.
        """
        try:
            with open(cfg_file, 'r') as f:
                cfg = yaml.safe_load(f)
        except IOError as err:
            raise ConfigError('<file>: cannot read config {}: {}'.format(cfg_file, err)) from err
        except yaml.YAMLError as err:
            raise ConfigError('<file>: {} is not valid YAML: {}'.format(cfg_file, err)) from err
        return cls(cfg, source=cfg_file)

    def as_dict(self):
        return {'model': self.model.as_dict(),
                'schemes': list(self.schemes),
                'degrees': list(self.degrees),
                'methods': list(self.methods),
                'mc_realizations': self.mc_realizations,
                'kappa': self.kappa,
                'tau_rel': self.tau_rel,
                'sample_count': self.sample_count,
                'grid_points': self.grid_points,
                'trials': self.trials,
                'horizon_factor': self.horizon_factor,
                'burn_in': self.burn_in,
                'corrective': self.corrective,
                'seed': self.seed,
                'output_dir': self.output_dir}

def worker_count():
    """Pool size from CFD_WORKERS (default 1, in-process)."""
    raw = os.environ.get(WORKERS_ENV, '1')
    try:
        workers = int(raw)
    except ValueError as err:
        raise ConfigError('{}: must be a positive integer, got {!r}'.format(
            WORKERS_ENV, raw)) from err
    if workers < 1:
        raise ConfigError('{}: must be a positive integer, got {!r}'.format(WORKERS_ENV, raw))
    return workers

def _json_value(value):
    """Floats as JSON numbers; infinities and NaN as strings."""
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return 'nan'
        if np.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value

def _write_json(obj, path):
    with open(path, 'w') as f:
        json.dump(_json_value(obj), f, indent=2, sort_keys=True)
        f.write('\n')

class SchemeDesign(object):
    """Design-stage products of one weight scheme.

    Attributes:
        scheme (str): weight scheme.
        density (SpectralDensity): base-matrix density.
        alpha (float): weight scale.
        weight_density (SpectralDensity): density of the W eigenvalues.
        region (SupportRegion): sampled design region.
        filters (dict): (method, degree) -> FilterPolynomial for the
        methods designed once per scheme.
    """

    def __init__(self, scheme, density, alpha, weight_density, region, filters):
        self.scheme = scheme
        self.density = density
        self.alpha = alpha
        self.weight_density = weight_density
        self.region = region
        self.filters = filters

    def summary(self):
        return {'alpha': self.alpha,
                'density_bandwidth': self.density.bandwidth,
                'density_provenance': self.density.provenance,
                'region': {'lambda_min': self.region.lambda_min,
                           'lambda_max': self.region.lambda_max,
                           'points': len(self.region),
                           'kappa': self.region.kappa,
                           'tau': self.region.tau},
                'achieved_eps': {'{}_d{}'.format(method, d): f.achieved_eps
                                 for (method, d), f in sorted(self.filters.items())}}

def scheme_density(config, scheme):
    """Monte Carlo density of the scheme's base matrix and the weight scale."""
    density = spectral.monte_carlo_density(config.model, Scheme.base_matrix(scheme),
                                           config.mc_realizations, config.grid_points,
                                           config.seed)
    alpha = weights.choose_alpha(density, config.tau_rel*density.peak)
    return density, alpha

def design_region(config, density, alpha):
    """Weight-coordinate density and sampled design region."""
    f_w = spectral.weight_density(density, alpha)
    region = spectral.support_region(f_w, config.kappa, config.tau_rel*f_w.peak,
                                     config.sample_count)
    return f_w, region

def design_scheme(config, scheme):
    """Run the design stage of one scheme.

    Returns:
        SchemeDesign
    """
    density, alpha = scheme_density(config, scheme)
    f_w, region = design_region(config, density, alpha)
    log.info('{}: design region [{:.4g}, {:.4g}] with {} points'.format(
        scheme, region.lambda_min, region.lambda_max, len(region)))
    filters = {}
    if Method.minimax_lp in config.methods:
        for d in config.degrees:
            problem = filterdesign.DesignProblem(region, d, Method.minimax_lp)
            filters[(Method.minimax_lp, d)] = filterdesign.design_minimax_filter(problem)
    if Method.newton_baseline in config.methods and config.degrees:
        g0 = graphgen.generate_connected(config.model, sub_seed(config.seed, DESIGN_STREAM, 0))
        source = weights.build_weight(g0, scheme, alpha).spectrum()
        for d in config.degrees:
            filters[(Method.newton_baseline, d)] = filterdesign.newton_baseline_filter(source, d)
    if Method.newton_mean in config.methods and config.degrees:
        mean_spectrum = weights.mean_weight_spectrum(config.model, scheme, alpha)
        available = filterdesign.distinct_non_unit_count(mean_spectrum)
        for d in config.degrees:
            if d > available:
                log.info('{}: newton-mean skipped for d={} (mean spectrum has {} distinct '
                         'non-unit eigenvalues)'.format(scheme, d, available))
                continue
            filters[(Method.newton_mean, d)] = filterdesign.newton_baseline_filter(
                mean_spectrum, d, method=Method.newton_mean)
    return SchemeDesign(scheme, density, alpha, f_w, region, filters)

def _trial_filters(config, design, spectrum):
    """(method, degree, filter) for every run of one scheme and trial."""
    runs = []
    for method in config.methods:
        if method == Method.plain:
            runs.append((method, 1, filterdesign.identity_filter()))
        elif method == Method.oracle_minimax:
            for d in config.degrees:
                runs.append((method, d, filterdesign.oracle_minimax_filter(
                    spectrum, config.kappa, d)))
        else:
            for d in config.degrees:
                if (method, d) in design.filters:
                    runs.append((method, d, design.filters[(method, d)]))
    return runs

def _paths(scheme, method, degree, trial):
    stem = '{}_d{}_t{}'.format(method, degree, trial)
    return (os.path.join('filters', scheme, stem + '.json'),
            os.path.join('trajectories', scheme, stem + '.csv'))

def run_trial(config, designs, trial):
    """Evaluate every design on one trial graph.

    Args:
        config (ExperimentConfig): experiment settings.
        designs (dict): scheme -> SchemeDesign.
        trial (int): trial index.

    Returns:
        (records, seconds)
    """
    start = time.time()
    out = config.output_dir
    g = graphgen.generate_connected(config.model, sub_seed(config.seed, TRIAL_STREAM, trial))
    x0_seed = sub_seed(config.seed, INITIAL_STATE_STREAM, trial)
    records = []
    for scheme in config.schemes:
        design = designs[scheme]
        wm = weights.build_weight(g, scheme, design.alpha)
        spectrum = wm.spectrum()
        spectrum_file = os.path.join('spectra', '{}_t{}.txt'.format(scheme, trial))
        np.savetxt(os.path.join(out, spectrum_file), spectrum.values, fmt='%.17g')
        for method, degree, p in _trial_filters(config, design, spectrum):
            rho = filterdesign.predicted_spectral_radius(p, spectrum)
            predicted_rate = filterdesign.per_iteration_rate(p, rho)
            sim = consensus.SimulationConfig(
                horizon=config.horizon_factor*degree,
                filter=None if method == Method.plain else p,
                x0_seed=x0_seed,
                corrective=config.corrective)
            trajectory = consensus.simulate(wm, sim, spectrum=spectrum)
            measured_rate, truncated = consensus.measure_rate(trajectory, config.burn_in)
            filter_file, trajectory_file = _paths(scheme, method, degree, trial)
            filterdesign.save_filter(p, os.path.join(out, filter_file))
            consensus.write_trajectory(trajectory, os.path.join(out, trajectory_file))
            records.append({'scheme': scheme,
                            'method': method,
                            'degree': degree,
                            'trial': trial,
                            'predicted_rho': rho,
                            'predicted_rate': predicted_rate,
                            'measured_rate': measured_rate,
                            'truncated': truncated,
                            'achieved_eps': p.achieved_eps,
                            'unweighted_error': trajectory.unweighted_error,
                            'filter': filter_file,
                            'spectrum': spectrum_file,
                            'trajectory': trajectory_file})
            log.debug('{} {} d={} t={}: predicted {:.5g}, measured {:.5g}'.format(
                scheme, method, degree, trial, predicted_rate, measured_rate))
    seconds = time.time() - start
    log.info('Trial {} done in {:.2f} s ({} runs)'.format(trial, seconds, len(records)))
    return records, seconds

def summarize(records):
    """Per (scheme, method, degree) rates, sorted.

    Returns:
        pandas.DataFrame with RATE_COLUMNS.
    """
    if not records:
        return pd.DataFrame(columns=RATE_COLUMNS)
    frame = pd.DataFrame(records)
    summary = frame.groupby(['scheme', 'method', 'degree'], sort=True).agg(
        predicted_rate=('predicted_rate', 'mean'),
        measured_rate_mean=('measured_rate', 'mean'),
        measured_rate_std=('measured_rate', lambda s: float(np.std(s.to_numpy()))),
        ).reset_index()
    return summary[RATE_COLUMNS]

class ExperimentResult(object):
    """Records and summary of one experiment run.

    Attributes:
        config (ExperimentConfig): settings.
        designs (dict): scheme -> SchemeDesign.
        records (list): per (scheme, method, degree, trial) dicts.
        summary (pandas.DataFrame): rates table.
        timings (dict): per-stage runtimes in seconds.
    """

    def __init__(self, config, designs, records, summary, timings):
        self.config = config
        self.designs = designs
        self.records = records
        self.summary = summary
        self.timings = timings

    def as_dict(self):
        return {'config': self.config.as_dict(),
                'designs': {scheme: d.summary() for scheme, d in sorted(self.designs.items())},
                'records': self.records,
                'summary': self.summary.to_dict(orient='records')}

class ExperimentRunner(object):
    """Run the full pipeline of one experiment config.

    Args:
        config (ExperimentConfig): validated settings.
        workers (int): process-pool size for trials; CFD_WORKERS when None.
    """

    def __init__(self, config, workers=None):
        self.config = config
        self.workers = worker_count() if workers is None else int(workers)

    def _prepare_output(self):
        out = self.config.output_dir
        for scheme in self.config.schemes:
            for sub in ('filters', 'trajectories'):
                os.makedirs(os.path.join(out, sub, scheme), exist_ok=True)
        for sub in ('densities', 'spectra'):
            os.makedirs(os.path.join(out, sub), exist_ok=True)

    def design(self, timings):
        """Design stage for every scheme; densities written to disk."""
        designs = {}
        for scheme in self.config.schemes:
            start = time.time()
            design = design_scheme(self.config, scheme)
            spectral.save_density(design.density, os.path.join(
                self.config.output_dir, 'densities', '{}.txt'.format(scheme)))
            spectral.save_density(design.weight_density, os.path.join(
                self.config.output_dir, 'densities', '{}_weight.txt'.format(scheme)))
            designs[scheme] = design
            timings['design'][scheme] = time.time() - start
        return designs

    def simulate(self, designs, timings):
        """Run every trial, in a process pool when workers > 1."""
        trials = list(range(self.config.trials))
        if self.workers > 1 and len(trials) > 1:
            log.info('Dispatching {} trials to {} workers'.format(len(trials), self.workers))
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(run_trial, [self.config]*len(trials),
                                         [designs]*len(trials), trials))
        else:
            outcomes = [run_trial(self.config, designs, trial) for trial in trials]
        records = []
        for trial, (trial_records, seconds) in zip(trials, outcomes):
            records.extend(trial_records)
            timings['trials'][str(trial)] = seconds
        records.sort(key=lambda r: (r['scheme'], r['method'], r['degree'], r['trial']))
        return records

    def run(self):
        """Execute the pipeline and write every output.

        Returns:
            ExperimentResult
        """
        start = time.time()
        timings = {'design': {}, 'trials': {}}
        self._prepare_output()
        designs = self.design(timings)
        records = self.simulate(designs, timings)
        summary = summarize(records)
        timings['total'] = time.time() - start
        result = ExperimentResult(self.config, designs, records, summary, timings)
        self.write(result)
        return result

    def write(self, result):
        out = self.config.output_dir
        payload = result.as_dict()
        payload['generated_at'] = datetime.now(timezone.utc).isoformat()
        _write_json(payload, os.path.join(out, 'results.json'))
        result.summary.to_csv(os.path.join(out, 'rates.csv'), index=False, float_format='%.17g')
        _write_json(result.timings, os.path.join(out, 'timings.json'))
        log.info('Results written to {} ({} records)'.format(out, len(result.records)))

def run_experiment(config_path, workers=None):
    """Load a config and run the whole experiment.

    Returns:
        ExperimentResult (also persisted under output_dir).
    """
    config = ExperimentConfig.from_file(config_path)
    log.info('Running experiment {} ({} model, schemes {}, degrees {}, methods {})'.format(
        config_path, config.model.kind, config.schemes, config.degrees, config.methods))
    return ExperimentRunner(config, workers=workers).run()

def emit_density(config_path, matrix_kind, out_path):
    """Write the Monte Carlo density and a single-realization companion.

    The companion, written to out_path + '.single', is the kernel estimate of
    the first design realization alone on the same grid; with
    mc_realizations = 1 both files agree.

    Args:
        config_path (str): experiment config.
        matrix_kind (str): adjacency, laplacian, row-normalized-laplacian or
        weight (first configured scheme).
        out_path (str): density file to write.

    Returns:
        (SpectralDensity, SpectralDensity): Monte Carlo and single realization.
    """
    config = ExperimentConfig.from_file(config_path)
    if matrix_kind not in MatrixKind.all:
        raise ConfigError('--matrix: unknown matrix kind {!r}; expected one of {}'.format(
            matrix_kind, ', '.join(MatrixKind.all)))
    if matrix_kind == MatrixKind.weight:
        scheme = config.schemes[0]
        base, alpha = scheme_density(config, scheme)
        kind = Scheme.base_matrix(scheme)
    else:
        kind = matrix_kind
        base = spectral.monte_carlo_density(config.model, kind, config.mc_realizations,
                                            config.grid_points, config.seed)
    first = spectral.realization_spectra(config.model, kind, 1, config.seed)[0]
    single = spectral.kernel_density(first, base.grid)
    if matrix_kind == MatrixKind.weight:
        base = spectral.weight_density(base, alpha)
        single = spectral.weight_density(single, alpha)
    spectral.save_density(base, out_path)
    spectral.save_density(single, out_path + '.single')
    return base, single

def design_filter(config_path, degree, out_path):
    """Minimax-LP design for the first configured scheme, saved as JSON.

    Returns:
        FilterPolynomial
    """
    config = ExperimentConfig.from_file(config_path)
    if not _is_int(degree) or not 1 <= degree <= MAX_DEGREE:
        raise ConfigError('--degree: must be an integer in [1, {}]'.format(MAX_DEGREE))
    scheme = config.schemes[0]
    density, alpha = scheme_density(config, scheme)
    _, region = design_region(config, density, alpha)
    p = filterdesign.design_minimax_filter(
        filterdesign.DesignProblem(region, degree, Method.minimax_lp))
    filterdesign.save_filter(p, out_path)
    log.info('Filter d={} for {} (alpha={:.6g}) written to {}'.format(
        degree, scheme, alpha, out_path))
    return p

def validate(config_path):
    """Load and validate a config; ConfigError on failure."""
    config = ExperimentConfig.from_file(config_path)
    log.info('{} is valid: {} model with {} nodes'.format(
        config_path, config.model.kind, config.model.node_count))
    return config
