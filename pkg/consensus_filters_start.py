#!/usr/bin/env python

import argparse
import logging
import sys

from consensus_filter_design import experiment
from consensus_filter_design.errors import ConfigError, NumericalFailure
from consensus_filter_design.logger import set_logger
from consensus_filter_design.spectral import MatrixKind

# Process exit codes.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

def cli(prog=sys.argv[0], args=None):
    """Command line interface.
    """
    parser = argparse.ArgumentParser(prog=prog,
        description='Design and validate consensus acceleration filters.')
    parser.add_argument('--debug', action='store_true',
                        help='Log at DEBUG level')
    commands = parser.add_subparsers(dest='command', metavar='<command>')
    commands.required = True
    run = commands.add_parser('run', help='Run the full experiment')
    run.add_argument('config', help='Experiment config (yaml)')
    density = commands.add_parser('density', help='Write a Monte Carlo spectral density')
    density.add_argument('config', help='Experiment config (yaml)')
    density.add_argument('--matrix', required=True, choices=MatrixKind.all,
                         help='Matrix whose eigenvalue density is estimated')
    density.add_argument('-o', '--output', required=True, help='Density file to write')
    design = commands.add_parser('design', help='Design one minimax filter')
    design.add_argument('config', help='Experiment config (yaml)')
    design.add_argument('--degree', required=True, type=int, help='Filter degree (1-10)')
    design.add_argument('-o', '--output', required=True, help='Filter JSON to write')
    validate = commands.add_parser('validate', help='Check a config file')
    validate.add_argument('config', help='Experiment config (yaml)')
    opts = parser.parse_args(args)
    return main(opts)

def main(opts):
    log = set_logger(log_level=logging.DEBUG if opts.debug else logging.INFO)
    try:
        if opts.command == 'run':
            result = experiment.run_experiment(opts.config)
            log.info('{} rate rows written'.format(len(result.summary)))
        elif opts.command == 'density':
            experiment.emit_density(opts.config, opts.matrix, opts.output)
        elif opts.command == 'design':
            experiment.design_filter(opts.config, opts.degree, opts.output)
        elif opts.command == 'validate':
            experiment.validate(opts.config)
    except ConfigError as err:
        log.error('Config error: {}'.format(err))
        return EXIT_CONFIG
    except NumericalFailure as err:
        log.error('Numerical failure ({}): {}'.format(type(err).__name__, err))
        return EXIT_NUMERICAL
    return EXIT_OK

if(__name__ == '__main__'):
    sys.exit(cli())
