'''Command line interface.

Usage::

    trafficipa simulate   --config experiment.yaml --seed 3 --out results
    trafficipa grad-check --config experiment.yaml --step 1e-3
    trafficipa optimize   --config experiment.yaml --metric threshold
    trafficipa sweep-l    --config experiment.yaml --metric power
    trafficipa histograms --config experiment.yaml --history results/experiment_history.csv

Exit codes are 0 on success, 2 for configuration errors and 3 for any other failure.
'''

import argparse
import logging
import math
import sys

from .cost import CostFunction, CostMetric, write_records
from .experiment import ExperimentSpec, load_experiment
from .network import ConfigurationError, DelayMode, QUEUES, ThetaVector, queue_index
from .optimizer import OptimizationDivergedError, write_gradient_checks
from .plot import plot_histograms, plot_history, plot_sweep
from .simulator import Simulator
from .util import read_csv, write_csv


EXIT_OK           = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUN_ERROR    = 3

logger = logging.getLogger(__name__)


def _all_costs(cost):
    # The requested cost first, then the other two metrics with the same settings.
    others = [metric for metric in CostMetric if metric != cost.metric]
    return [cost] + [CostFunction(metric, cost.weights, cost.power, cost.thresholds) for metric in others]


def _theta(spec, values):
    if values is None:
        return spec.theta0
    try:
        return ThetaVector(values, spec.theta0.theta_min, spec.theta0.theta_max)
    except ValueError as error:
        raise ConfigurationError('theta', 'initial', str(error))


def _output(spec, suffix):
    return spec.output / f'{spec.name}_{suffix}'


def cmd_simulate(spec, theta = None):
    '''Run one simulation and write the trajectory, the event log, the derivative trace and the costs.

    Returns
    -------
    Trajectory
        Result of the run.
    '''
    theta = _theta(spec, theta)
    simulator = Simulator(spec.network, theta, spec.seed, delay_mode = spec.delay_mode,
                          costs = _all_costs(spec.cost), record_trace = True, **spec.simulator_options())
    trajectory = simulator.run()

    trajectory.to_csv(_output(spec, 'trajectory.csv'))
    trajectory.write_event_log(_output(spec, 'events.csv'))
    if trajectory.trace:
        trajectory.write_trace(_output(spec, 'trace.csv'))
    write_records(_output(spec, 'costs.csv'), [result.as_row(theta, spec.seed) for result in trajectory.results])

    for result in trajectory.results:
        print(result)
    return trajectory


def cmd_grad_check(spec, step_size = 1e-3, theta = None):
    '''Compare IPA with same-seed central finite differences for every GREEN duration.

    Returns
    -------
    list of GradientCheck
        One check per coordinate.
    '''
    theta = _theta(spec, theta)
    optimizer = spec.make_optimizer()
    checks = optimizer.finite_difference(theta, spec.seed, step_size = step_size)
    write_gradient_checks(_output(spec, 'grad_check.csv'), checks)

    print(f'{"theta":>8} {"IPA":>12} {"FD":>12} {"rel. error":>10}  status')
    for check in checks:
        if not check.smooth:
            status = 'non-smooth sample'
        else:
            status = 'ok' if check.passed else 'EXCEEDS TOLERANCE'
        print(f'theta_{check.index + 1:<2} {check.ipa:12.6g} {check.finite_difference:12.6g} {check.relative_error:10.3g}  {status}')
    return checks


def cmd_optimize(spec):
    '''Optimize theta from theta_0, write the history CSV and its plots.

    Returns
    -------
    list of IterationRecord
        All iterations.
    '''
    optimizer = spec.make_optimizer()
    history_path = _output(spec, 'history.csv')
    try:
        history = optimizer.optimize(spec.theta0, progress = True)
    finally:
        optimizer.write_history(history_path)

    if history:
        plot_history(history_path, _output(spec, 'history_cost.svg'), _output(spec, 'history_theta.svg'), title = str(spec.cost))
        first, last = history[0], history[-1]
        print(f'theta_0 = {first.theta}: F = {first.cost_mean:.6g}')
        print(f'theta*  = {last.theta}: F = {last.cost_mean:.6g} after {last.k} iterations')
    return history


def _evaluate(spec, network, theta, delay_mode):
    optimizer = spec.make_optimizer(network = network, delay_mode = delay_mode)
    cost_mean, cost_std, _ = optimizer.estimate_gradient(theta, spec.seeds)
    return cost_mean, cost_std / math.sqrt(len(spec.seeds))


def _optimize_point(spec, network, delay_mode):
    # A point that diverges keeps the iterations it made, and the sweep goes on.
    optimizer = spec.make_optimizer(network = network, delay_mode = delay_mode)
    try:
        return optimizer.optimize(spec.theta0), False
    except OptimizationDivergedError as error:
        logger.warning(f'L={network.segment_length}, delay mode {delay_mode.name}: {error}')
        return error.history, True


def cmd_sweep_l(spec):
    '''Optimize theta for every segment length L with and without the transit delay.

    The optimum found without delay is evaluated on the network with delay, so that both
    curves measure the same physical network. At L = 0 there is no transit and both
    curves come from the model without delay. A point whose optimization diverges reports
    the best iteration it reached and is flagged in the diverged column.

    Returns
    -------
    list of list
        Rows of the sweep CSV.
    '''
    try:
        from tqdm import tqdm
        lengths = tqdm(spec.segment_lengths, desc = 'L sweep', unit = 'L')
    except ImportError:
        lengths = spec.segment_lengths

    rows = []
    for length in lengths:
        if length > 0:
            network = spec.network.replace(segment_length = length)
            modes   = (DelayMode.WITH_DELAY, DelayMode.NO_DELAY)
            evaluation_mode = DelayMode.WITH_DELAY
        else:
            network = spec.network
            modes   = (DelayMode.NO_DELAY, DelayMode.NO_DELAY)
            evaluation_mode = DelayMode.NO_DELAY
        for label, mode in zip(('with_delay', 'no_delay'), modes):
            history, diverged = _optimize_point(spec, network, mode)
            best = min(history, key = lambda record: record.cost_mean) if diverged else history[-1]
            theta_star = best.theta
            cost_mean, cost_se = _evaluate(spec, network, theta_star, evaluation_mode)
            logger.info(f'L={length}, {label}: theta*={theta_star}, F={cost_mean:.6g} +/- {cost_se:.3g}')
            rows.append([length, label, *theta_star.values.tolist(), cost_mean, cost_se, len(spec.seeds), len(history), diverged])

    sweep_path = _output(spec, 'sweep_l.csv')
    write_csv(sweep_path, ['L', 'delay_mode', 'theta_1', 'theta_2', 'theta_3', 'theta_4',
                           'F_mean', 'F_se', 'seeds', 'iterations', 'diverged'], rows)
    plot_sweep(sweep_path, _output(spec, 'sweep_l.svg'), title = str(spec.cost))
    for row in rows:
        print(f'L={row[0]:<6g} {row[1]:<10} F={row[6]:.6g} +/- {row[7]:.3g}' + (' (diverged)' if row[-1] else ''))
    return rows


def _occupancy(spec, theta):
    # Time fractions of every queue content averaged over the evaluation seeds.
    totals = {queue: {} for queue in QUEUES}
    for seed in spec.seeds:
        trajectory = Simulator(spec.network, theta, seed, delay_mode = spec.delay_mode,
                               costs = (spec.cost,), ipa = False, **spec.simulator_options()).run()
        for queue in QUEUES:
            for value, fraction in trajectory.occupancy_distribution(queue).items():
                totals[queue][value] = totals[queue].get(value, 0.0) + fraction / len(spec.seeds)
    return totals


def cmd_histograms(spec, history = None, theta = None):
    '''Queue content distributions at theta_0 and at theta*.

    theta* is taken from ``theta``, else from the last row of the history CSV ``history``,
    else from a new optimization.

    Returns
    -------
    list of list
        Rows of the exceedance CSV (queue, threshold, exceedance and empty fractions at theta_0 and theta*).
    '''
    if theta is not None:
        theta_star = _theta(spec, theta)
    elif history is not None:
        rows = read_csv(history)
        if not rows:
            raise ConfigurationError('histograms', 'history', f'{history} has no iterations')
        theta_star = _theta(spec, [float(rows[-1][f'theta_{j}']) for j in range(1, 5)])
    else:
        theta_star = spec.make_optimizer().optimize(spec.theta0)[-1].theta

    before = _occupancy(spec, spec.theta0)
    after  = _occupancy(spec, theta_star)

    histogram_rows = []
    for queue in QUEUES:
        for value in sorted(set(before[queue]) | set(after[queue])):
            histogram_rows.append([queue, value, before[queue].get(value, 0.0), after[queue].get(value, 0.0)])
    histogram_path = _output(spec, 'histograms.csv')
    write_csv(histogram_path, ['queue', 'value', 'fraction_theta0', 'fraction_theta_star'], histogram_rows)

    thresholds = spec.cost.thresholds
    exceedance_rows = []
    for queue in QUEUES:
        threshold = thresholds[queue_index(queue)]
        exceedance_rows.append([
            queue, threshold,
            sum(fraction for value, fraction in before[queue].items() if value >= threshold),
            sum(fraction for value, fraction in after[queue].items() if value >= threshold),
            before[queue].get(0, 0.0),
            after[queue].get(0, 0.0),
        ])
    write_csv(_output(spec, 'exceedance.csv'),
              ['queue', 'threshold', 'exceedance_theta0', 'exceedance_theta_star', 'empty_theta0', 'empty_theta_star'],
              exceedance_rows)
    plot_histograms(histogram_path, _output(spec, 'histograms.svg'), title = f'theta_0={spec.theta0}, theta*={theta_star}')

    print(f'theta_0 = {spec.theta0}, theta* = {theta_star}')
    for row in exceedance_rows:
        print(f'queue {row[0]:<3} P(x >= {row[1]:g}): {row[2]:.3f} -> {row[3]:.3f}   P(x = 0): {row[4]:.3f} -> {row[5]:.3f}')
    return exceedance_rows


def build_parser():
    '''Argument parser of the ``trafficipa`` command.'''
    common = argparse.ArgumentParser(add_help = False)
    common.add_argument('--config', help = 'YAML configuration file')
    common.add_argument('--seed', type = int, help = 'base seed, overrides experiment.seed')
    common.add_argument('--out', help = 'output directory, overrides experiment.output')
    common.add_argument('--metric', choices = [metric.identifier for metric in CostMetric],
                        help = 'cost metric, overrides cost.metric')
    common.add_argument('--delay-mode', choices = ['on', 'off'], help = 'transit delay, overrides experiment.delay_mode')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action = 'store_true', help = 'show debug messages')
    verbosity.add_argument('-q', '--quiet', action = 'store_true', help = 'show warnings and errors only')

    parser = argparse.ArgumentParser(
        prog = 'trafficipa',
        description = 'Simulate a two-intersection traffic network with transit delay and optimize its GREEN durations with IPA.')
    subparsers = parser.add_subparsers(dest = 'command', metavar = 'command')
    subparsers.required = True

    simulate = subparsers.add_parser('simulate', parents = [common], help = 'run one simulation')
    simulate.add_argument('--theta', type = float, nargs = 4, metavar = 'THETA', help = 'GREEN durations, overrides theta.initial')

    grad_check = subparsers.add_parser('grad-check', parents = [common], help = 'compare IPA with finite differences')
    grad_check.add_argument('--step', type = float, default = 1e-3, help = 'finite difference step in seconds (default: 1e-3)')
    grad_check.add_argument('--theta', type = float, nargs = 4, metavar = 'THETA', help = 'GREEN durations, overrides theta.initial')

    subparsers.add_parser('optimize', parents = [common], help = 'optimize the GREEN durations')
    subparsers.add_parser('sweep-l', parents = [common], help = 'optimized cost against the segment length')

    histograms = subparsers.add_parser('histograms', parents = [common], help = 'queue content distributions before and after optimization')
    histograms.add_argument('--history', help = 'history CSV of a previous optimization')
    histograms.add_argument('--theta', type = float, nargs = 4, metavar = 'THETA', help = 'optimized GREEN durations')
    return parser


def _configure_logging(verbose, quiet):
    package_logger = logging.getLogger('trafficipa')
    if not package_logger.handlers:
        log_handler   = logging.StreamHandler()
        log_formatter = logging.Formatter('%(asctime)s: %(levelname)s - %(message)s')
        log_handler.setFormatter(log_formatter)
        package_logger.addHandler(log_handler)
    if verbose:
        package_logger.setLevel(logging.DEBUG)
    elif quiet:
        package_logger.setLevel(logging.WARNING)
    else:
        package_logger.setLevel(logging.INFO)


def main(argv = None):
    '''Entry point of the ``trafficipa`` command. Returns the exit code.'''
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)

    try:
        spec = load_experiment(args.config) if args.config else ExperimentSpec()
        spec = spec.replace(seed = args.seed, output = args.out, metric = args.metric, delay_mode = args.delay_mode)

        if args.command == 'simulate':
            cmd_simulate(spec, theta = args.theta)
        elif args.command == 'grad-check':
            if args.step <= 0:
                raise ConfigurationError('grad-check', 'step', f'must be positive, but it was {args.step}')
            cmd_grad_check(spec, step_size = args.step, theta = args.theta)
        elif args.command == 'optimize':
            cmd_optimize(spec)
        elif args.command == 'sweep-l':
            cmd_sweep_l(spec)
        elif args.command == 'histograms':
            cmd_histograms(spec, history = args.history, theta = args.theta)
        else:
            assert False, 'code must not reach here'
    except ConfigurationError as error:
        print(f'trafficipa: {error}', file = sys.stderr)
        return EXIT_CONFIG_ERROR
    except OptimizationDivergedError as error:
        print(f'trafficipa: {error}', file = sys.stderr)
        return EXIT_RUN_ERROR
    except Exception as error:
        logger.debug('run failed', exc_info = True)
        print(f'trafficipa: {type(error).__name__}: {error}', file = sys.stderr)
        return EXIT_RUN_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
