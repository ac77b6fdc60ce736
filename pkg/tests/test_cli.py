import contextlib
import io
import math
import os
import pathlib
import shutil
import tempfile
from unittest import TestCase, mock, skipIf

from trafficipa import *
from trafficipa.cli import EXIT_CONFIG_ERROR, EXIT_OK, build_parser, cmd_sweep_l, main


CONFIG = '''\
network:
  horizon: 200
optimizer:
  replications: 2
  max_iterations: 2
experiment:
  name: small
  seeds: [1, 2]
  segment_lengths: [0, 35]
'''


class CliTest(TestCase):
    def setUp(self):
        self.tempdir = pathlib.Path(tempfile.mkdtemp())
        self.config  = self.tempdir / 'small.yaml'
        self.config.write_text(CONFIG)
        self.out = self.tempdir / 'results'

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def run_main(self, *args):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main([*args, '--config', str(self.config), '--out', str(self.out), '-q'])
        return code, stdout.getvalue(), stderr.getvalue()

    def test_parser(self):
        args = build_parser().parse_args(['simulate', '--theta', '30', '20', '20', '40', '--delay-mode', 'off'])
        self.assertEqual(args.command, 'simulate')
        self.assertEqual(args.theta, [30.0, 20.0, 20.0, 40.0])
        self.assertEqual(args.delay_mode, 'off')
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as context:
                build_parser().parse_args(['simulate', '--metric', 'median'])
            with self.assertRaises(SystemExit) as context:
                build_parser().parse_args(['simulate', '-v', '-q'])

    def test_simulate(self):
        code, stdout, _ = self.run_main('simulate', '--seed', '3')
        self.assertEqual(code, EXIT_OK)
        for suffix in ('trajectory.csv', 'events.csv', 'trace.csv', 'costs.csv'):
            self.assertTrue((self.out / f'small_{suffix}').is_file(), suffix)
        rows = read_csv(self.out / 'small_costs.csv')
        self.assertEqual([row['metric'] for row in rows], ['avg', 'power', 'threshold'])
        self.assertEqual({row['seed'] for row in rows}, {'3'})
        self.assertEqual(len(stdout.splitlines()), 3)

    def test_simulate_without_delay(self):
        code, _, _ = self.run_main('simulate', '--delay-mode', 'off', '--metric', 'power')
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(self.out / 'small_trajectory.csv')
        self.assertNotIn('12', {row['queue_id'] for row in rows})
        self.assertEqual(read_csv(self.out / 'small_costs.csv')[0]['metric'], 'power')

    def test_configuration_errors(self):
        self.config.write_text('network:\n  length: 35\n')
        code, _, stderr = self.run_main('simulate')
        self.assertEqual(code, EXIT_CONFIG_ERROR)
        self.assertIn('length', stderr)

        self.config.write_text(CONFIG)
        code, _, _ = self.run_main('simulate', '--theta', '5', '20', '20', '40')
        self.assertEqual(code, EXIT_CONFIG_ERROR)
        code, _, _ = self.run_main('grad-check', '--step', '0')
        self.assertEqual(code, EXIT_CONFIG_ERROR)

        self.config.unlink()
        code, _, _ = self.run_main('simulate')
        self.assertEqual(code, EXIT_CONFIG_ERROR)

    def test_grad_check(self):
        code, stdout, _ = self.run_main('grad-check', '--step', '1e-3')
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(self.out / 'small_grad_check.csv')
        self.assertEqual([row['theta_index'] for row in rows], ['1', '2', '3', '4'])
        self.assertEqual(len(stdout.splitlines()), 5)

    def test_optimize(self):
        code, _, _ = self.run_main('optimize')
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(self.out / 'small_history.csv')
        self.assertIn(len(rows), (1, 2))
        self.assertEqual(rows[0]['k'], '1')
        self.assertTrue((self.out / 'small_history_cost.svg').is_file())
        self.assertTrue((self.out / 'small_history_theta.svg').is_file())

    def test_sweep_l(self):
        code, _, _ = self.run_main('sweep-l')
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(self.out / 'small_sweep_l.csv')
        self.assertEqual([(row['L'], row['delay_mode']) for row in rows],
                         [('0.0', 'with_delay'), ('0.0', 'no_delay'), ('35.0', 'with_delay'), ('35.0', 'no_delay')])
        self.assertEqual({row['seeds'] for row in rows}, {'2'})
        self.assertTrue((self.out / 'small_sweep_l.svg').is_file())
        self.assertEqual({row['diverged'] for row in rows}, {'False'})

    def test_sweep_l_with_diverging_point(self):
        theta0 = ThetaVector([40, 20, 20, 40])
        calls  = []

        def optimize(theta, progress = False):
            calls.append(theta)
            history = [IterationRecord(1, theta0, 2.0, 0.1, [0, 0, 0, 0], 5.0)]
            if len(calls) == 3:
                history.append(IterationRecord(2, ThetaVector([45, 20, 15, 40]), 50.0, 1.0, [0, 0, 0, 0], 3.3))
                raise OptimizationDivergedError(2, 50.0, 2.0, history)
            return history

        with mock.patch.object(Optimizer, 'optimize', side_effect = optimize):
            code, stdout, _ = self.run_main('sweep-l')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(calls), 4)
        rows = read_csv(self.out / 'small_sweep_l.csv')
        self.assertEqual([row['diverged'] for row in rows], ['False', 'False', 'True', 'False'])
        self.assertEqual(rows[2]['L'], '35.0')
        self.assertEqual(rows[2]['delay_mode'], 'with_delay')
        self.assertEqual(rows[2]['iterations'], '2')
        self.assertEqual([float(rows[2][f'theta_{j}']) for j in range(1, 5)], [40.0, 20.0, 20.0, 40.0])
        self.assertIn('(diverged)', stdout)

    def test_histograms(self):
        code, _, _ = self.run_main('histograms', '--theta', '30', '20', '30', '40')
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(self.out / 'small_exceedance.csv')
        self.assertEqual([row['queue'] for row in rows], ['1', '2', '3', '4', '12'])
        for row in rows:
            self.assertLessEqual(float(row['exceedance_theta0']), 1.0)
            self.assertLessEqual(float(row['empty_theta_star']), 1.0 + 1e-9)
        self.assertTrue((self.out / 'small_histograms.csv').is_file())
        self.assertTrue((self.out / 'small_histograms.svg').is_file())

    def test_histograms_from_history(self):
        history = self.tempdir / 'history.csv'
        history.write_text(','.join(HISTORY_HEADER) + '\n1,35,25,20,40,1.0,0.1,0,0,0,0,5\n')
        code, stdout, _ = self.run_main('histograms', '--history', str(history))
        self.assertEqual(code, EXIT_OK)
        self.assertIn('theta* = [35, 25, 20, 40]', stdout)

    def test_histograms_from_empty_history(self):
        history = self.tempdir / 'history.csv'
        history.write_text(','.join(HISTORY_HEADER) + '\n')
        code, _, _ = self.run_main('histograms', '--history', str(history))
        self.assertEqual(code, EXIT_CONFIG_ERROR)


class LongSweepTest(TestCase):
    skip = 'TRAFFICIPA_LONG_TESTS' not in os.environ
    skip_reason = 'Environment variable TRAFFICIPA_LONG_TESTS is not defined'

    def setUp(self):
        self.tempdir = pathlib.Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def sweep(self, cost):
        spec = experiment_from_dict({
            'cost': cost,
            'optimizer': {'replications': 10, 'max_iterations': 30, 'workers': 4},
            'experiment': {'name': cost['metric'], 'seeds': 10, 'segment_lengths': [0, 35, 70, 100],
                           'output': str(self.tempdir)},
        })
        with contextlib.redirect_stdout(io.StringIO()):
            rows = cmd_sweep_l(spec)
        by_length = {}
        for length, label, *_, cost_mean, cost_se, seeds, iterations, diverged in rows:
            by_length.setdefault(length, {})[label] = (cost_mean, cost_se)
        return by_length

    @skipIf(skip, skip_reason)
    def test_average_queue_ignores_delay(self):
        for length, costs in self.sweep({'metric': 'avg'}).items():
            (with_delay, with_se), (no_delay, no_se) = costs['with_delay'], costs['no_delay']
            self.assertLessEqual(abs(with_delay - no_delay), 2 * math.hypot(with_se, no_se), f'L={length}')

    @skipIf(skip, skip_reason)
    def test_delay_aware_optimum_is_better(self):
        for cost in ({'metric': 'power', 'power': 2}, {'metric': 'threshold', 'thresholds': 25}):
            sweep = self.sweep(cost)
            gaps  = {}
            for length, costs in sweep.items():
                gaps[length] = costs['no_delay'][0] - costs['with_delay'][0]
                self.assertGreaterEqual(gaps[length], 0.0, f'{cost["metric"]} L={length}')
            self.assertGreater(gaps[max(gaps)], gaps[min(gaps)], cost['metric'])
