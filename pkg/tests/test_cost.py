import pathlib
import shutil
import tempfile
from unittest import TestCase

import numpy as np

from trafficipa import *


ZERO = np.zeros((5, 4))


def constant(x1):
    return [x1, 0, 0, 0, 0]


class CostFunctionTest(TestCase):
    def test_defaults(self):
        cost = CostFunction()
        self.assertEqual(cost.metric, CostMetric.AVERAGE_QUEUE)
        np.testing.assert_array_equal(cost.weights, np.ones(5))
        np.testing.assert_array_equal(cost.thresholds, np.full(5, 25.0))
        self.assertEqual(cost.power, 2)
        self.assertEqual(cost.effective_power, 1)
        self.assertEqual(str(cost), 'avg')

    def test_power(self):
        cost = CostFunction(CostMetric.POWER, power = 3)
        self.assertEqual(cost.effective_power, 3)
        self.assertEqual(str(cost), 'power (P=3)')

    def test_init_wrong_type(self):
        with self.assertRaises(TypeError) as context:
            CostFunction('avg')
        with self.assertRaises(TypeError) as context:
            CostFunction(CostMetric.POWER, power = 2.5)
        with self.assertRaises(TypeError) as context:
            CostFunction(CostMetric.POWER, power = True)

    def test_init_wrong_value(self):
        with self.assertRaises(ValueError) as context:
            CostFunction(CostMetric.POWER, power = 0)
        with self.assertRaises(ValueError) as context:
            CostFunction(weights = [1, 1, -1, 1, 1])
        with self.assertRaises(ValueError) as context:
            CostFunction(CostMetric.THRESHOLD, thresholds = 0.0)

    def test_metric_from_str(self):
        self.assertEqual(CostMetric.from_str('avg'), CostMetric.AVERAGE_QUEUE)
        self.assertEqual(CostMetric.from_str('threshold'), CostMetric.THRESHOLD)
        self.assertEqual(CostMetric.from_str(CostMetric.POWER), CostMetric.POWER)
        with self.assertRaises(ValueError) as context:
            CostMetric.from_str('median')


class AccumulateCostTest(TestCase):
    def test_constant_queue(self):
        cost = accumulate_cost(0.0, 1000.0, constant(7), constant(7), CostFunction())
        self.assertAlmostEqual(cost.sum() / 1000.0, 7.0)

    def test_constant_queue_squared(self):
        cost = accumulate_cost(0.0, 1000.0, constant(7), constant(7), CostFunction(CostMetric.POWER, power = 2))
        self.assertAlmostEqual(cost.sum() / 1000.0, 49.0)

    def test_saturated_indicator(self):
        cost = accumulate_cost(0.0, 1000.0, constant(30), constant(30), CostFunction(CostMetric.THRESHOLD))
        self.assertAlmostEqual(cost.sum() / 1000.0, 1.0)

    def test_below_threshold(self):
        cost = accumulate_cost(0.0, 1000.0, constant(24), constant(24), CostFunction(CostMetric.THRESHOLD))
        self.assertEqual(cost.sum(), 0.0)

    def test_linear_queue(self):
        cost = accumulate_cost(0.0, 3.0, constant(0), constant(6), CostFunction(CostMetric.POWER, power = 2))
        self.assertAlmostEqual(cost[0], 36.0)
        cost = accumulate_cost(0.0, 3.0, constant(0), constant(6), CostFunction(CostMetric.THRESHOLD, thresholds = 3.0))
        self.assertAlmostEqual(cost[0], 1.5)

    def test_weights(self):
        cost = accumulate_cost(0.0, 10.0, [1, 1, 1, 1, 1], [1, 1, 1, 1, 1], CostFunction(weights = [1, 2, 3, 4, 5]))
        np.testing.assert_allclose(cost, [10, 20, 30, 40, 50])

    def test_reversed_segment(self):
        with self.assertRaises(ValueError) as context:
            accumulate_cost(2.0, 1.0, constant(0), constant(0), CostFunction())


class GradientTest(TestCase):
    def test_power_gradient(self):
        period = NonEmptyPeriod(3, 0.0)
        period.add(0.0, 4.0, 0.0, 6.0, [0.5, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(power_gradient(period, 2), [12, 0, 0, 0])

    def test_power_gradient_average(self):
        period = NonEmptyPeriod(1, 0.0)
        period.add(0.0, 10.0, 3.0, 3.0, [0.0, 1.0, 0.0, 0.0])
        period.add(10.0, 20.0, 2.0, 2.0, [0.0, 2.0, 0.0, 0.0])
        np.testing.assert_allclose(power_gradient(period, 1, weight = 2.0), [0, 60, 0, 0])

    def test_power_gradient_with_jump(self):
        period = NonEmptyPeriod(2, 0.0)
        period.add(0.0, 10.0, 2.0, 2.0, [1.0, 0.0, 0.0, 0.0])
        period.add_jump(10.0, 2.0, 5.0, [0.0, 0.5, 0.0, 0.0])
        np.testing.assert_allclose(power_gradient(period, 2), [40, -10.5, 0, 0])
        np.testing.assert_allclose(power_gradient(period, 1), [10, -1.5, 0, 0])

    def test_threshold_gradient(self):
        interval = ThresholdInterval(2, 10.0, [0.5, 0.0, 0.0, 0.0])
        interval.close(20.0, [2.0, 0.0, 0.0, 0.0])
        self.assertEqual(interval.duration, 10.0)
        np.testing.assert_allclose(threshold_gradient(interval, weight = 2.0), [3.0, 0, 0, 0])

    def test_threshold_gradient_open_interval(self):
        with self.assertRaises(ValueError) as context:
            threshold_gradient(ThresholdInterval(2, 10.0, np.zeros(4)))


class CostAccumulatorTest(TestCase):
    def setUp(self):
        self.tempdir = pathlib.Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def crossing(self, kind, time):
        return EventRecord(kind, time, 1, constant(0), constant(0), (True, True, False, False))

    def test_average_queue(self):
        accumulator = CostAccumulator(CostFunction(), 100.0)
        xprime = ZERO.copy()
        xprime[0] = [1.0, 0.0, 0.0, 0.0]
        accumulator.advance(0.0, 50.0, constant(2), constant(2), xprime)
        accumulator.advance(50.0, 100.0, constant(4), constant(4), xprime)
        result = accumulator.finalize()
        self.assertAlmostEqual(result.value, 3.0)
        np.testing.assert_allclose(result.gradient, [1, 0, 0, 0])
        np.testing.assert_allclose(result.queue_costs, [3, 0, 0, 0, 0])
        self.assertEqual(result.horizon, 100.0)
        self.assertEqual(result.metric, CostMetric.AVERAGE_QUEUE)

    def test_periods(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.POWER, power = 2), 100.0)
        accumulator.advance(0.0, 10.0, constant(0), constant(0), ZERO)
        accumulator.advance(10.0, 20.0, constant(3), constant(3), ZERO)
        accumulator.advance(20.0, 30.0, constant(0), constant(0), ZERO)
        accumulator.advance(30.0, 40.0, constant(1), constant(1), ZERO)
        result = accumulator.finalize()
        periods = result.periods[1]
        self.assertEqual(len(periods), 2)
        self.assertEqual((periods[0].start, periods[0].end), (10.0, 20.0))
        self.assertEqual((periods[1].start, periods[1].end), (30.0, 100.0))
        self.assertEqual(result.periods[12], [])
        self.assertAlmostEqual(result.value, (9 * 10 + 1 * 10) / 100.0)

    def test_threshold(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.THRESHOLD), 100.0)
        accumulator.advance(0.0, 10.0, constant(0), constant(0), ZERO)
        accumulator.on_event(self.crossing(EventKind.THRESHOLD_UP, 10.0), np.array([0.5, 0.0, 0.0, 0.0]))
        accumulator.advance(10.0, 30.0, constant(25), constant(25), ZERO)
        accumulator.on_event(self.crossing(EventKind.THRESHOLD_DOWN, 30.0), np.array([2.0, 0.0, 0.0, 0.0]))
        accumulator.advance(30.0, 100.0, constant(24), constant(24), ZERO)
        result = accumulator.finalize()
        self.assertAlmostEqual(result.value, 0.2)
        np.testing.assert_allclose(result.gradient, [0.015, 0, 0, 0])
        self.assertEqual(len(result.intervals[1]), 1)

    def test_threshold_on_counts(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.THRESHOLD), 100.0)
        accumulator.advance(0.0, 10.0, constant(24.6), constant(24.2), ZERO, counts = constant(25))
        accumulator.advance(10.0, 20.0, constant(24.6), constant(24.2), ZERO)
        self.assertAlmostEqual(accumulator.finalize().value, 0.1)

    def test_jump_at_endogenous_event(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.POWER, power = 2), 100.0, initial_state = constant(2))
        join = EventRecord(EventKind.JOIN, 10.0, 2, constant(2), constant(5), (True, True, False, False), k = 1, final = True)
        accumulator.advance(0.0, 10.0, constant(2), constant(2), ZERO)
        accumulator.on_event(join, np.array([0.0, 0.5, 0.0, 0.0]), before = constant(2), after = constant(5))
        accumulator.advance(10.0, 20.0, constant(5), constant(5), ZERO)
        accumulator.on_event(join, np.zeros(4), before = constant(5), after = constant(9))
        result = accumulator.finalize()
        self.assertAlmostEqual(result.value, 2.9)
        np.testing.assert_allclose(result.gradient, [0, -0.105, 0, 0])
        period = result.periods[1][0]
        self.assertEqual(len(period.jumps), 1)
        np.testing.assert_allclose(power_gradient(period, 2) / 100.0, result.queue_gradients[0])

    def test_no_jump_in_threshold_cost(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.THRESHOLD), 100.0)
        join = EventRecord(EventKind.JOIN, 10.0, 2, constant(2), constant(5), (True, True, False, False), k = 1, final = True)
        accumulator.on_event(join, np.array([0.0, 0.5, 0.0, 0.0]), before = constant(2), after = constant(5))
        np.testing.assert_array_equal(accumulator.finalize().gradient, np.zeros(4))

    def test_threshold_open_at_start_and_end(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.THRESHOLD), 100.0, initial_state = constant(30))
        accumulator.advance(0.0, 100.0, constant(30), constant(30), ZERO)
        result = accumulator.finalize()
        self.assertAlmostEqual(result.value, 1.0)
        np.testing.assert_array_equal(result.gradient, np.zeros(4))
        interval = result.intervals[1][0]
        self.assertEqual((interval.start, interval.end), (0.0, 100.0))

    def test_unmatched_downcrossing(self):
        accumulator = CostAccumulator(CostFunction(CostMetric.THRESHOLD), 100.0)
        with self.assertLogs('trafficipa.cost', level = 'WARNING') as logs:
            accumulator.on_event(self.crossing(EventKind.THRESHOLD_DOWN, 5.0), np.zeros(4))
        self.assertEqual(len(logs.output), 1)

    def test_finalized(self):
        accumulator = CostAccumulator(CostFunction(), 100.0)
        accumulator.finalize()
        with self.assertRaises(RuntimeError) as context:
            accumulator.advance(0.0, 1.0, constant(0), constant(0), ZERO)

    def test_init_wrong_type(self):
        with self.assertRaises(TypeError) as context:
            CostAccumulator('avg', 100.0)
        with self.assertRaises(ValueError) as context:
            CostAccumulator(CostFunction(), 0.0)

    def test_write_records(self):
        accumulator = CostAccumulator(CostFunction(), 100.0)
        accumulator.advance(0.0, 100.0, constant(2), constant(2), ZERO)
        result = accumulator.finalize()
        row = result.as_row(ThetaVector([40, 20, 20, 40]), 7)
        self.assertEqual(len(row), len(RECORD_HEADER))
        path = write_records(self.tempdir / 'costs.csv', [row])
        rows = read_csv(path)
        self.assertEqual(rows[0]['metric'], 'avg')
        self.assertAlmostEqual(float(rows[0]['F']), 2.0)
        self.assertEqual(rows[0]['seed'], '7')
