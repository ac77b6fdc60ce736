from unittest import TestCase

import numpy as np

from trafficipa import *


ALL_GREEN_1 = (True, True, False, False)
ROAD_2_RED  = (True, False, False, True)


def record(kind, queue, x_before, x_after = None, lights = ALL_GREEN_1, **kwargs):
    return EventRecord(kind, kwargs.pop('time', 1.0), queue, x_before,
                       x_before if x_after is None else x_after, lights, **kwargs)


class BoundaryUpdateTest(TestCase):
    def test_continuous_dynamics(self):
        np.testing.assert_array_equal(boundary_update(0.3, 0.3, [1, 2, 3, 4], [5, 6, 7, 8]), [1, 2, 3, 4])

    def test_exogenous_event(self):
        np.testing.assert_array_equal(boundary_update(-0.7, 0.45, [1, 2, 3, 4], np.zeros(4)), [1, 2, 3, 4])

    def test_rate_change(self):
        np.testing.assert_allclose(boundary_update(-0.7, 0.45, np.zeros(4), [1, 0, 0, 0]), [-1.15, 0, 0, 0])


class EndogenousTauPrimeTest(TestCase):
    def test_queue_empties(self):
        xprime = np.array([0.4, -0.2, 0.0, 0.1])
        tau_prime = endogenous_tau_prime(1.0, 0.0, 0.41 - 1.2, xprime)
        np.testing.assert_allclose(tau_prime, -xprime / (0.41 - 1.2))

    def test_clock_guard(self):
        rho_prime = np.array([0.5, 0.0, 0.0, 1.0])
        tau_prime = endogenous_tau_prime(1.0, -np.array([0.0, 1.0, 0.0, 0.0]), 1.0, -rho_prime)
        np.testing.assert_allclose(tau_prime, [0.5, 1.0, 0.0, 1.0])

    def test_zero(self):
        np.testing.assert_array_equal(endogenous_tau_prime(1.0, 0.0, -0.5, np.zeros(4)), np.zeros(4))

    def test_singular(self):
        np.testing.assert_array_equal(endogenous_tau_prime(1.0, 0.0, 0.0, np.ones(4)), np.zeros(4))
        with self.assertRaises(SingularEventError) as context:
            endogenous_tau_prime(1.0, 0.0, 0.0, np.ones(4), strict = True, time = 3.0, kind = EventKind.THRESHOLD_UP)
        self.assertEqual(context.exception.time, 3.0)
        self.assertEqual(context.exception.kind, EventKind.THRESHOLD_UP)


class SigmaPrimeTest(TestCase):
    def test_road_2_empty(self):
        sigma0_prime = np.array([1.0, 0.0, 0.5, 0.0])
        np.testing.assert_array_equal(collapsed_sigma_prime(3, 0.0, np.zeros(4), [7, 7, 7, 7], sigma0_prime), sigma0_prime)

    def test_zero(self):
        np.testing.assert_array_equal(collapsed_sigma_prime(1, 0.0, np.zeros(4), np.zeros(4), np.zeros(4)), np.zeros(4))

    def test_value(self):
        np.testing.assert_allclose(collapsed_sigma_prime(2, -1.3, 0.5, 1.0, 1.0), [1.8] * 4)

    def test_speed(self):
        np.testing.assert_allclose(collapsed_sigma_prime(1, 0.0, [2.0, 0, 0, 0], 0.0, 0.0, speed = 2.0), [-1.0, 0, 0, 0])

    def test_vehicle_length(self):
        np.testing.assert_allclose(collapsed_sigma_prime(2, -1.3, 0.5, 1.0, 1.0, vehicle_length = 2.0), [2.6] * 4)
        np.testing.assert_allclose(unrolled_sigma_prime([[0.5, 0, 0, 0]], [0.0], np.zeros(4), vehicle_length = 2.0)[0],
                                   [-1.0, 0, 0, 0])

    def test_invalid_k(self):
        with self.assertRaises(ValueError) as context:
            collapsed_sigma_prime(0, 0.0, 0.0, 0.0, 0.0)

    def test_equals_unrolled_recursion(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            count        = int(rng.integers(1, 11))
            speed        = float(rng.uniform(1.0, 2.0))
            length       = float(rng.uniform(0.5, 1.0))
            sigma0_prime = rng.uniform(-1, 1, size = 4)
            x2_primes    = [rng.uniform(-1, 1, size = 4) for _ in range(count)]
            x2_dots      = [float(-rng.uniform(0, 1)) if rng.random() < 0.7 else 0.0 for _ in range(count)]

            unrolled = unrolled_sigma_prime(x2_primes, x2_dots, sigma0_prime, speed, length)
            previous = sigma0_prime
            for k in range(1, count + 1):
                collapsed = collapsed_sigma_prime(k, x2_dots[k - 1], x2_primes[k - 1], previous, sigma0_prime,
                                                  speed, length)
                np.testing.assert_allclose(collapsed, unrolled[k - 1], rtol = 0, atol = 1e-12)
                previous = unrolled[k - 1]

    def test_unrolled_length_mismatch(self):
        with self.assertRaises(ValueError) as context:
            unrolled_sigma_prime([np.zeros(4)], [], np.zeros(4))


class IpaEngineTest(TestCase):
    def setUp(self):
        self.config = NetworkConfig()
        self.engine = IpaEngine(self.config, DelayMode.WITH_DELAY)

    def test_init_wrong_type(self):
        with self.assertRaises(TypeError) as context:
            IpaEngine(self.config, 'with_delay')

    def test_end_of_road_3(self):
        derivatives = self.engine.derivatives
        derivatives.xprime[2] = [1.0, 2.0, 3.0, 4.0]
        tau_prime = self.engine.process(record(EventKind.END, 3, (0, 0, 1, 0, 0), (0, 0, 0, 0, 0),
                                               lights = (False, False, True, True), alpha = 0.45, h = 1.2))
        np.testing.assert_allclose(tau_prime, np.array([1.0, 2.0, 3.0, 4.0]) / 1.2)
        np.testing.assert_array_equal(self.engine.xprime[2], np.zeros(4))

    def test_departure_time_derivative(self):
        self.engine.derivatives.xprime[2] = [0.0, 0.0, 1.2, 0.0]
        tau_prime = self.engine.process(record(EventKind.DEPARTURE, 3, (0, 0, 4, 0, 0), (0, 0, 3, 0, 0),
                                               lights = (False, False, True, True), alpha = 0.45, h = 1.2))
        np.testing.assert_allclose(tau_prime, [0, 0, 1, 0])
        np.testing.assert_allclose(self.engine.xprime[2], [0, 0, 1.2, 0])
        np.testing.assert_allclose(self.engine.derivatives.cause_prime, [0, 0, 1, 0])

    def test_switch_chain_of_road_1(self):
        tau_prime = self.engine.process(record(EventKind.G2R, 1, (5, 0, 0, 0, 0), lights = (False, True, True, False),
                                               alpha = 0.41, h = 1.2, time = 40.0))
        np.testing.assert_array_equal(tau_prime, [1, 0, 0, 0])
        np.testing.assert_allclose(self.engine.xprime[0], [-1.2, 0, 0, 0])
        np.testing.assert_array_equal(self.engine.derivatives.last_g2r_prime[0], [1, 0, 0, 0])
        # The headway progress frozen by RED is counted in queue 12.
        np.testing.assert_allclose(self.engine.xprime[4], [1.2, 0, 0, 0])

        tau_prime = self.engine.process(record(EventKind.R2G, 1, (9, 0, 0, 0, 0), lights = (True, True, False, False),
                                               alpha = 0.41, h = 1.2, time = 60.0))
        np.testing.assert_array_equal(tau_prime, [1, 0, 1, 0])
        np.testing.assert_allclose(self.engine.xprime[0], [0, 0, 1.2, 0], atol = 1e-12)
        np.testing.assert_allclose(self.engine.xprime[4], [0, 0, -1.2, 0], atol = 1e-12)
        np.testing.assert_array_equal(self.engine.derivatives.zprime[0], [-1, 0, -1, 0])

        tau_prime = self.engine.process(record(EventKind.G2R, 1, (9, 0, 0, 0, 0), lights = (False, True, True, False),
                                               alpha = 0.41, h = 1.2, time = 100.0))
        np.testing.assert_array_equal(tau_prime, [2, 0, 1, 0])

    def test_switch_of_empty_road_leaves_derivative(self):
        self.engine.process(record(EventKind.G2R, 3, (0, 0, 0, 0, 0), lights = (True, True, False, False),
                                   alpha = 0.45, h = 1.2))
        self.engine.process(record(EventKind.R2G, 1, (0, 0, 0, 0, 0), lights = (True, True, False, False),
                                   alpha = 0.41, h = 1.2))
        np.testing.assert_array_equal(self.engine.xprime, np.zeros((5, 4)))

    def test_exogenous_start(self):
        self.engine.derivatives.xprime[2] = [1.0, 0.0, 0.0, 0.0]
        tau_prime = self.engine.process(record(EventKind.START, 3, (0, 0, 0, 0, 0), (0, 0, 1, 0, 0), alpha = 0.45, h = 1.2))
        np.testing.assert_array_equal(tau_prime, np.zeros(4))
        np.testing.assert_array_equal(self.engine.xprime[2], [1, 0, 0, 0])

    def test_end_of_road_2(self):
        self.engine.derivatives.xprime[1] = [0.5, 0.0, 0.0, 0.0]
        tau_prime = self.engine.process(record(EventKind.END, 2, (0, 1, 0, 0, 0), (0, 0, 0, 0, 0), alpha = 0.0, h = 1.3))
        np.testing.assert_allclose(tau_prime, [0.5 / 1.3, 0, 0, 0])
        np.testing.assert_array_equal(self.engine.xprime[1], np.zeros(4))

    def test_join_with_road_2_red(self):
        self.engine.process(record(EventKind.START, 12, (0, 3, 0, 0, 0), (0, 3, 0, 0, 1), lights = ROAD_2_RED,
                                   alpha = 0.41, h = 1.2, burst = 0, speed = 1.0))
        self.assertTrue(self.engine.derivatives.burst_active)
        self.engine.derivatives.xprime[4] = [1.0, 2.0, 3.0, 4.0]

        tau_prime = self.engine.process(record(EventKind.JOIN, 2, (0, 3, 0, 0, 4), (0, 7, 0, 0, 0), lights = ROAD_2_RED,
                                               h = 1.3, burst = 0, k = 1, final = True, time = 20.0))
        np.testing.assert_array_equal(tau_prime, np.zeros(4))
        # A whole number of vehicles joins: no derivative moves from queue 12 to road 2.
        np.testing.assert_array_equal(self.engine.xprime[1], np.zeros(4))
        np.testing.assert_array_equal(self.engine.xprime[4], [1, 2, 3, 4])
        self.assertFalse(self.engine.derivatives.burst_active)

    def test_join_into_empty_green_road_2(self):
        derivatives = self.engine.derivatives
        derivatives.burst_active     = True
        derivatives.sigma0_prime     = np.array([1.0, 0.0, 0.0, 0.0])
        derivatives.sigma_prev_prime = np.array([1.0, 0.0, 0.0, 0.0])
        derivatives.x2_prime_prev    = np.zeros(4)
        derivatives.x2_dot_prev      = 0.0
        tau_prime = self.engine.process(record(EventKind.JOIN, 2, (0, 0, 0, 0, 2), (0, 2, 0, 0, 0), h = 1.3, k = 1, final = True))
        np.testing.assert_allclose(tau_prime, [1, 0, 0, 0])
        np.testing.assert_allclose(self.engine.xprime[1], [1.3, 0, 0, 0])
        np.testing.assert_allclose(derivatives.cause_prime, [1, 0, 0, 0])

    def test_join_chain_uses_vehicle_length(self):
        engine = IpaEngine(NetworkConfig(vehicle_length = 2.0, join_epsilon = 1.0))
        derivatives = engine.derivatives
        derivatives.burst_active  = True
        derivatives.burst_start   = 0.0
        derivatives.x2_prime_prev = np.array([0.5, 0.0, 0.0, 0.0])
        tau_prime = engine.process(record(EventKind.JOIN, 2, (0, 3, 0, 0, 2), lights = ROAD_2_RED, h = 1.3, k = 2))
        np.testing.assert_allclose(tau_prime, [-1.0, 0, 0, 0])
        np.testing.assert_allclose(derivatives.sigma_prev_prime, [-1.0, 0, 0, 0])

    def test_join_without_burst(self):
        with self.assertRaises(ProtocolError) as context:
            self.engine.process(record(EventKind.JOIN, 2, (0, 3, 0, 0, 4), h = 1.3, k = 1))

    def test_end_of_road_1_feeds_transit(self):
        self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 0), (1, 0, 0, 0, 1), alpha = 0.41, h = 1.2, speed = 1.0))
        self.engine.derivatives.xprime[0] = [0.2, 0.0, -0.1, 0.0]
        self.engine.process(record(EventKind.END, 1, (1, 0, 0, 0, 1), (0, 0, 0, 0, 2), alpha = 0.41, h = 1.2))
        np.testing.assert_allclose(self.engine.xprime[4], [0.2, 0.0, -0.1, 0.0])
        np.testing.assert_array_equal(self.engine.xprime[0], np.zeros(4))

    def test_end_of_road_1_without_delay(self):
        engine = IpaEngine(self.config, DelayMode.NO_DELAY)
        engine.derivatives.xprime[0] = [0.2, 0.0, -0.1, 0.0]
        engine.process(record(EventKind.END, 1, (1, 3, 0, 0, 0), (0, 4, 0, 0, 0), alpha = 0.41, h = 1.2))
        np.testing.assert_array_equal(engine.xprime, np.zeros((5, 4)))

    def test_departure_of_road_1_starts_empty_road_2_without_delay(self):
        engine = IpaEngine(self.config, DelayMode.NO_DELAY)
        engine.derivatives.xprime[0] = [0.6, 0.0, 0.0, 0.0]
        tau_prime = engine.process(record(EventKind.DEPARTURE, 1, (3, 0, 0, 0, 0), (2, 1, 0, 0, 0), alpha = 0.41, h = 1.2))
        np.testing.assert_allclose(tau_prime, [0.5, 0, 0, 0])
        np.testing.assert_allclose(engine.xprime[1], [0.65, 0, 0, 0])

        engine.process(record(EventKind.DEPARTURE, 1, (2, 1, 0, 0, 0), (1, 2, 0, 0, 0), alpha = 0.41, h = 1.2))
        np.testing.assert_allclose(engine.xprime[1], [0.65, 0, 0, 0])

    def test_end_of_transit(self):
        self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 0), (1, 0, 0, 0, 1), alpha = 0.41, h = 1.2, speed = 1.0))
        self.engine.derivatives.xprime[4] = [1.0, 1.0, 1.0, 1.0]
        self.engine.process(record(EventKind.END, 12, (0, 0, 0, 0, 3), (0, 3, 0, 0, 0), alpha = 0.41, h = 1.2))
        np.testing.assert_array_equal(self.engine.xprime[4], np.zeros(4))

    def test_transit_start_follows_departure(self):
        self.engine.derivatives.xprime[0] = [1.2, 0.0, 0.0, 0.0]
        self.engine.process(record(EventKind.DEPARTURE, 1, (3, 0, 0, 0, 0), (2, 0, 0, 0, 1), alpha = 0.41, h = 1.2))
        tau_prime = self.engine.process(record(EventKind.START, 12, (3, 0, 0, 0, 0), (2, 0, 0, 0, 1),
                                               alpha = 0.41, h = 1.2, induced = True, speed = 1.0))
        np.testing.assert_allclose(tau_prime, [1, 0, 0, 0])
        np.testing.assert_allclose(self.engine.derivatives.sigma0_prime, [1, 0, 0, 0])
        np.testing.assert_array_equal(self.engine.xprime[4], np.zeros(4))

    def test_second_burst(self):
        self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 0), (1, 0, 0, 0, 1), alpha = 0.41, h = 1.2))
        with self.assertRaises(UnsupportedModeError) as context:
            self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 3), (1, 0, 0, 0, 4), alpha = 0.41, h = 1.2, time = 5.0))
        self.assertEqual(context.exception.time, 5.0)

    def test_appended_start(self):
        self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 0), (1, 0, 0, 0, 1), alpha = 0.41, h = 1.2))
        self.engine.process(record(EventKind.START, 12, (2, 0, 0, 0, 3), (1, 0, 0, 0, 4), alpha = 0.41, h = 1.2, appended = True))
        self.assertTrue(self.engine.derivatives.burst_active)

    def test_merge_is_unsupported(self):
        with self.assertRaises(UnsupportedModeError) as context:
            self.engine.process(record(EventKind.MERGE, 12, (0, 0, 0, 0, 3)))

    def test_wrong_event_set(self):
        with self.assertRaises(ProtocolError) as context:
            self.engine.process(record(EventKind.JOIN, 3, (0, 0, 1, 0, 0)))
        with self.assertRaises(ValueError) as context:
            self.engine.apply_event_phi_i(record(EventKind.END, 2, (0, 1, 0, 0, 0)), 2)

    def test_threshold_crossings_share_the_time_of_their_cause(self):
        lights = (True, True, False, False)
        self.engine.derivatives.xprime[2] = [0.0, 0.0, 2.4, 0.0]
        self.engine.process(record(EventKind.ARRIVAL, 3, (0, 0, 24, 0, 0), (0, 0, 25, 0, 0), lights = lights, alpha = 0.45, h = 1.2))
        tau_prime = self.engine.process(record(EventKind.THRESHOLD_UP, 3, (0, 0, 24, 0, 0), (0, 0, 25, 0, 0),
                                               lights = lights, alpha = 0.45, h = 1.2))
        np.testing.assert_array_equal(tau_prime, np.zeros(4))

        lights = (False, False, True, True)
        self.engine.process(record(EventKind.DEPARTURE, 3, (0, 0, 25, 0, 0), (0, 0, 24, 0, 0), lights = lights, alpha = 0.45, h = 1.2))
        tau_prime = self.engine.process(record(EventKind.THRESHOLD_DOWN, 3, (0, 0, 25, 0, 0), (0, 0, 24, 0, 0),
                                               lights = lights, alpha = 0.45, h = 1.2))
        np.testing.assert_allclose(tau_prime, [0, 0, 2, 0])
        np.testing.assert_array_equal(self.engine.derivatives.rprime, np.zeros((5, 4)))

    def test_trace(self):
        engine = IpaEngine(self.config, record_trace = True)
        engine.process(record(EventKind.ARRIVAL, 3, (0, 0, 0, 0, 0), (0, 0, 1, 0, 0), alpha = 0.45, h = 1.2))
        self.assertEqual(len(engine.trace), 1)
        self.assertEqual(len(engine.trace[0]), 3 + 20 + 4)
        self.assertEqual(engine.trace[0][1], 'Gamma')
