'''Vehicle-level discrete event simulation of the two-intersection network.

Vehicles arrive at roads 1, 3 and 4 as Poisson processes and leave a GREEN non-empty road
with a deterministic headway of 1/h. A headway interrupted by RED resumes where it stopped
at the next GREEN, so the content of a road, its count minus the progress of the headway in
service, is continuous and piecewise linear between events. Every vehicle leaving road 1
travels the segment to intersection 2 as part of a flow burst and joins road 2 through the
J_k event chain of :mod:`trafficipa.transit`. The run emits the ordered stream of
:class:`EventRecord`, which drives the IPA engine and the cost accumulators on the fly.

Events at the same time are processed in a fixed order: light switches, departures,
J_k and merge checks, arrivals.
'''

import heapq
import logging

import numpy as np

from .cost import CostAccumulator, CostFunction, CostMetric
from .estimation import RateEstimator
from .events import EventKind, EventRecord
from .ipa import IpaEngine
from .network import (ARRIVAL_ROADS, ConfigurationError, DelayMode, QUEUES, ROADS, QueueState,
                      ThetaVector, generate_arrivals, queue_index)
from .transit import (Inflow, JoinOutcome, ModelViolationError, accumulate_transit,
                      detect_threshold_events, multi_burst_step, on_jk, start_burst)
from .util import write_csv


_PRIORITY_SWITCH    = 0
_PRIORITY_DEPARTURE = 1
_PRIORITY_JOIN      = 2
_PRIORITY_MERGE     = 2
_PRIORITY_ARRIVAL   = 3

_FLUID_TOLERANCE = 1e-9

TRAJECTORY_HEADER = ['time', 'event_type', 'queue_id', 'x1', 'x2', 'x3', 'x4', 'x12']
EVENT_LOG_HEADER  = ['time', 'kind', 'queue', 'burst_n', 'k', 'alpha_obs', 'h_obs', 'x_snapshot']
TRACE_HEADER      = (['time', 'kind', 'queue'] +
                     [f'dx{queue}_dtheta_{j}' for queue in QUEUES for j in range(1, 5)] +
                     [f'tau_prime_{j}' for j in range(1, 5)])


class SimulationError(RuntimeError):
    '''Raised if a run cannot continue.

    Parameters
    ----------
    time : float
        Simulation time at which the problem was detected.
    reason : str
        Description of the problem.
    '''

    def __init__(self, time, reason):
        self.__time   = time
        self.__reason = reason
        msg = f'Simulation failed at t = {time:.6f}: {reason}'
        super().__init__(msg)

    @property
    def time(self):
        '''float: Simulation time of the failure.'''
        return self.__time

    @property
    def reason(self):
        '''str: Description of the failure.'''
        return self.__reason


class Trajectory:
    '''Result of one run.

    Parameters
    ----------
    events : list of EventRecord
        Ordered event log.
    seed : int
        Seed of the run.
    theta : ThetaVector
        GREEN durations of the run.
    delay_mode : DelayMode
        Transit model of the run.
    results : list of CostResult
        Finalized costs.
    counters : dict
        Vehicle counters.
    occupancy : dict
        Per queue, the time spent at every content value.
    final_state : tuple
        Contents of queues 1, 2, 3, 4 and 12 at T.
    trace : list
        Derivative trace rows, empty unless requested.
    horizon : float
        Horizon T.
    '''

    def __init__(self, events, seed, theta, delay_mode, results, counters, occupancy, final_state, trace, horizon):
        self.__events      = events
        self.__seed        = seed
        self.__theta       = theta
        self.__delay_mode  = delay_mode
        self.__results     = results
        self.__counters    = counters
        self.__occupancy   = occupancy
        self.__final_state = final_state
        self.__trace       = trace
        self.__horizon     = horizon

    @property
    def events(self):
        '''list of EventRecord: Ordered event log.'''
        return self.__events

    @property
    def seed(self):
        '''int: Seed of the run.'''
        return self.__seed

    @property
    def theta(self):
        '''ThetaVector: GREEN durations of the run.'''
        return self.__theta

    @property
    def delay_mode(self):
        '''DelayMode: Transit model of the run.'''
        return self.__delay_mode

    @property
    def results(self):
        '''list of CostResult: Finalized costs, one per requested cost function.'''
        return self.__results

    @property
    def counters(self):
        '''dict: Vehicle counters like ``arrivals``, ``departures``, ``blocked``, ``bursts``, ``joins``.'''
        return self.__counters

    @property
    def final_state(self):
        '''tuple: Contents of queues 1, 2, 3, 4 and 12 at T.'''
        return self.__final_state

    @property
    def trace(self):
        '''list: Derivative trace rows.'''
        return self.__trace

    @property
    def horizon(self):
        '''float: Horizon T.'''
        return self.__horizon

    @property
    def samples(self):
        '''list of tuple: (time, x1, x2, x3, x4, x12) right after every event.'''
        return [(event.time, *event.x_after) for event in self.__events]

    def result(self, metric = None):
        '''Finalized cost of the given metric, or the first cost if metric is None.

        Raises
        ------
        KeyError
            If the metric was not accumulated in this run.
        '''
        if metric is None:
            return self.__results[0]
        metric = CostMetric.from_str(metric)
        for result in self.__results:
            if result.metric == metric:
                return result
        raise KeyError(f'metric {metric} was not accumulated in this run')

    def kinds(self):
        '''Sequence of (kind, queue) of all events. Two runs with the same sequence have the same event order.'''
        return [(event.kind.identifier, event.queue) for event in self.__events]

    def occupancy_distribution(self, queue):
        '''Fraction of the horizon spent at every content value of the given queue.

        Returns
        -------
        dict
            Content value to fraction of time, sorted by content.
        '''
        occupancy = self.__occupancy[queue]
        return {value: occupancy[value] / self.__horizon for value in sorted(occupancy)}

    def exceedance_fraction(self, queue, threshold):
        '''Fraction of the horizon during which the queue is at or above the threshold.'''
        return sum(fraction for value, fraction in self.occupancy_distribution(queue).items() if value >= threshold)

    def to_csv(self, path):
        '''Write the trajectory CSV (time, event_type, queue_id, x1..x4, x12).

        Returns
        -------
        pathlib.Path
            Absolute path of the written file.
        '''
        rows = ([f'{event.time:.9f}', event.kind.identifier, event.queue, *event.x_after] for event in self.__events)
        return write_csv(path, TRAJECTORY_HEADER, rows)

    def write_event_log(self, path):
        '''Write the event log CSV (time, kind, queue, burst_n, k, alpha_obs, h_obs, x_snapshot).'''
        rows = ([f'{event.time:.9f}', event.kind.identifier, event.queue,
                 '' if event.burst is None else event.burst,
                 '' if event.k is None else event.k,
                 f'{event.alpha:.6g}', f'{event.h:.6g}',
                 ' '.join(str(value) for value in event.x_after)] for event in self.__events)
        return write_csv(path, EVENT_LOG_HEADER, rows)

    def write_trace(self, path):
        '''Write the per-event derivative trace CSV.'''
        return write_csv(path, TRACE_HEADER, self.__trace)


class Simulator:
    '''Discrete event simulator of one sample path.

    Parameters
    ----------
    config : NetworkConfig
        Network to simulate.
    theta : ThetaVector
        GREEN durations.
    seed : int or numpy.random.SeedSequence
        Seed of all random streams of the run.
    delay_mode : DelayMode
        WITH_DELAY lets vehicles travel the segment as flow bursts. NO_DELAY moves
        every vehicle leaving road 1 to road 2 at once.
    costs : sequence of CostFunction
        Costs accumulated along the run.
    ipa : bool or None
        Run the IPA engine. None enables it unless several bursts may be in transit.
    estimate_rates : bool
        Feed IPA with rates estimated on line. False uses the configured rates.
    estimation_window : float
        Window t_w of the arrival rate estimates.
    strict : bool
        Raise on singular endogenous events instead of using a zero time derivative.
    record_trace : bool
        Keep the per-event derivative trace.

    Raises
    ------
    TypeError
        If theta or delay_mode have a wrong type.
    ConfigurationError
        If the initial clocks do not fit into the GREEN durations.
    '''

    def __init__(self, config, theta, seed = 0, delay_mode = DelayMode.WITH_DELAY,
                 costs = None, ipa = None, estimate_rates = True, estimation_window = 100.0,
                 strict = False, record_trace = False):
        if not isinstance(theta, ThetaVector):
            raise TypeError('theta must be an instance of ThetaVector')
        if not isinstance(delay_mode, DelayMode):
            raise TypeError('delay_mode must be one of DelayMode enum')
        for road in (1, 2):
            if config.initial_clocks[road - 1] >= theta.green(road):
                raise ConfigurationError('network', 'initial_clocks',
                                         f'clock of road {road} must be below theta_{road} = {theta.green(road)}')

        if costs is None:
            costs = (CostFunction(CostMetric.AVERAGE_QUEUE),)
        elif isinstance(costs, CostFunction):
            costs = (costs,)
        costs = tuple(costs)
        threshold_costs = [cost for cost in costs if cost.metric == CostMetric.THRESHOLD]
        self.__thresholds = threshold_costs[0].thresholds if threshold_costs else np.full(5, 25.0)
        if any(not np.array_equal(cost.thresholds, self.__thresholds) for cost in threshold_costs):
            raise ValueError('all threshold costs of a run must use the same thresholds')

        if ipa is None:
            ipa = not config.multi_burst

        self.__logger     = logging.getLogger(__name__)
        self.__config     = config
        self.__theta      = theta
        self.__seed       = seed
        self.__delay_mode = delay_mode
        self.__costs      = costs
        self.__ipa        = bool(ipa)
        self.__estimate_rates    = estimate_rates
        self.__estimation_window = estimation_window
        self.__strict       = strict
        self.__record_trace = record_trace

    @property
    def logger(self):
        '''logging.Logger: Logger of this instance

        It may be useful to change logging settings like log level.

        Examples
        --------
        >>> import logging
        >>> simulator = Simulator(NetworkConfig(), ThetaVector([40, 20, 20, 40]), seed = 1)
        >>> simulator.logger.setLevel(logging.DEBUG)
        '''
        return self.__logger

    @property
    def config(self):
        '''NetworkConfig: Network to simulate.'''
        return self.__config

    @property
    def theta(self):
        '''ThetaVector: GREEN durations.'''
        return self.__theta

    def run(self):
        '''Execute all events over [0, T).

        Returns
        -------
        Trajectory
            Event log, costs and counters of the run.

        Raises
        ------
        SimulationError
            If the event list runs dry before T or a derivative stops being finite.
        ModelViolationError
            If the sample path violates the single-burst transit model while it is enforced.
        UnsupportedModeError
            If IPA is enabled and a second burst enters the segment.
        '''
        self.__reset()
        horizon = self.__config.horizon

        while True:
            if not self.__fel:
                raise SimulationError(self.__time, 'the future event list is empty')
            t, _, _, kind, payload = heapq.heappop(self.__fel)
            if t >= horizon:
                break
            if kind == 'departure':
                road, token = payload
                if token != self.__departure_token[road]:
                    continue
            elif kind == 'join':
                burst, token = payload
                if not burst.active or token != self.__join_token[burst.index]:
                    continue
            elif kind == 'merge':
                if payload != self.__merge_token:
                    continue

            self.__advance(t)
            if kind == 'switch':
                self.__on_switch(t, payload)
            elif kind == 'departure':
                self.__on_departure(t, payload[0])
            elif kind == 'join':
                self.__on_join(t, payload[0])
            elif kind == 'merge':
                self.__on_merge_check(t)
            elif kind == 'arrival':
                self.__on_arrival(t, payload)
            else:
                assert False, 'code must not reach here'

        self.__advance(horizon)
        results = [accumulator.finalize() for accumulator in self.__accumulators]
        trajectory = Trajectory(
            events      = self.__events,
            seed        = self.__seed,
            theta       = self.__theta,
            delay_mode  = self.__delay_mode,
            results     = results,
            counters    = self.__counters,
            occupancy   = self.__occupancy,
            final_state = self.__snapshot(),
            trace       = self.__engine.trace if self.__engine is not None else [],
            horizon     = horizon,
        )
        summary = ', '.join(str(result) for result in results)
        self.__logger.info(f'run seed={self.__seed} theta={self.__theta}: {len(self.__events)} events, {summary}')
        return trajectory

    def __reset(self):
        config = self.__config
        self.__time    = 0.0
        self.__state   = QueueState(config)
        self.__fel     = []
        self.__seq     = 0
        self.__events  = []
        self.__bursts  = []
        self.__burst_count = 0
        self.__departure_token = {road: 0 for road in ROADS}
        self.__join_token  = {}
        self.__merge_token = 0
        # Headway progress of every road, and the time its current service run started.
        self.__progress      = np.zeros(4)
        self.__service_since = {road: None for road in ROADS}
        self.__counters = {
            'arrivals':   {road: 0 for road in ROADS},
            'departures': {road: 0 for road in ROADS},
            'blocked':    {road: 0 for road in ROADS},
            'bursts': 0,
            'joins': 0,
            'merges': 0,
            'appends': 0,
            'transit_overflows': 0,
        }
        self.__occupancy = {queue: {} for queue in QUEUES}

        self.__estimator = RateEstimator(config, self.__estimation_window)
        if self.__ipa:
            self.__engine = IpaEngine(config, self.__delay_mode,
                                      estimator = self.__estimator if self.__estimate_rates else None,
                                      strict = self.__strict, record_trace = self.__record_trace)
        else:
            self.__engine = None
        initial = self.__snapshot()
        self.__accumulators = [CostAccumulator(cost, config.horizon, initial) for cost in self.__costs]
        self.__mark = self.__fluid(0.0)

        streams = np.random.SeedSequence(self.__seed).spawn(len(ARRIVAL_ROADS) + 1)
        self.__arrivals = {}
        for road, stream in zip(ARRIVAL_ROADS, streams):
            self.__arrivals[road] = generate_arrivals(config.arrival_rate(road), config.horizon, stream)
        self.__speed_rng = np.random.default_rng(streams[-1])
        self.__next_arrival = {road: 0 for road in ARRIVAL_ROADS}
        for road in ARRIVAL_ROADS:
            self.__push_next_arrival(road)

        for intersection, road in ((1, 1), (2, 2)):
            remaining = self.__theta.green(road) - config.initial_clocks[road - 1]
            self.__push(remaining, _PRIORITY_SWITCH, 'switch', intersection)
        for road in ROADS:
            if self.__state.green(road) and self.__state.x[road - 1] > 0:
                self.__start_service(road, 0.0)

    # Future event list.

    def __push(self, t, priority, kind, payload):
        self.__seq += 1
        heapq.heappush(self.__fel, (t, priority, self.__seq, kind, payload))

    def __push_next_arrival(self, road):
        index = self.__next_arrival[road]
        times = self.__arrivals[road]
        if index < times.size:
            self.__push(float(times[index]), _PRIORITY_ARRIVAL, 'arrival', road)
            self.__next_arrival[road] = index + 1

    def __start_service(self, road, t):
        # The departure comes after the rest of the headway interrupted by the last RED.
        if self.__service_since[road] is not None:
            return
        h = self.__config.departure_rate(road)
        self.__service_since[road] = t
        self.__departure_token[road] += 1
        if h > 0:
            remaining = (1.0 - self.__progress[road - 1]) / h
            self.__push(t + remaining, _PRIORITY_DEPARTURE, 'departure', (road, self.__departure_token[road]))

    def __stop_service(self, road, t):
        if self.__service_since[road] is None:
            return
        self.__progress[road - 1] = self.__progress_at(road, t)
        self.__service_since[road] = None
        self.__departure_token[road] += 1

    def __progress_at(self, road, t):
        since = self.__service_since[road]
        progress = self.__progress[road - 1]
        if since is not None:
            progress += self.__config.departure_rate(road) * (t - since)
        return min(progress, 1.0)

    def __schedule_join(self, burst):
        token = self.__join_token.get(burst.index, 0) + 1
        self.__join_token[burst.index] = token
        self.__push(burst.next_time, _PRIORITY_JOIN, 'join', (burst, token))

    def __schedule_merge_check(self, t):
        self.__merge_token += 1
        active = [burst for burst in self.__bursts if burst.active]
        times  = [trailer.catch_up_time(leader, t) for leader, trailer in zip(active, active[1:])]
        times  = [time for time in times if time is not None]
        if times:
            self.__push(max(min(times), t), _PRIORITY_MERGE, 'merge', self.__merge_token)

    # State.

    def __x12(self):
        return int(sum(burst.size for burst in self.__bursts if burst.active))

    def __snapshot(self):
        x = self.__state.x
        return (int(x[0]), int(x[1]), int(x[2]), int(x[3]), self.__x12())

    def __fluid(self, t):
        # Counts minus the headway progress, a linear interpolation of every departure.
        # The progress of road 1 is already on its way into queue 12.
        fluid = np.array(self.__snapshot(), dtype = float)
        for road in ROADS:
            fluid[road - 1] -= self.__progress_at(road, t)
        if self.__delay_mode == DelayMode.WITH_DELAY:
            fluid[4] += self.__progress_at(1, t)
        return fluid

    def __fluid_x2(self, t):
        return float(self.__state.x[1]) - self.__progress_at(2, t)

    def __advance(self, t):
        dt = t - self.__time
        if dt < 0:
            raise SimulationError(t, f'time went backwards from {self.__time}')
        snapshot = self.__snapshot()
        if dt > 0:
            x_start = self.__fluid(self.__time)
            x_end   = self.__fluid(t)
            xprime  = self.__engine.derivatives.xprime if self.__engine is not None else np.zeros((5, 4))
            for accumulator in self.__accumulators:
                accumulator.advance(self.__time, t, x_start, x_end, xprime, counts = snapshot)
            for road in ROADS:
                if self.__service_since[road] is not None:
                    self.__estimator.record_exposure(road, dt)
            for queue in QUEUES:
                value = snapshot[queue_index(queue)]
                occupancy = self.__occupancy[queue]
                occupancy[value] = occupancy.get(value, 0.0) + dt
            self.__state.advance_clocks(dt)
            self.__mark = x_end
        self.__time = t

    def __rates(self, queue, t):
        if queue == 12:
            queue = 1
        if queue == 2:
            return self.__road2_inflow(t), self.__rate_h(2, t)
        return self.__rate_alpha(queue, t), self.__rate_h(queue, t)

    def __rate_alpha(self, road, t):
        if self.__estimate_rates:
            return self.__estimator.alpha(road, t)
        return self.__config.arrival_rate(road)

    def __rate_h(self, road, t):
        if self.__estimate_rates:
            return self.__estimator.h(road, t)
        return self.__config.departure_rate(road)

    def __road2_inflow(self, t):
        # Road 2 receives vehicles only at joins, unless road 1 feeds it directly.
        if self.__delay_mode == DelayMode.WITH_DELAY or self.__service_since[1] is None:
            return 0.0
        return self.__rate_h(1, t)

    def __emit(self, kind, t, queue, x_before, **kwargs):
        alpha, h = self.__rates(queue, t)
        record = EventRecord(kind, t, queue, x_before, self.__snapshot(), self.__state.lights,
                             alpha = alpha, h = h, **kwargs)
        self.__events.append(record)
        tau_prime = np.zeros(4)
        if self.__engine is not None:
            tau_prime = self.__engine.process(record)
            if not np.all(np.isfinite(self.__engine.derivatives.xprime)):
                raise SimulationError(t, f'state derivatives are not finite after {record}')
        before, after = self.__mark, self.__fluid(t)
        self.__mark = after
        for accumulator in self.__accumulators:
            accumulator.on_event(record, tau_prime, before, after)
        return record

    def __emit_thresholds(self, t, queue, x_before):
        row  = queue_index(queue)
        kind = detect_threshold_events(t, queue, x_before[row], self.__snapshot()[row], self.__thresholds[row])
        if kind is not None:
            self.__emit(kind, t, queue, x_before)

    # Event handlers.

    def __on_switch(self, t, intersection):
        state = self.__state
        green, red = (1, 3) if intersection == 1 else (2, 4)
        if not state.green(green):
            green, red = red, green

        x_before = self.__snapshot()
        state.lights[green - 1] = False
        state.lights[red - 1]   = True
        state.clocks[green - 1] = 0.0
        state.clocks[red - 1]   = 0.0

        self.__stop_service(green, t)
        if green == 1:
            for burst in self.__bursts:
                burst.receiving = False
        self.__emit(EventKind.G2R, t, green, x_before)

        if state.x[red - 1] > 0:
            self.__start_service(red, t)
        self.__emit(EventKind.R2G, t, red, x_before)

        self.__push(t + self.__theta.green(red), _PRIORITY_SWITCH, 'switch', intersection)

    def __on_arrival(self, t, road):
        self.__push_next_arrival(road)
        state = self.__state
        if state.x[road - 1] >= self.__config.capacity(road):
            self.__counters['blocked'][road] += 1
            self.__logger.debug(f'road {road} is full at t={t:.3f}, arriving vehicle blocked')
            return

        x_before = self.__snapshot()
        state.x[road - 1] += 1
        self.__counters['arrivals'][road] += 1
        self.__estimator.record_arrival(road, t)
        self.__emit(EventKind.ARRIVAL, t, road, x_before)
        if x_before[road - 1] == 0:
            self.__emit(EventKind.START, t, road, x_before)
            if state.green(road):
                self.__start_service(road, t)
        self.__emit_thresholds(t, road, x_before)

    def __on_departure(self, t, road):
        state = self.__state
        x_before = self.__snapshot()
        state.x[road - 1] -= 1
        self.__progress[road - 1] = 0.0
        self.__service_since[road] = None
        self.__counters['departures'][road] += 1
        self.__estimator.record_departure(road, t)

        # The vehicle is in transit, or on road 2 without delay, within the same event.
        entered = start = None
        if road == 1 and self.__delay_mode == DelayMode.WITH_DELAY:
            start = self.__enter_transit(t, x_before)
        elif road == 1:
            entered = self.__enter_road2()
        self.__emit(EventKind.DEPARTURE, t, road, x_before)

        if start is not None:
            self.__emit(EventKind.START, t, 12, x_before, induced = True, **start)
        if road == 1 and self.__delay_mode == DelayMode.WITH_DELAY:
            self.__emit_thresholds(t, 12, x_before)
        elif entered:
            self.__after_road2_entry(t, x_before)

        if state.x[road - 1] == 0:
            self.__emit(EventKind.END, t, road, x_before)
        else:
            self.__start_service(road, t)
        self.__emit_thresholds(t, road, x_before)

    def __enter_road2(self):
        state = self.__state
        if state.x[1] >= self.__config.capacity(2):
            self.__counters['blocked'][2] += 1
            return False
        state.x[1] += 1
        self.__counters['arrivals'][2] += 1
        return True

    def __after_road2_entry(self, t, x_before):
        if x_before[1] == 0:
            self.__emit(EventKind.START, t, 2, x_before, induced = True)
            if self.__state.green(2):
                self.__start_service(2, t)
        self.__emit_thresholds(t, 2, x_before)

    def __enter_transit(self, t, x_before):
        # Returns the attributes of the START event to emit after the departure, if any.
        config   = self.__config
        active   = [burst for burst in self.__bursts if burst.active]
        receiving = next((burst for burst in reversed(active) if burst.receiving), None)

        if x_before[4] >= config.transit_capacity:
            self.__counters['transit_overflows'] += 1
            self.__logger.debug(f'transit segment holds {x_before[4]} vehicles at t={t:.3f}, more than it fits')

        if receiving is not None:
            accumulate_transit(t, receiving, Inflow.SERVICE)
        elif active and not config.multi_burst:
            burst = active[-1]
            if config.strict_single_burst:
                raise ModelViolationError(t, f'road 1 discharges while burst {burst.index} is still in transit')
            burst.receiving = True
            accumulate_transit(t, burst, Inflow.SERVICE)
            self.__counters['appends'] += 1
            self.__logger.debug(f'vehicles appended to burst {burst.index} in transit at t={t:.3f}')
            return dict(burst = burst.index, appended = True, speed = burst.speed)
        else:
            burst = start_burst(t, self.__fluid_x2(t), config, active = active[-1] if active else None,
                                index = self.__burst_count, speed = self.__draw_speed())
            self.__burst_count += 1
            self.__counters['bursts'] += 1
            accumulate_transit(t, burst, Inflow.SERVICE)
            self.__bursts.append(burst)
            self.__logger.debug(f'burst {burst.index} leaves intersection 1 at t={t:.3f}: delta={burst.delta:.3f}')
            self.__schedule_join(burst)
            if len(self.__bursts) > 1:
                self.__schedule_merge_check(t)
            return dict(burst = burst.index, speed = burst.speed)
        return None

    def __draw_speed(self):
        config = self.__config
        if config.burst_speed_spread == 0:
            return config.burst_speed
        spread = config.burst_speed_spread
        return config.burst_speed * self.__speed_rng.uniform(1 - spread, 1 + spread)

    def __on_join(self, t, burst):
        state    = self.__state
        x_before = self.__snapshot()
        outcome  = on_jk(t, burst, self.__fluid_x2(t), self.__config.join_epsilon, self.__config.vehicle_length)

        if outcome == JoinOutcome.RESCHEDULE:
            self.__emit(EventKind.JOIN, t, 2, x_before, burst = burst.index, k = burst.k, speed = burst.speed)
            self.__schedule_join(burst)
            return

        # The burst joins road 2.
        x2 = int(state.x[1])
        room = self.__config.capacity(2) - x2
        joined = burst.size if room >= burst.size else int(max(room, 0))
        if joined < burst.size:
            self.__counters['blocked'][2] += burst.size - joined
        state.x[1] += joined
        self.__counters['arrivals'][2] += joined
        self.__counters['joins'] += 1
        self.__logger.debug(f'burst {burst.index} joins road 2 at t={t:.3f} after {burst.k} J events: {burst.size} vehicles')

        # Bursts behind the one that joins see the queue tail move towards them.
        remaining, merges = multi_burst_step(t, self.__bursts, self.__fluid_x2(t), joined = burst)
        burst.receiving = False
        self.__bursts = remaining

        self.__emit(EventKind.JOIN, t, 2, x_before, burst = burst.index, k = burst.k, final = True,
                    speed = burst.speed)
        # Queue 12 only empties if nothing else is in transit and road 1 is not half way
        # through a headway.
        if self.__fluid(t)[4] <= _FLUID_TOLERANCE:
            self.__emit(EventKind.END, t, 12, x_before, burst = burst.index)
        if x2 == 0 and joined > 0:
            self.__emit(EventKind.START, t, 2, x_before, induced = True)
            if state.green(2):
                self.__start_service(2, t)
        self.__emit_thresholds(t, 2, x_before)
        self.__emit_thresholds(t, 12, x_before)

        for trailer in remaining:
            self.__schedule_join(trailer)
        self.__emit_merges(t, merges, x_before)
        if len(remaining) > 1:
            self.__schedule_merge_check(t)

    def __on_merge_check(self, t):
        remaining, merges = multi_burst_step(t, self.__bursts, self.__fluid_x2(t))
        self.__bursts = remaining
        self.__emit_merges(t, merges, self.__snapshot())
        if len(remaining) > 1:
            self.__schedule_merge_check(t)

    def __emit_merges(self, t, merges, x_before):
        for leader, trailer in merges:
            self.__counters['merges'] += 1
            absorbing = next(burst for burst in self.__bursts if burst.index == trailer)
            self.__schedule_join(absorbing)
            self.__emit(EventKind.MERGE, t, 12, x_before, burst = trailer)
            self.__emit(EventKind.BURST_JOINED, t, 12, x_before, burst = leader)


def run(config, theta, seed = 0, **kwargs):
    '''Simulate one sample path.

    Parameters
    ----------
    config : NetworkConfig
        Network to simulate.
    theta : ThetaVector or sequence of float
        GREEN durations.
    seed : int
        Seed of the run.
    **kwargs
        Other arguments of :class:`Simulator`.

    Returns
    -------
    Trajectory
        Result of the run.

    Examples
    --------
    >>> trajectory = run(NetworkConfig(horizon = 100.0), [40, 20, 20, 40], seed = 1)
    >>> trajectory.kinds() == run(NetworkConfig(horizon = 100.0), [40, 20, 20, 40], seed = 1).kinds()
    True
    '''
    if not isinstance(theta, ThetaVector):
        theta = ThetaVector(theta)
    return Simulator(config, theta, seed, **kwargs).run()
