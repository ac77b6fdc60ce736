'''Static description of the two-intersection network and its exogenous inputs.'''

import math
from enum import Enum

import numpy as np


ROADS = (1, 2, 3, 4)
'''tuple: Identifiers of the four roads. Roads 1 and 3 meet at intersection 1, roads 2 and 4 at intersection 2.'''

QUEUES = (1, 2, 3, 4, 12)
'''tuple: Identifiers of all queues. Queue 12 is the transit segment between intersection 1 and 2.'''

ARRIVAL_ROADS = (1, 3, 4)
'''tuple: Roads fed by exogenous arrivals. Road 2 is fed only by road 1.'''

PERPENDICULAR = {1: 3, 3: 1, 2: 4, 4: 2}
INTERSECTION = {1: 1, 3: 1, 2: 2, 4: 2}


def queue_index(queue):
    '''Row index of a queue in the 5-element state vectors and 5x4 derivative matrices.

    Examples
    --------
    >>> queue_index(1), queue_index(4), queue_index(12)
    (0, 3, 4)
    '''
    if queue == 12:
        return 4
    if queue in ROADS:
        return queue - 1
    raise ValueError(f'queue must be one of {QUEUES}, but it was {queue}')


class ConfigurationError(ValueError):
    '''Raised if a configuration value is missing, malformed or violates a model invariant.

    Parameters
    ----------
    section : str
        Configuration section like 'network' or 'theta'.
    key : str
        Offending key within the section.
    reason : str
        Human readable explanation.
    '''

    def __init__(self, section, key, reason):
        self.__section = section
        self.__key     = key
        self.__reason  = reason
        msg = f'Invalid configuration [{section}] {key}: {reason}'
        super().__init__(msg)

    @property
    def section(self):
        '''str: Configuration section that contains the offending key.'''
        return self.__section

    @property
    def key(self):
        '''str: Offending key.'''
        return self.__key

    @property
    def reason(self):
        '''str: Why the value was rejected.'''
        return self.__reason


def _as_rates(values, length, key):
    try:
        rates = tuple(float(value) for value in values)
    except (TypeError, ValueError):
        raise ConfigurationError('network', key, f'must be a sequence of {length} numbers')
    if len(rates) != length:
        raise ConfigurationError('network', key, f'must have {length} elements, but it had {len(rates)}')
    if any(not math.isfinite(rate) or rate < 0 for rate in rates):
        raise ConfigurationError('network', key, 'all rates must be finite and non-negative')
    return rates


class NetworkConfig:
    '''Physical parameters of the two-intersection network.

    All departures from road 1 enter the transit segment of length ``segment_length`` and
    eventually join road 2. Roads 2, 3 and 4 discharge out of the system. Overload
    (arrival rate above departure rate) is allowed.

    Parameters
    ----------
    arrival_rates : sequence of float
        Poisson arrival rates of roads 1, 3 and 4 in vehicles per second.
    departure_rates : sequence of float
        Departure rates of roads 1 to 4 during GREEN in vehicles per second.
    segment_length : float
        Distance L between intersection 1 and intersection 2.
    vehicle_length : float
        Length L_v occupied by one queued vehicle.
    burst_speed : float
        Speed v1 of a flow burst in transit.
    join_epsilon : float or None
        A burst joins road 2 when it is within this distance of the queue tail.
        None means half a vehicle length.
    horizon : float
        Observation horizon T in seconds.
    queue_capacities : sequence of float or None
        Capacity of roads 1 to 4 in vehicles. None, or None elements, mean unbounded.
    initial_queues : sequence of int
        Queue contents of roads 1 to 4 at t = 0.
    initial_clocks : sequence of float
        Elapsed GREEN time of road 1 and road 2 at t = 0. Both intersections start with
        road 1 and road 2 in GREEN.
    burst_speed_spread : float
        Relative spread s of burst speeds. Each burst draws its speed uniformly from
        [v1 (1 - s), v1 (1 + s)]. Zero keeps every burst at v1.
    multi_burst : bool
        Allow several bursts in transit at the same time. IPA is not available in this mode.
    strict_single_burst : bool
        Raise :class:`~trafficipa.ModelViolationError` instead of appending to the active burst
        when road 1 resumes discharging while a burst is still in transit.

    Raises
    ------
    ConfigurationError
        If any value violates the invariants of the network.
    '''

    def __init__(
            self,
            arrival_rates = (0.41, 0.45, 0.32),
            departure_rates = (1.2, 1.3, 1.2, 1.1),
            segment_length = 35.0,
            vehicle_length = 1.0,
            burst_speed = 1.0,
            join_epsilon = None,
            horizon = 1000.0,
            queue_capacities = None,
            initial_queues = (0, 0, 0, 0),
            initial_clocks = (0.0, 0.0),
            burst_speed_spread = 0.0,
            multi_burst = False,
            strict_single_burst = False):
        self.__kwargs = dict(
            arrival_rates = arrival_rates,
            departure_rates = departure_rates,
            segment_length = segment_length,
            vehicle_length = vehicle_length,
            burst_speed = burst_speed,
            join_epsilon = join_epsilon,
            horizon = horizon,
            queue_capacities = queue_capacities,
            initial_queues = initial_queues,
            initial_clocks = initial_clocks,
            burst_speed_spread = burst_speed_spread,
            multi_burst = multi_burst,
            strict_single_burst = strict_single_burst,
        )

        self.__arrival_rates   = _as_rates(arrival_rates, 3, 'arrival_rates')
        self.__departure_rates = _as_rates(departure_rates, 4, 'departure_rates')

        for key in ('segment_length', 'vehicle_length', 'burst_speed', 'horizon'):
            value = self.__kwargs[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigurationError('network', key, 'must be a number')
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError('network', key, f'must be positive, but it was {value}')

        self.__segment_length = float(segment_length)
        self.__vehicle_length = float(vehicle_length)
        self.__burst_speed    = float(burst_speed)
        self.__horizon        = float(horizon)

        if join_epsilon is None:
            join_epsilon = self.__vehicle_length / 2
        if not isinstance(join_epsilon, (int, float)) or isinstance(join_epsilon, bool):
            raise ConfigurationError('network', 'join_epsilon', 'must be a number')
        if not 0 < join_epsilon <= self.__segment_length:
            raise ConfigurationError('network', 'join_epsilon',
                                     f'must be in (0, {self.__segment_length}], but it was {join_epsilon}')
        self.__join_epsilon = float(join_epsilon)

        if queue_capacities is None:
            queue_capacities = (None,) * 4
        if len(queue_capacities) != 4:
            raise ConfigurationError('network', 'queue_capacities', 'must have 4 elements')
        capacities = []
        for capacity in queue_capacities:
            if capacity is None:
                capacities.append(math.inf)
            elif isinstance(capacity, (int, float)) and capacity > 0:
                capacities.append(float(capacity))
            else:
                raise ConfigurationError('network', 'queue_capacities',
                                         f'capacities must be positive or None, but one was {capacity}')
        self.__queue_capacities = tuple(capacities)

        if len(initial_queues) != 4:
            raise ConfigurationError('network', 'initial_queues', 'must have 4 elements')
        for road, content in zip(ROADS, initial_queues):
            if not isinstance(content, int) or isinstance(content, bool) or content < 0:
                raise ConfigurationError('network', 'initial_queues',
                                         f'contents must be non-negative integers, but x{road}(0) was {content}')
            if content > self.__queue_capacities[road - 1]:
                raise ConfigurationError('network', 'initial_queues', f'x{road}(0) exceeds the capacity of road {road}')
        self.__initial_queues = tuple(initial_queues)

        if len(initial_clocks) != 2 or any(clock < 0 for clock in initial_clocks):
            raise ConfigurationError('network', 'initial_clocks', 'must be two non-negative numbers')
        self.__initial_clocks = tuple(float(clock) for clock in initial_clocks)

        if not 0 <= burst_speed_spread < 1:
            raise ConfigurationError('network', 'burst_speed_spread', f'must be in [0, 1), but it was {burst_speed_spread}')
        self.__burst_speed_spread = float(burst_speed_spread)

        self.__multi_burst         = bool(multi_burst)
        self.__strict_single_burst = bool(strict_single_burst)

    @property
    def arrival_rates(self):
        '''tuple of float: Arrival rates of roads 1, 3 and 4.'''
        return self.__arrival_rates

    @property
    def departure_rates(self):
        '''tuple of float: Departure rates of roads 1 to 4.'''
        return self.__departure_rates

    @property
    def segment_length(self):
        '''float: Distance L between the two intersections.'''
        return self.__segment_length

    @property
    def vehicle_length(self):
        '''float: Length L_v of one queued vehicle.'''
        return self.__vehicle_length

    @property
    def burst_speed(self):
        '''float: Nominal burst speed v1.'''
        return self.__burst_speed

    @property
    def join_epsilon(self):
        '''float: Joining distance tolerance.'''
        return self.__join_epsilon

    @property
    def horizon(self):
        '''float: Observation horizon T.'''
        return self.__horizon

    @property
    def queue_capacities(self):
        '''tuple of float: Capacities of roads 1 to 4, ``math.inf`` if unbounded.'''
        return self.__queue_capacities

    @property
    def initial_queues(self):
        '''tuple of int: Queue contents of roads 1 to 4 at t = 0.'''
        return self.__initial_queues

    @property
    def initial_clocks(self):
        '''tuple of float: Elapsed GREEN time of road 1 and road 2 at t = 0.'''
        return self.__initial_clocks

    @property
    def burst_speed_spread(self):
        '''float: Relative spread of burst speeds.'''
        return self.__burst_speed_spread

    @property
    def multi_burst(self):
        '''bool: True if several bursts may be in transit at the same time.'''
        return self.__multi_burst

    @property
    def strict_single_burst(self):
        '''bool: True if appending to an active burst is a model violation.'''
        return self.__strict_single_burst

    @property
    def transit_capacity(self):
        '''int: Number of vehicles that physically fit in the transit segment.'''
        return int(math.floor(self.__segment_length / self.__vehicle_length))

    def arrival_rate(self, road):
        '''Exogenous arrival rate of the given road. Zero for road 2.'''
        if road == 2:
            return 0.0
        return self.__arrival_rates[ARRIVAL_ROADS.index(road)]

    def departure_rate(self, road):
        '''Departure rate of the given road during GREEN.'''
        return self.__departure_rates[road - 1]

    def capacity(self, road):
        '''Capacity of the given road in vehicles.'''
        return self.__queue_capacities[road - 1]

    def replace(self, **changes):
        '''Return a copy of this configuration with some parameters replaced.

        Examples
        --------
        >>> config = NetworkConfig()
        >>> config.replace(segment_length = 100.0).segment_length
        100.0
        '''
        kwargs = dict(self.__kwargs)
        kwargs.update(changes)
        if 'segment_length' in changes and 'join_epsilon' not in changes and kwargs['join_epsilon'] is not None:
            kwargs['join_epsilon'] = min(kwargs['join_epsilon'], kwargs['segment_length'])
        return NetworkConfig(**kwargs)

    def __str__(self):
        return (f'arrival_rates: {self.__arrival_rates}, departure_rates: {self.__departure_rates}, '
                f'L: {self.__segment_length}, T: {self.__horizon}')


class ThetaVector:
    '''GREEN durations of the four roads with their box constraints.

    Parameters
    ----------
    values : sequence of float
        GREEN durations theta_1 to theta_4 in seconds.
    theta_min : float or sequence of float
        Lower bound of every coordinate.
    theta_max : float or sequence of float
        Upper bound of every coordinate.

    Raises
    ------
    ValueError
        If a value is not strictly positive or lies outside of its bounds.
    '''

    def __init__(self, values, theta_min = 10.0, theta_max = 50.0):
        values    = np.asarray(values, dtype = float)
        theta_min = np.broadcast_to(np.asarray(theta_min, dtype = float), (4,)).copy()
        theta_max = np.broadcast_to(np.asarray(theta_max, dtype = float), (4,)).copy()

        if values.shape != (4,):
            raise ValueError(f'values must have 4 elements, but its shape was {values.shape}')
        if not np.all(np.isfinite(values)):
            raise ValueError('values must be finite')
        if np.any(theta_min <= 0):
            raise ValueError('theta_min must be strictly positive')
        if np.any(theta_min > theta_max):
            raise ValueError('theta_min must not exceed theta_max')
        if np.any(values < theta_min) or np.any(values > theta_max):
            raise ValueError(f'values {values.tolist()} must be within [{theta_min.tolist()}, {theta_max.tolist()}]')

        self.__values    = values
        self.__theta_min = theta_min
        self.__theta_max = theta_max

    @property
    def values(self):
        '''numpy.ndarray: Copy of theta_1 to theta_4.'''
        return self.__values.copy()

    @property
    def theta_min(self):
        '''numpy.ndarray: Lower bounds.'''
        return self.__theta_min.copy()

    @property
    def theta_max(self):
        '''numpy.ndarray: Upper bounds.'''
        return self.__theta_max.copy()

    def green(self, road):
        '''GREEN duration of the given road (1 to 4).'''
        return float(self.__values[road - 1])

    def cycle(self, intersection):
        '''Cycle length of intersection 1 (theta_1 + theta_3) or 2 (theta_2 + theta_4).'''
        if intersection == 1:
            return float(self.__values[0] + self.__values[2])
        if intersection == 2:
            return float(self.__values[1] + self.__values[3])
        raise ValueError('intersection must be 1 or 2')

    def clip(self, values):
        '''Project the given values onto the box and return a new ThetaVector.'''
        clipped = np.clip(np.asarray(values, dtype = float), self.__theta_min, self.__theta_max)
        return ThetaVector(clipped, self.__theta_min, self.__theta_max)

    def perturbed(self, index, delta):
        '''Return a copy with ``delta`` added to the coordinate ``index`` (0-based).

        The bounds are widened when the perturbed value leaves the box, so that finite
        differences can be taken at the boundary.
        '''
        values = self.values
        values[index] += delta
        return ThetaVector(values, np.minimum(self.__theta_min, values), np.maximum(self.__theta_max, values))

    def __getitem__(self, index):
        return float(self.__values[index])

    def __len__(self):
        return 4

    def __eq__(self, obj):
        if not isinstance(obj, ThetaVector):
            return False
        return (np.array_equal(self.__values, obj.__values) and
                np.array_equal(self.__theta_min, obj.__theta_min) and
                np.array_equal(self.__theta_max, obj.__theta_max))

    def __hash__(self):
        return hash(tuple(self.__values.tolist()))

    def __str__(self):
        return '[' + ', '.join(f'{value:.4g}' for value in self.__values) + ']'


class QueueState:
    '''Mutable state of the four road queues during one run.

    Parameters
    ----------
    config : NetworkConfig
        Network that provides the initial contents and clocks.

    Attributes
    ----------
    x : numpy.ndarray
        Vehicles queued on roads 1 to 4.
    lights : numpy.ndarray
        GREEN (True) or RED (False) per road.
    clocks : numpy.ndarray
        Seconds since the last R2G of each road while it is GREEN, zero while RED.
    '''

    def __init__(self, config):
        self.x      = np.array(config.initial_queues, dtype = np.int64)
        self.lights = np.array([True, True, False, False])
        self.clocks = np.array([config.initial_clocks[0], config.initial_clocks[1], 0.0, 0.0])

    def green(self, road):
        return bool(self.lights[road - 1])

    def advance_clocks(self, dt):
        self.clocks[self.lights] += dt


def light_phase(t, theta, initial_clocks = (0.0, 0.0)):
    '''Light states of the four roads at time t.

    Each intersection alternates GREEN between its two perpendicular roads. Intersection 1
    gives GREEN to road 1 for theta_1 and then to road 3 for theta_3, intersection 2 to
    road 2 for theta_2 and then to road 4 for theta_4. There is no yellow or all-red interval.

    Parameters
    ----------
    t : float
        Time in seconds, t >= 0.
    theta : ThetaVector
        GREEN durations.
    initial_clocks : sequence of float
        Elapsed GREEN time of road 1 and road 2 at t = 0.

    Returns
    -------
    tuple of int
        (G1, G2, G3, G4) where 1 means GREEN.

    Examples
    --------
    >>> theta = ThetaVector([40, 20, 20, 40])
    >>> light_phase(10, theta)
    (1, 1, 0, 0)
    >>> light_phase(45, theta)
    (0, 0, 1, 1)
    '''
    if t < 0:
        raise ValueError(f't must be non-negative, but it was {t}')

    phase_1 = math.fmod(t + initial_clocks[0], theta.cycle(1))
    phase_2 = math.fmod(t + initial_clocks[1], theta.cycle(2))
    g1 = 1 if phase_1 < theta.green(1) else 0
    g2 = 1 if phase_2 < theta.green(2) else 0
    return (g1, g2, 1 - g1, 1 - g2)


def generate_arrivals(rate, horizon, seed):
    '''Poisson arrival times over [0, horizon).

    Parameters
    ----------
    rate : float
        Arrival rate in vehicles per second.
    horizon : float
        Length of the observation window in seconds.
    seed : int, numpy.random.SeedSequence or numpy.random.Generator
        Random seed. The same seed always gives the same sequence.

    Returns
    -------
    numpy.ndarray
        Strictly increasing arrival times.

    Raises
    ------
    ConfigurationError
        If the rate is negative or the horizon is not positive.

    Examples
    --------
    >>> generate_arrivals(0.0, 1000.0, seed = 1).size
    0
    '''
    if not math.isfinite(rate) or rate < 0:
        raise ConfigurationError('network', 'arrival_rates', f'rate must be non-negative, but it was {rate}')
    if not math.isfinite(horizon) or horizon <= 0:
        raise ConfigurationError('network', 'horizon', f'horizon must be positive, but it was {horizon}')
    if rate == 0:
        return np.empty(0)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    # Draw in chunks sized for the expected count plus a few standard deviations.
    expected = rate * horizon
    chunk    = int(expected + 5 * math.sqrt(expected) + 10)
    times    = np.cumsum(rng.exponential(1 / rate, size = chunk))
    while times[-1] < horizon:
        more  = times[-1] + np.cumsum(rng.exponential(1 / rate, size = chunk))
        times = np.concatenate((times, more))
    return times[times < horizon]


class DelayMode(Enum):
    '''How vehicles leaving road 1 reach road 2.'''

    WITH_DELAY = 'vehicles travel the segment as flow bursts and join road 2 through J_k events'
    NO_DELAY   = 'vehicles leaving road 1 join road 2 instantly'

    @classmethod
    def from_flag(cls, flag):
        '''Convert a command line or configuration flag ('on', 'off', 'with_delay', 'no_delay').'''
        if isinstance(flag, DelayMode):
            return flag
        normalized = str(flag).strip().lower()
        if normalized in ('on', 'with_delay', 'true'):
            return cls.WITH_DELAY
        if normalized in ('off', 'no_delay', 'false'):
            return cls.NO_DELAY
        raise ConfigurationError('experiment', 'delay_mode', f'"{flag}" is neither on/with_delay nor off/no_delay')
