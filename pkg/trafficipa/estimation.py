'''On-line estimation of the arrival and departure rates used by IPA at event times.

Only data observable along the sample path are used: arrival times, departure times and
the time during which a road is GREEN and non-empty.
'''

import bisect
import logging

from .network import ROADS


logger = logging.getLogger(__name__)


def estimate_alpha(arrival_times, t, window = 100.0):
    '''Arrival rate estimate N_a / t_w over the sliding window (t - t_w, t].

    Before the first full window (t < t_w) the arrivals over (0, t] are divided by t.

    Parameters
    ----------
    arrival_times : sorted sequence of float
        Observed arrival times.
    t : float
        Time of the estimate.
    window : float
        Window length t_w.

    Returns
    -------
    float
        Estimated arrival rate, zero before any time has elapsed.

    Examples
    --------
    >>> estimate_alpha([float(i) for i in range(1, 42)], 100.0)
    0.41
    '''
    if window <= 0:
        raise ValueError(f'window must be positive, but it was {window}')
    if t <= 0:
        return 0.0

    upper = bisect.bisect_right(arrival_times, t)
    if t < window:
        return upper / t
    lower = bisect.bisect_right(arrival_times, t - window)
    return (upper - lower) / window


def estimate_h(departures, exposure, fallback):
    '''Departure rate estimate: departures over the GREEN non-empty time that served them.

    Parameters
    ----------
    departures : int
        Departures counted while GREEN and non-empty.
    exposure : float
        Cumulative GREEN and non-empty time.
    fallback : float
        Configured departure rate returned when there is no exposure yet.

    Examples
    --------
    >>> estimate_h(72, 60.0, 1.2)
    1.2
    >>> estimate_h(0, 0.0, 1.3)
    1.3
    '''
    if exposure <= 0:
        return fallback
    return departures / exposure


class RateEstimate:
    '''Rate estimates of one road at one instant.

    Parameters
    ----------
    queue : int
        Road identifier.
    alpha : float
        Estimated arrival rate.
    h : float
        Estimated departure rate.
    window : float
        Window t_w used for alpha.
    arrivals : int
        Arrivals N_a observed so far.
    departures : int
        Departures N_d observed so far.
    '''

    def __init__(self, queue, alpha, h, window, arrivals, departures):
        if alpha < 0 or h < 0:
            raise ValueError('rate estimates must be non-negative')
        self.__queue      = queue
        self.__alpha      = alpha
        self.__h          = h
        self.__window     = window
        self.__arrivals   = arrivals
        self.__departures = departures

    @property
    def queue(self):
        '''int: Road identifier.'''
        return self.__queue

    @property
    def alpha(self):
        '''float: Estimated arrival rate.'''
        return self.__alpha

    @property
    def h(self):
        '''float: Estimated departure rate.'''
        return self.__h

    @property
    def window(self):
        '''float: Window t_w.'''
        return self.__window

    @property
    def arrivals(self):
        '''int: Number of arrivals N_a observed so far.'''
        return self.__arrivals

    @property
    def departures(self):
        '''int: Number of departures N_d observed so far.'''
        return self.__departures

    def __str__(self):
        return f'road {self.__queue}: alpha={self.__alpha:.4f}, h={self.__h:.4f}'


class RateEstimator:
    '''Collects arrival and departure observations of one run.

    Parameters
    ----------
    config : NetworkConfig
        Provides the configured departure rates used before any exposure.
    window : float
        Window t_w of the arrival rate estimate.
    '''

    def __init__(self, config, window = 100.0):
        if window <= 0:
            raise ValueError(f'window must be positive, but it was {window}')
        self.__config     = config
        self.__window     = float(window)
        self.__arrivals   = {road: [] for road in ROADS}
        self.__departures = {road: 0 for road in ROADS}
        self.__exposure   = {road: 0.0 for road in ROADS}
        self.__served     = {road: 0.0 for road in ROADS}
        self.__last_departure = {road: None for road in ROADS}
        self.__fallback_logged = set()

    @property
    def window(self):
        '''float: Window t_w.'''
        return self.__window

    def record_arrival(self, road, t):
        '''Record an arrival to the given road.'''
        self.__arrivals[road].append(t)

    def record_departure(self, road, t):
        '''Record a departure from the given road at time t.

        The exposure accumulated so far is frozen as the service time of the departures
        counted, so a residual headway still in progress does not bias the estimate.
        Departures happen only while GREEN and non-empty.
        '''
        last = self.__last_departure[road]
        if last is not None and t < last:
            raise ValueError(f'departures of road {road} must be recorded in time order, but {t} < {last}')
        self.__departures[road] += 1
        self.__served[road] = self.__exposure[road]
        self.__last_departure[road] = t

    def last_departure(self, road):
        '''Time of the last recorded departure of the given road, None before the first one.'''
        return self.__last_departure[road]

    def record_exposure(self, road, duration):
        '''Add GREEN and non-empty time of the given road.'''
        self.__exposure[road] += duration

    def exposure(self, road):
        '''Cumulative GREEN and non-empty time of the given road.'''
        return self.__exposure[road]

    def alpha(self, road, t):
        '''Arrival rate estimate of the given road at time t. Road 2 has no exogenous arrivals.'''
        if road == 2:
            return 0.0
        return estimate_alpha(self.__arrivals[road], t, self.__window)

    def h(self, road, t):
        '''Departure rate estimate of the given road at time t.'''
        fallback = self.__config.departure_rate(road)
        if self.__served[road] <= 0 and road not in self.__fallback_logged:
            logger.debug(f'no completed service on road {road} at t={t:.3f}, using configured h={fallback}')
            self.__fallback_logged.add(road)
        return estimate_h(self.__departures[road], self.__served[road], fallback)

    def estimate(self, road, t):
        '''Both estimates of the given road as a :class:`RateEstimate`.'''
        return RateEstimate(road, self.alpha(road, t), self.h(road, t), self.__window,
                            len(self.__arrivals[road]), self.__departures[road])
