'''Sample cost functions and their IPA gradients.

Three metrics are supported, all averaged over the horizon T and weighted per queue
(queues 1, 2, 3, 4 and the transit queue 12):

* the average queue content, sum_i w_i x_i,
* the P-th power of the queue content, sum_i w_i x_i^P,
* the time above a threshold, sum_i w_i 1[x_i >= zeta_i].

The cost is integrated exactly between events, over the fluid contents the simulator
interpolates linearly between them. The gradient of the first two metrics is integrated
from the state derivatives, which are constant between events, plus one term for every
jump of a content at an endogenous event, and is also kept per non-empty period of every
queue. The gradient of the threshold metric follows from the time derivatives of the
threshold crossing events, which are detected on the vehicle counts.
'''

import logging
import math
from enum import Enum

import numpy as np

from .events import EventKind
from .network import QUEUES, queue_index
from .util import write_csv


logger = logging.getLogger(__name__)

_CONTENT_TOLERANCE = 1e-9


class CostMetric(Enum):
    '''Kind of sample cost function.'''

    AVERAGE_QUEUE = 'avg'
    POWER         = 'power'
    THRESHOLD     = 'threshold'

    def __init__(self, identifier):
        self.__identifier = identifier

    @property
    def identifier(self):
        '''str: Name used on the command line and in CSV files.'''
        return self.__identifier

    @classmethod
    def from_str(cls, identifier):
        '''Return the metric whose identifier is the given string.

        Examples
        --------
        >>> CostMetric.from_str('power')
        <CostMetric.POWER: 'power'>
        '''
        if isinstance(identifier, CostMetric):
            return identifier
        for metric in cls:
            if metric.identifier == identifier:
                return metric
        raise ValueError(f'"{identifier}" is not a valid metric, use one of ' +
                         ', '.join(metric.identifier for metric in cls))

    def __str__(self):
        return self.identifier


def _five(values, name):
    array = np.broadcast_to(np.asarray(values, dtype = float), (5,)).copy()
    if not np.all(np.isfinite(array)):
        raise ValueError(f'{name} must be finite')
    return array


class CostFunction:
    '''Definition of one sample cost function.

    Parameters
    ----------
    metric : CostMetric
        Kind of cost.
    weights : float or sequence of float
        Weight of queues 1, 2, 3, 4 and 12.
    power : int
        Exponent P of the POWER metric. Ignored by the other metrics.
    thresholds : float or sequence of float
        Thresholds zeta of queues 1, 2, 3, 4 and 12 for the THRESHOLD metric.

    Raises
    ------
    TypeError
        If metric is not a CostMetric or power is not an integer.
    ValueError
        If a weight is negative, power is below 1 or a threshold is not positive.
    '''

    def __init__(self, metric = CostMetric.AVERAGE_QUEUE, weights = 1.0, power = 2, thresholds = 25.0):
        if not isinstance(metric, CostMetric):
            raise TypeError('metric must be one of CostMetric enum')
        if not isinstance(power, (int, np.integer)) or isinstance(power, bool):
            raise TypeError(f'power must be an integer, but it was {power!r}')
        if power < 1:
            raise ValueError(f'power must be at least 1, but it was {power}')

        self.__metric     = metric
        self.__weights    = _five(weights, 'weights')
        self.__power      = int(power)
        self.__thresholds = _five(thresholds, 'thresholds')

        if np.any(self.__weights < 0):
            raise ValueError('weights must be non-negative')
        if np.any(self.__thresholds <= 0):
            raise ValueError('thresholds must be positive')

    @property
    def metric(self):
        '''CostMetric: Kind of cost.'''
        return self.__metric

    @property
    def weights(self):
        '''numpy.ndarray: Weights of queues 1, 2, 3, 4 and 12.'''
        return self.__weights.copy()

    @property
    def power(self):
        '''int: Exponent P of the POWER metric.'''
        return self.__power

    @property
    def effective_power(self):
        '''int: Exponent used to integrate the state, 1 for AVERAGE_QUEUE.'''
        return self.__power if self.__metric == CostMetric.POWER else 1

    @property
    def thresholds(self):
        '''numpy.ndarray: Thresholds of queues 1, 2, 3, 4 and 12.'''
        return self.__thresholds.copy()

    def __str__(self):
        if self.__metric == CostMetric.POWER:
            return f'power (P={self.__power})'
        return str(self.__metric)


def _power_integral(x_start, x_end, exponent, duration):
    # Exact integral of x^exponent for x linear from x_start to x_end.
    if duration <= 0:
        return 0.0
    total = sum(x_start ** k * x_end ** (exponent - k) for k in range(exponent + 1))
    return duration * total / (exponent + 1)


def _time_above(x_start, x_end, threshold, duration):
    # Time during which a linear x is at or above the threshold.
    if duration <= 0:
        return 0.0
    if x_start >= threshold and x_end >= threshold:
        return duration
    if x_start < threshold and x_end < threshold:
        return 0.0
    if x_end > x_start:
        return duration * (x_end - threshold) / (x_end - x_start)
    return duration * (x_start - threshold) / (x_start - x_end)


def accumulate_cost(t1, t2, x_start, x_end, cost):
    '''Cost incurred by each queue over [t1, t2), not yet divided by the horizon.

    The queue contents are linear over the segment. Piecewise constant vehicle counts are
    the special case ``x_start == x_end``.

    Parameters
    ----------
    t1, t2 : float
        Segment boundaries, t1 <= t2.
    x_start, x_end : sequence of float
        Contents of queues 1, 2, 3, 4 and 12 at t1 and just before t2.
    cost : CostFunction
        Cost to integrate.

    Returns
    -------
    numpy.ndarray
        Weighted cost of the five queues over the segment.

    Examples
    --------
    >>> accumulate_cost(0.0, 10.0, [2, 0, 0, 0, 0], [2, 0, 0, 0, 0], CostFunction(CostMetric.POWER))
    array([40.,  0.,  0.,  0.,  0.])
    '''
    if t2 < t1:
        raise ValueError(f'segment must not end before it starts, but it was [{t1}, {t2})')
    duration = t2 - t1
    weights  = cost.weights
    result   = np.zeros(5)
    if cost.metric == CostMetric.THRESHOLD:
        thresholds = cost.thresholds
        for row in range(5):
            result[row] = weights[row] * _time_above(x_start[row], x_end[row], thresholds[row], duration)
    else:
        exponent = cost.effective_power
        for row in range(5):
            result[row] = weights[row] * _power_integral(x_start[row], x_end[row], exponent, duration)
    return result


class NonEmptyPeriod:
    '''Period during which a queue, or its derivative, is non-zero.

    Between two consecutive events the queue content is linear and its derivative is
    constant; every such piece is kept as a segment ``(t1, t2, x_start, x_end, xprime)``.
    Jumps of the content at endogenous events are kept as ``(t, x_before, x_after, tau_prime)``.

    Parameters
    ----------
    queue : int
        Queue identifier.
    start : float
        Start time xi of the period.
    '''

    def __init__(self, queue, start):
        self.queue    = queue
        self.start    = float(start)
        self.end      = None
        self.segments = []
        self.jumps    = []

    @property
    def closed(self):
        '''bool: True once the end time eta is known.'''
        return self.end is not None

    def add(self, t1, t2, x_start, x_end, xprime):
        self.segments.append((float(t1), float(t2), float(x_start), float(x_end), np.array(xprime, dtype = float)))

    def add_jump(self, t, x_before, x_after, tau_prime):
        self.jumps.append((float(t), float(x_before), float(x_after), np.array(tau_prime, dtype = float)))

    def close(self, t):
        self.end = float(t)

    def __str__(self):
        return f'queue {self.queue}: [{self.start:.3f}, {self.end if self.closed else "open"}), {len(self.segments)} segments'


class ThresholdInterval:
    '''Interval [gamma, psi) during which a queue is at or above its threshold.

    Parameters
    ----------
    queue : int
        Queue identifier.
    start : float
        Time gamma of the upcrossing.
    start_prime : array_like
        Derivative of gamma.
    '''

    def __init__(self, queue, start, start_prime):
        self.queue       = queue
        self.start       = float(start)
        self.start_prime = np.array(start_prime, dtype = float)
        self.end         = None
        self.end_prime   = None

    def close(self, t, end_prime):
        self.end       = float(t)
        self.end_prime = np.array(end_prime, dtype = float)

    @property
    def closed(self):
        '''bool: True once the downcrossing time psi is known.'''
        return self.end is not None

    @property
    def duration(self):
        '''float: psi - gamma.'''
        return self.end - self.start


def power_gradient(period, power, weight = 1.0):
    '''Gradient of the P-th power cost incurred within one non-empty period.

    The derivative is constant over every segment of the period, so the gradient is

        P sum_s x'(s) integral over s of w x^(P-1) dt - sum_jumps w [x_after^P - x_before^P] tau'

    where the second sum runs over the jumps of the content at endogenous events.

    P = 1 gives the gradient of the average queue cost.

    Parameters
    ----------
    period : NonEmptyPeriod
        Period with its segments.
    power : int
        Exponent P.
    weight : float
        Weight of the queue.

    Returns
    -------
    numpy.ndarray
        Gradient with respect to theta_1 to theta_4, not divided by the horizon.

    Examples
    --------
    >>> period = NonEmptyPeriod(3, 0.0)
    >>> period.add(0.0, 4.0, 0.0, 6.0, [0.5, 0.0, 0.0, 0.0])
    >>> power_gradient(period, 2)
    array([12.,  0.,  0.,  0.])
    '''
    gradient = np.zeros(4)
    for t1, t2, x_start, x_end, xprime in period.segments:
        gradient += power * weight * _power_integral(x_start, x_end, power - 1, t2 - t1) * xprime
    for _, x_before, x_after, tau_prime in period.jumps:
        gradient -= weight * (x_after ** power - x_before ** power) * tau_prime
    return gradient


def threshold_gradient(interval, weight = 1.0):
    '''Gradient of the time spent above the threshold during one interval, w (psi' - gamma').

    Examples
    --------
    >>> interval = ThresholdInterval(2, 10.0, [0.5, 0.0, 0.0, 0.0])
    >>> interval.close(20.0, [2.0, 0.0, 0.0, 0.0])
    >>> threshold_gradient(interval)
    array([1.5, 0. , 0. , 0. ])
    '''
    if not interval.closed:
        raise ValueError(f'threshold interval of queue {interval.queue} is still open')
    return weight * (interval.end_prime - interval.start_prime)


class CostResult:
    '''Finalized cost and gradient of one run.

    Parameters
    ----------
    cost : CostFunction
        Cost that was accumulated.
    horizon : float
        Horizon T.
    queue_costs : numpy.ndarray
        Integrated cost of queues 1, 2, 3, 4, 12, not divided by T.
    queue_gradients : numpy.ndarray
        5x4 integrated gradients, not divided by T.
    periods : dict
        Non-empty periods per queue.
    intervals : dict
        Threshold intervals per queue.
    '''

    def __init__(self, cost, horizon, queue_costs, queue_gradients, periods, intervals):
        self.__cost            = cost
        self.__horizon         = horizon
        self.__queue_costs     = np.asarray(queue_costs, dtype = float) / horizon
        self.__queue_gradients = np.asarray(queue_gradients, dtype = float) / horizon
        self.__periods         = periods
        self.__intervals       = intervals

    @property
    def cost(self):
        '''CostFunction: Cost that was accumulated.'''
        return self.__cost

    @property
    def metric(self):
        '''CostMetric: Kind of cost.'''
        return self.__cost.metric

    @property
    def value(self):
        '''float: Sample cost F.'''
        return float(self.__queue_costs.sum())

    @property
    def gradient(self):
        '''numpy.ndarray: IPA estimate of dF / dtheta.'''
        return self.__queue_gradients.sum(axis = 0)

    @property
    def queue_costs(self):
        '''numpy.ndarray: Contribution of queues 1, 2, 3, 4 and 12 to F.'''
        return self.__queue_costs.copy()

    @property
    def queue_gradients(self):
        '''numpy.ndarray: Contribution of queues 1, 2, 3, 4 and 12 to dF / dtheta.'''
        return self.__queue_gradients.copy()

    @property
    def periods(self):
        '''dict: Non-empty periods of each queue.'''
        return self.__periods

    @property
    def intervals(self):
        '''dict: Threshold intervals of each queue.'''
        return self.__intervals

    @property
    def horizon(self):
        '''float: Horizon T.'''
        return self.__horizon

    def as_row(self, theta, seed):
        '''Row of the finalized record CSV.'''
        return [self.metric.identifier, *theta.values.tolist(), self.value, *self.gradient.tolist(), seed]

    def __str__(self):
        gradient = ', '.join(f'{value:.6g}' for value in self.gradient)
        return f'{self.__cost}: F={self.value:.6g}, dF/dtheta=[{gradient}]'


RECORD_HEADER = ['metric', 'theta_1', 'theta_2', 'theta_3', 'theta_4', 'F',
                 'dF_dtheta_1', 'dF_dtheta_2', 'dF_dtheta_3', 'dF_dtheta_4', 'seed']


def write_records(path, rows):
    '''Write rows made by :meth:`CostResult.as_row` to a CSV file.'''
    return write_csv(path, RECORD_HEADER, rows)


class CostAccumulator:
    '''Accumulates one cost function and its IPA gradient along a run.

    The simulator calls :meth:`advance` for every interval between two events, with the
    fluid contents and the state derivatives that hold over that interval, and
    :meth:`on_event` for every event with its time derivative and the contents around it.

    Parameters
    ----------
    cost : CostFunction
        Cost to accumulate.
    horizon : float
        Horizon T.
    initial_state : sequence of float
        Contents of queues 1, 2, 3, 4 and 12 at t = 0.
    '''

    def __init__(self, cost, horizon, initial_state = (0, 0, 0, 0, 0)):
        if not isinstance(cost, CostFunction):
            raise TypeError('cost must be an instance of CostFunction')
        if horizon <= 0:
            raise ValueError(f'horizon must be positive, but it was {horizon}')
        self.__cost        = cost
        self.__horizon     = float(horizon)
        self.__costs       = np.zeros(5)
        self.__gradients   = np.zeros((5, 4))
        self.__periods     = {queue: [] for queue in QUEUES}
        self.__intervals   = {queue: [] for queue in QUEUES}
        self.__open_period = {queue: None for queue in QUEUES}
        self.__open_interval = {queue: None for queue in QUEUES}
        self.__finalized   = False

        thresholds = cost.thresholds
        for queue in QUEUES:
            if initial_state[queue_index(queue)] >= thresholds[queue_index(queue)]:
                self.__open_interval[queue] = ThresholdInterval(queue, 0.0, np.zeros(4))

    @property
    def cost(self):
        '''CostFunction: Cost being accumulated.'''
        return self.__cost

    def advance(self, t1, t2, x_start, x_end, xprime, counts = None):
        '''Integrate the cost and the gradient over [t1, t2).

        Parameters
        ----------
        t1, t2 : float
            Interval without events.
        x_start, x_end : sequence of float
            Fluid contents of queues 1, 2, 3, 4 and 12 at both ends.
        xprime : numpy.ndarray
            5x4 state derivatives over the interval.
        counts : sequence of int or None
            Vehicle counts over the interval, used by the threshold metric. None means the
            contents are counts already.
        '''
        if self.__finalized:
            raise RuntimeError('the accumulator has already been finalized')
        if t2 <= t1:
            return

        if self.__cost.metric == CostMetric.THRESHOLD:
            if counts is None:
                counts = x_start
            self.__costs += accumulate_cost(t1, t2, counts, counts, self.__cost)
            return
        self.__costs += accumulate_cost(t1, t2, x_start, x_end, self.__cost)

        power   = self.__cost.effective_power
        weights = self.__cost.weights
        for queue in QUEUES:
            row    = queue_index(queue)
            active = (x_start[row] > _CONTENT_TOLERANCE or x_end[row] > _CONTENT_TOLERANCE
                      or xprime[row].any())
            period = self.__open_period[queue]
            if active and period is None:
                period = self.__open(queue, t1)
            elif not active and period is not None:
                period.close(t1)
                self.__open_period[queue] = None
                period = None
            if period is None:
                continue
            period.add(t1, t2, x_start[row], x_end[row], xprime[row])
            self.__gradients[row] += (power * weights[row] *
                                      _power_integral(x_start[row], x_end[row], power - 1, t2 - t1) * xprime[row])

    def on_event(self, record, tau_prime, before = None, after = None):
        '''Register the threshold crossings and the jumps of the contents at one event.

        Parameters
        ----------
        record : EventRecord
            Event.
        tau_prime : array_like
            Time derivative of the event.
        before, after : sequence of float or None
            Fluid contents of the five queues just before and just after the event.
        '''
        if before is not None and after is not None:
            self.__add_jumps(record.time, before, after, tau_prime)
        if record.kind == EventKind.THRESHOLD_UP:
            if self.__open_interval[record.queue] is not None:
                logger.warning(f'queue {record.queue} crossed its threshold upwards twice, at t={record.time:.3f}')
                return
            self.__open_interval[record.queue] = ThresholdInterval(record.queue, record.time, tau_prime)
        elif record.kind == EventKind.THRESHOLD_DOWN:
            interval = self.__open_interval[record.queue]
            if interval is None:
                logger.warning(f'queue {record.queue} crossed its threshold downwards without an upcrossing, at t={record.time:.3f}')
                return
            interval.close(record.time, tau_prime)
            self.__close_interval(interval)

    def __open(self, queue, t):
        period = NonEmptyPeriod(queue, t)
        self.__open_period[queue] = period
        self.__periods[queue].append(period)
        return period

    def __add_jumps(self, t, before, after, tau_prime):
        if self.__cost.metric == CostMetric.THRESHOLD or not np.any(tau_prime):
            return
        power   = self.__cost.effective_power
        weights = self.__cost.weights
        for queue in QUEUES:
            row = queue_index(queue)
            if abs(after[row] - before[row]) <= _CONTENT_TOLERANCE:
                continue
            period = self.__open_period[queue]
            if period is None:
                period = self.__open(queue, t)
            period.add_jump(t, before[row], after[row], tau_prime)
            self.__gradients[row] -= weights[row] * (after[row] ** power - before[row] ** power) * np.asarray(tau_prime)

    def __close_interval(self, interval):
        row = queue_index(interval.queue)
        self.__intervals[interval.queue].append(interval)
        self.__open_interval[interval.queue] = None
        if self.__cost.metric == CostMetric.THRESHOLD:
            self.__gradients[row] += threshold_gradient(interval, self.__cost.weights[row])

    def finalize(self):
        '''Close everything that is still open at T and return the :class:`CostResult`.

        Periods and threshold intervals still open at T end at T with a zero end time
        derivative.
        '''
        if not self.__finalized:
            for queue in QUEUES:
                period = self.__open_period[queue]
                if period is not None:
                    period.close(self.__horizon)
                    self.__open_period[queue] = None
                interval = self.__open_interval[queue]
                if interval is not None:
                    interval.close(self.__horizon, np.zeros(4))
                    self.__close_interval(interval)
            self.__finalized = True

        result = CostResult(self.__cost, self.__horizon, self.__costs, self.__gradients,
                            self.__periods, self.__intervals)
        if not math.isfinite(result.value):
            raise ValueError(f'cost {self.__cost} is not finite')
        return result
