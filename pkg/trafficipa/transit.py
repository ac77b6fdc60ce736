'''State of the flow bursts in transit between intersection 1 and intersection 2.

A burst leaves intersection 1 at time sigma_0 and travels towards the tail of road 2.
Since road 2 may discharge while the burst travels, the joining instant is found through
a sequence of J_k events: at each sigma_k the burst re-estimates the distance to the
queue tail from the queue content observed at that instant, until the remaining gap is
within the joining tolerance.
'''

import logging
import math
from enum import Enum

from .events import EventKind


logger = logging.getLogger(__name__)

_MERGE_TOLERANCE = 1e-9


class ModelViolationError(RuntimeError):
    '''Raised if the sample path violates an assumption of the transit model.

    Parameters
    ----------
    time : float
        Time at which the violation was detected.
    reason : str
        Description of the violation.
    '''

    def __init__(self, time, reason):
        self.__time   = time
        self.__reason = reason
        msg = f'Transit model violated at t = {time:.6f}: {reason}'
        super().__init__(msg)

    @property
    def time(self):
        '''float: Time at which the violation was detected.'''
        return self.__time

    @property
    def reason(self):
        '''str: Description of the violation.'''
        return self.__reason


class JoinOutcome(Enum):
    '''Result of a J_k event.'''

    RESCHEDULE = 'the burst is still away from the queue tail and a new J_k is scheduled'
    JOIN       = 'the burst joins road 2'


class Inflow(Enum):
    '''Regime of the flow from road 1 into the transit segment.'''

    BLOCKED = 'road 1 is RED'
    ARRIVAL = 'road 1 is GREEN and empty, vehicles pass at the arrival rate'
    SERVICE = 'road 1 is GREEN and non-empty, vehicles pass at the departure rate'


class TransitBurst:
    '''One flow burst moving from intersection 1 towards the tail of road 2.

    Parameters
    ----------
    index : int
        Creation index n of the burst.
    sigma0 : float
        Time at which the burst leaves intersection 1.
    delta : float
        Distance between the burst head and the tail of road 2 at sigma0.
    x2_estimate : float
        Content of road 2 observed at sigma0.
    speed : float
        Burst speed.
    vehicle_length : float
        Length of one vehicle, used to measure the burst tail.

    Attributes
    ----------
    size : int
        Vehicles x12 in the burst.
    delta : float
        Current gap delta12 between head and queue tail, constant between J_k events.
    x2_estimate : float
        Frozen estimate of road 2 used to predict the next J_k.
    sigmas : list of float
        Times sigma_0, sigma_1, ... of the J_k events so far.
    next_time : float
        Time of the next J_k event.
    active : bool
        False once the burst has joined road 2 or has been merged into another burst.
    receiving : bool
        True while road 1 feeds the burst.
    x2_initial : float
        Content of road 2 observed at sigma0.
    '''

    def __init__(self, index, sigma0, delta, x2_estimate, speed, vehicle_length = 1.0):
        if speed < 0:
            raise ValueError(f'speed must be non-negative, but it was {speed}')
        self.index          = index
        self.size           = 0
        self.delta          = float(delta)
        self.initial_delta  = float(delta)
        self.x2_estimate    = float(x2_estimate)
        self.x2_initial     = float(x2_estimate)
        self.speed          = float(speed)
        self.vehicle_length = float(vehicle_length)
        self.sigmas         = [float(sigma0)]
        self.next_time      = float(sigma0) + tau(self.delta, self.speed)
        self.active         = True
        self.receiving      = True
        self.position_ref   = 0.0
        self.time_ref       = float(sigma0)

    @property
    def sigma0(self):
        '''float: Time at which the burst left intersection 1.'''
        return self.sigmas[0]

    @property
    def k(self):
        '''int: Index of the last J_k event, zero before J_1.'''
        return len(self.sigmas) - 1

    def clock(self, t):
        '''Clock z12: time elapsed since the last J_k event (or sigma0).'''
        return t - self.sigmas[-1]

    def position(self, t):
        '''Distance travelled by the burst head from intersection 1 at time t.'''
        return self.position_ref + self.speed * (t - self.time_ref)

    def tail_position(self, t):
        '''Position of the burst tail at time t.'''
        return self.position(t) - self.size * self.vehicle_length

    def catch_up_time(self, leader, t):
        '''Time at which this burst's head reaches the tail of ``leader``, or None.'''
        gap = leader.tail_position(t) - self.position(t)
        if gap <= 0:
            return t
        relative_speed = self.speed - leader.speed
        if relative_speed <= 0:
            return None
        return t + gap / relative_speed

    def absorb(self, leader):
        '''Merge the leading burst into this one.

        The merged burst keeps this burst's index, carries the vehicles of both and moves
        with the head of the leader.
        '''
        self.size        += leader.size
        self.delta        = leader.delta
        self.x2_estimate  = leader.x2_estimate
        self.speed        = leader.speed
        self.sigmas       = list(leader.sigmas)
        self.next_time    = leader.next_time
        self.position_ref = leader.position_ref
        self.time_ref     = leader.time_ref
        leader.size   = 0
        leader.active = False

    def __str__(self):
        return (f'burst {self.index}: size={self.size}, delta={self.delta:.3f}, '
                f'x2_estimate={self.x2_estimate:.3f}, k={self.k}, active={self.active}')


def tau(delta, speed = 1.0):
    '''Time needed by a burst to cover the distance ``delta``.

    Examples
    --------
    >>> tau(60.0)
    60.0
    >>> tau(30.0, speed = 2.0)
    15.0
    '''
    if delta < 0:
        raise ValueError(f'delta must be non-negative, but it was {delta}')
    if delta == 0:
        return 0.0
    if speed <= 0:
        return math.inf
    return delta / speed


def start_burst(t, x2_observed, config, active = None, index = 0, speed = None):
    '''Create the burst that leaves intersection 1 at time t.

    Parameters
    ----------
    t : float
        Departure time sigma_0 of the burst head.
    x2_observed : float
        Content of road 2 observed at t.
    config : NetworkConfig
        Provides L, L_v and the nominal speed.
    active : TransitBurst or None
        Burst currently in transit, if any.
    index : int
        Creation index of the new burst.
    speed : float or None
        Speed of the new burst. None means the nominal speed of the network.

    Returns
    -------
    TransitBurst
        New burst with delta12 = L - x2 L_v and its J_1 scheduled.

    Raises
    ------
    ModelViolationError
        If another burst is in transit and the network allows only one.
    '''
    if active is not None and active.active and not config.multi_burst:
        raise ModelViolationError(t, f'burst {index} starts while burst {active.index} is still in transit')

    delta = config.segment_length - x2_observed * config.vehicle_length
    if delta < 0:
        logger.debug(f'road 2 spans the whole segment at t={t:.3f} (x2={x2_observed}), the burst joins immediately')
        delta = 0.0
    if speed is None:
        speed = config.burst_speed
    return TransitBurst(index, t, delta, x2_observed, speed, config.vehicle_length)


def on_jk(t, burst, x2_observed, epsilon, vehicle_length = 1.0):
    '''Process the J_k event of ``burst`` at time t.

    If the burst is within ``epsilon`` of the observed tail of road 2 it joins (J_K);
    the caller then moves its vehicles into road 2. Otherwise the gap is re-estimated
    from the observed content and the next J_k is scheduled.

    Parameters
    ----------
    t : float
        Event time sigma_k.
    burst : TransitBurst
        Burst whose J_k event occurs.
    x2_observed : float
        Content of road 2 observed at t.
    epsilon : float
        Joining tolerance in distance units.
    vehicle_length : float
        Length of one vehicle.

    Returns
    -------
    JoinOutcome
        Whether the burst joined or was rescheduled.

    Raises
    ------
    ModelViolationError
        If road 2 grew while the burst was in transit.
    '''
    if not burst.active:
        raise ModelViolationError(t, f'J_k received for inactive burst {burst.index}')

    gap = (burst.x2_estimate - x2_observed) * vehicle_length
    if gap < -_MERGE_TOLERANCE:
        raise ModelViolationError(t, f'road 2 grew from {burst.x2_estimate} to {x2_observed} while burst {burst.index} was in transit')
    gap = max(gap, 0.0)

    burst.sigmas.append(float(t))
    if gap <= epsilon:
        burst.delta  = 0.0
        burst.active = False
        return JoinOutcome.JOIN

    burst.delta       = gap
    burst.x2_estimate = float(x2_observed)
    burst.next_time   = t + tau(gap, burst.speed)
    logger.debug(f'burst {burst.index} rescheduled at t={t:.3f}: delta={gap:.3f}, next J at {burst.next_time:.3f}')
    return JoinOutcome.RESCHEDULE


def accumulate_transit(t, burst, inflow, vehicles = 1):
    '''Add vehicles leaving road 1 to the burst in transit.

    In the vehicle-level simulation every departure from road 1 adds one vehicle to the
    burst, so the content grows at the departure rate while road 1 is GREEN.

    Returns
    -------
    int
        Updated burst content x12.
    '''
    if not burst.active:
        raise ModelViolationError(t, f'vehicles routed to inactive burst {burst.index}')
    if inflow != Inflow.BLOCKED:
        burst.size += vehicles
    return burst.size


def detect_threshold_events(t, queue, x_before, x_after, zeta):
    '''Threshold crossing caused by a change of a queue content.

    The content reaches the threshold from below when ``x_before < zeta <= x_after`` and
    falls below it when ``x_after < zeta <= x_before``.

    Returns
    -------
    EventKind or None
        THRESHOLD_UP, THRESHOLD_DOWN or None.

    Examples
    --------
    >>> detect_threshold_events(0.0, 3, 24.5, 25.5, 25)
    <EventKind.THRESHOLD_UP: 'Z'>
    >>> detect_threshold_events(0.0, 3, 25, 24, 25) is EventKind.THRESHOLD_DOWN
    True
    '''
    if zeta <= 0:
        raise ValueError(f'zeta must be positive, but it was {zeta}')
    if x_before < zeta <= x_after:
        return EventKind.THRESHOLD_UP
    if x_after < zeta <= x_before:
        return EventKind.THRESHOLD_DOWN
    return None


def multi_burst_step(t, bursts, x2_observed, joined = None):
    '''Apply the multi-burst resets at time t.

    When burst ``joined`` has just joined road 2 with y vehicles, every trailing burst
    sees the queue tail move towards it: its gap shrinks by y vehicle lengths and its
    estimate becomes x2 + y. Afterwards, every trailing burst whose head has reached the
    tail of the burst ahead of it absorbs that burst.

    Parameters
    ----------
    t : float
        Current time.
    bursts : list of TransitBurst
        Bursts in transit ordered by creation, ``joined`` included if given.
    x2_observed : float
        Content of road 2 just before ``joined`` was added to it.
    joined : TransitBurst or None
        Burst that has just joined road 2.

    Returns
    -------
    tuple
        (remaining bursts, list of (leader index, absorbing index) merges).
    '''
    remaining = [burst for burst in bursts if burst is not joined and burst.active]

    if joined is not None:
        y = joined.size
        for burst in remaining:
            if burst.index <= joined.index:
                continue
            burst.delta       = max(burst.delta - y * burst.vehicle_length, 0.0)
            burst.x2_estimate = x2_observed + y
            burst.next_time   = max(burst.sigmas[-1] + tau(burst.delta, burst.speed), t)

    merges = []
    position = 1
    while position < len(remaining):
        leader  = remaining[position - 1]
        trailer = remaining[position]
        catch_up = trailer.catch_up_time(leader, t)
        if catch_up is not None and catch_up <= t + _MERGE_TOLERANCE:
            logger.debug(f'burst {trailer.index} absorbs burst {leader.index} at t={t:.3f}')
            trailer.absorb(leader)
            merges.append((leader.index, trailer.index))
            del remaining[position - 1]
        else:
            position += 1

    return remaining, merges
