'''Infinitesimal Perturbation Analysis of the two-intersection network.

The engine consumes the ordered event stream of one run and maintains the derivatives of
every queue content with respect to the four GREEN durations. Between events all
derivatives are constant; they only change at events, by the boundary condition

    x'(tau_k+) = x'(tau_k-) + [f_before - f_after] tau'_k

where tau'_k is zero for exogenous events and follows from the guard of the event for
endogenous ones. Queues are indexed 1, 2, 3, 4 and 12 (the transit segment); the
GREEN durations theta_1 to theta_4 are the columns of the derivative matrices.
'''

import logging

import numpy as np

from .events import EventKind
from .network import DelayMode, INTERSECTION, PERPENDICULAR, queue_index


logger = logging.getLogger(__name__)

_SINGULAR_TOLERANCE = 1e-12
_TRANSIT_ROW = queue_index(12)
_ROAD2_ROW   = queue_index(2)


class SingularEventError(RuntimeError):
    '''Raised if the guard of an endogenous event has a vanishing time derivative.

    Parameters
    ----------
    time : float or None
        Time of the event, if known.
    kind : EventKind or None
        Kind of the event, if known.
    '''

    def __init__(self, time = None, kind = None):
        self.__time = time
        self.__kind = kind
        where = '' if time is None else f' at t = {time:.6f}'
        what  = 'event' if kind is None else f'{kind.identifier} event'
        msg = f'Singular {what}{where}: the event time derivative is undefined'
        super().__init__(msg)

    @property
    def time(self):
        '''float or None: Time of the singular event.'''
        return self.__time

    @property
    def kind(self):
        '''EventKind or None: Kind of the singular event.'''
        return self.__kind


class ProtocolError(RuntimeError):
    '''Raised if the event stream is inconsistent with the derivative state.

    Parameters
    ----------
    record : EventRecord
        Offending event.
    reason : str
        Description of the inconsistency.
    '''

    def __init__(self, record, reason):
        self.__record = record
        self.__reason = reason
        msg = f'Unexpected event {record}: {reason}'
        super().__init__(msg)

    @property
    def record(self):
        '''EventRecord: Offending event.'''
        return self.__record

    @property
    def reason(self):
        '''str: Description of the inconsistency.'''
        return self.__reason


class UnsupportedModeError(RuntimeError):
    '''Raised if IPA is requested while several bursts are in transit.

    Parameters
    ----------
    time : float
        Time at which the second burst appeared.
    '''

    def __init__(self, time):
        self.__time = time
        msg = f'IPA supports a single burst in transit, but a second burst appeared at t = {time:.6f}'
        super().__init__(msg)

    @property
    def time(self):
        '''float: Time at which the second burst appeared.'''
        return self.__time


def _unit(j):
    vector = np.zeros(4)
    vector[j - 1] = 1.0
    return vector


def boundary_update(f_before, f_after, xprime_before, tau_prime):
    '''State derivative right after an event.

    Parameters
    ----------
    f_before : float
        Rate of the state just before the event.
    f_after : float
        Rate of the state just after the event.
    xprime_before : array_like
        State derivative just before the event, one entry per parameter.
    tau_prime : array_like
        Event time derivative, zero for exogenous events.

    Returns
    -------
    numpy.ndarray
        ``xprime_before + (f_before - f_after) * tau_prime``.

    Examples
    --------
    >>> boundary_update(-0.7, 0.45, [0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).round(2)
    array([-1.15,  0.  ,  0.  ,  0.  ])
    '''
    return np.asarray(xprime_before, dtype = float) + (f_before - f_after) * np.asarray(tau_prime, dtype = float)


def endogenous_tau_prime(dg_dx, dg_dtheta, f_before, xprime_before, strict = False, time = None, kind = None):
    '''Event time derivative of an endogenous event with guard g(x, theta) = 0.

    Parameters
    ----------
    dg_dx : float
        Derivative of the guard with respect to the state.
    dg_dtheta : array_like
        Derivative of the guard with respect to the parameters.
    f_before : float
        Rate of the state just before the event.
    xprime_before : array_like
        State derivative just before the event.
    strict : bool
        Raise instead of returning zero when the denominator vanishes.
    time : float or None
        Event time, only used in messages.
    kind : EventKind or None
        Event kind, only used in messages.

    Returns
    -------
    numpy.ndarray
        ``-(dg_dtheta + dg_dx * xprime_before) / (dg_dx * f_before)``, or zeros if the
        denominator vanishes and ``strict`` is False.

    Raises
    ------
    SingularEventError
        If the denominator vanishes and ``strict`` is True.

    Examples
    --------
    Clock guard of a GREEN phase of road 2 whose last R2G had derivative rho':

    >>> rho_prime = np.array([1.0, 0.0, 0.0, 1.0])
    >>> endogenous_tau_prime(1.0, -np.array([0.0, 1.0, 0.0, 0.0]), 1.0, -rho_prime)
    array([1., 1., 0., 1.])
    '''
    dg_dtheta     = np.broadcast_to(np.asarray(dg_dtheta, dtype = float), (4,))
    xprime_before = np.asarray(xprime_before, dtype = float)
    denominator   = dg_dx * f_before
    if abs(denominator) < _SINGULAR_TOLERANCE:
        if strict:
            raise SingularEventError(time, kind)
        where = '' if time is None else f' at t={time:.6f}'
        logger.debug(f'singular {kind}{where}, using tau\'=0')
        return np.zeros(4)
    return -(dg_dtheta + dg_dx * xprime_before) / denominator


def collapsed_sigma_prime(k, x2_dot, x2_prime, sigma_prev_prime, sigma0_prime, speed = 1.0, vehicle_length = 1.0):
    '''Derivative of the time sigma_k of the k-th J event of a burst.

    Only the derivative of the burst start sigma_0 is needed besides the road 2 state
    observed at sigma_{k-1}::

        sigma'_k = -(L_v / v) [x2'(sigma_{k-1}) + dx2/dt(sigma_{k-1}) sigma'_{k-1}] + sigma'_0

    Parameters
    ----------
    k : int
        Index of the J event, k >= 1.
    x2_dot : float
        Rate of road 2 at sigma_{k-1}.
    x2_prime : array_like
        Derivative of road 2 at sigma_{k-1}.
    sigma_prev_prime : array_like
        Derivative of sigma_{k-1}.
    sigma0_prime : array_like
        Derivative of sigma_0.
    speed : float
        Speed v of the burst.
    vehicle_length : float
        Length L_v occupied by one queued vehicle.

    Returns
    -------
    numpy.ndarray
        Derivative of sigma_k.

    Examples
    --------
    >>> collapsed_sigma_prime(2, -1.3, 0.5, 1.0, 1.0)
    array([1.8, 1.8, 1.8, 1.8])
    >>> collapsed_sigma_prime(2, -1.3, 0.5, 1.0, 1.0, vehicle_length = 2.0)
    array([2.6, 2.6, 2.6, 2.6])
    '''
    if k < 1:
        raise ValueError(f'k must be at least 1, but it was {k}')
    x2_prime         = np.broadcast_to(np.asarray(x2_prime, dtype = float), (4,))
    sigma_prev_prime = np.broadcast_to(np.asarray(sigma_prev_prime, dtype = float), (4,))
    sigma0_prime     = np.broadcast_to(np.asarray(sigma0_prime, dtype = float), (4,))
    return -(vehicle_length / speed) * (x2_prime + x2_dot * sigma_prev_prime) + sigma0_prime


def unrolled_sigma_prime(x2_primes, x2_dots, sigma0_prime, speed = 1.0, vehicle_length = 1.0):
    '''Derivatives sigma'_1 ... sigma'_K through the step-by-step recursion of the J chain.

    Each step uses sigma'_k = delta12'(sigma_{k-1}+) / v - z12'(sigma_{k-1}+) with
    z12'(sigma_{k-1}+) = -sigma'_{k-1}. The gap derivative is -L_v [x2' + dx2/dt sigma'_0] at
    sigma_0 and L_v times the difference of two consecutive road 2 observations afterwards.
    The result agrees with :func:`collapsed_sigma_prime` applied at every step.

    Parameters
    ----------
    x2_primes : sequence of array_like
        Derivatives of road 2 observed at sigma_0 ... sigma_{K-1}.
    x2_dots : sequence of float
        Rates of road 2 at sigma_0 ... sigma_{K-1}.
    sigma0_prime : array_like
        Derivative of sigma_0.
    speed : float
        Speed of the burst.
    vehicle_length : float
        Length L_v occupied by one queued vehicle.

    Returns
    -------
    list of numpy.ndarray
        sigma'_1 ... sigma'_K.
    '''
    if len(x2_primes) != len(x2_dots):
        raise ValueError('x2_primes and x2_dots must have the same length')

    sigma0_prime = np.broadcast_to(np.asarray(sigma0_prime, dtype = float), (4,))
    observed = []
    sigmas   = [sigma0_prime]
    for k, (x2_prime, x2_dot) in enumerate(zip(x2_primes, x2_dots)):
        observed.append(np.asarray(x2_prime, dtype = float) + x2_dot * sigmas[k])
        if k == 0:
            delta_prime = -vehicle_length * observed[0]
        else:
            delta_prime = vehicle_length * (observed[k - 1] - observed[k])
        z_prime = -sigmas[k]
        sigmas.append(delta_prime / speed - z_prime)
    return sigmas[1:]


class IpaDerivatives:
    '''All derivatives carried by the IPA engine.

    Attributes
    ----------
    xprime : numpy.ndarray
        5x4 matrix of d x_i / d theta_j, rows are queues 1, 2, 3, 4, 12.
    zprime : numpy.ndarray
        2x4 matrix of the derivatives of the GREEN clocks of intersection 1 and 2.
    sigma0_prime : numpy.ndarray
        Derivative of the start time of the burst in transit.
    last_g2r_prime : numpy.ndarray
        4x4 matrix, row i is the derivative of the last G2R of road i.
    last_r2g_prime : numpy.ndarray
        4x4 matrix, row i is the derivative of the last R2G of road i.
    rprime : numpy.ndarray
        5x4 matrix of the derivatives of the threshold indicators.
    tau_prime : numpy.ndarray
        Event time derivative of the last processed event.
    cause_prime : numpy.ndarray
        Time derivative of the last event that changed a vehicle count (arrival,
        departure or join). S, E and threshold events triggered by a count change share it.
    '''

    def __init__(self):
        self.xprime         = np.zeros((5, 4))
        self.zprime         = np.zeros((2, 4))
        self.sigma0_prime   = np.zeros(4)
        self.last_g2r_prime = np.zeros((4, 4))
        self.last_r2g_prime = np.zeros((4, 4))
        self.rprime         = np.zeros((5, 4))
        self.tau_prime      = np.zeros(4)
        self.cause_prime    = np.zeros(4)

        # J chain of the burst in transit.
        self.burst_active     = False
        self.burst_start      = None
        self.burst_speed      = 1.0
        self.sigma_prev_prime = np.zeros(4)
        self.x2_prime_prev    = np.zeros(4)
        self.x2_dot_prev      = 0.0

    def row(self, queue):
        '''Derivatives of the given queue (a view into :attr:`xprime`).'''
        return self.xprime[queue_index(queue)]


class IpaEngine:
    '''Event-driven IPA estimator of one run.

    The contents differentiated are the fluid contents of the simulator: the vehicle count
    of a road minus the progress of the headway in service, and for queue 12 the vehicles
    in transit plus that progress on road 1. Arrivals are exogenous unit jumps, so only the
    service rates enter the updates.

    Parameters
    ----------
    config : NetworkConfig
        Network of the run.
    delay_mode : DelayMode
        WITH_DELAY routes road 1 outflow through the transit queue 12, NO_DELAY feeds road 2 directly.
    estimator : RateEstimator or None
        Source of the rates of roads other than the one an event belongs to. None means the
        configured rates.
    strict : bool
        Raise :class:`SingularEventError` on singular endogenous events instead of using tau' = 0.
    record_trace : bool
        Keep one trace row per processed event.
    '''

    def __init__(self, config, delay_mode = DelayMode.WITH_DELAY, estimator = None, strict = False, record_trace = False):
        if not isinstance(delay_mode, DelayMode):
            raise TypeError('delay_mode must be one of DelayMode enum')
        self.__config       = config
        self.__delay_mode   = delay_mode
        self.__estimator    = estimator
        self.__strict       = strict
        self.__record_trace = record_trace
        self.__derivatives  = IpaDerivatives()
        self.__trace        = []

    @property
    def derivatives(self):
        '''IpaDerivatives: Current derivatives.'''
        return self.__derivatives

    @property
    def xprime(self):
        '''numpy.ndarray: Copy of the 5x4 state derivative matrix.'''
        return self.__derivatives.xprime.copy()

    @property
    def trace(self):
        '''list: Trace rows (time, kind, queue, 20 state derivatives, 4 event time derivatives).'''
        return self.__trace

    def process(self, record):
        '''Update the derivatives for one event and return its event time derivative.

        Events of road 1 belong to both the road 1 and the transit event sets. The transit
        set needs the road 1 derivative before an E_1 reset, and the G2R_1 time derivative
        computed by the road 1 set, which fixes the order of the two updates.

        Parameters
        ----------
        record : EventRecord
            Next event of the run.

        Returns
        -------
        numpy.ndarray
            Event time derivative tau'_k (zeros for exogenous events).
        '''
        kind  = record.kind
        queue = record.queue

        if kind == EventKind.ARRIVAL:
            tau_prime = np.zeros(4)
        elif kind in (EventKind.MERGE, EventKind.BURST_JOINED):
            raise UnsupportedModeError(record.time)
        elif queue == 1 and kind == EventKind.END:
            self.apply_event_phi_12(record)
            tau_prime = self.apply_event_phi_i(record, 1)
        elif queue == 1 and kind in (EventKind.G2R, EventKind.R2G, EventKind.DEPARTURE):
            tau_prime = self.apply_event_phi_i(record, 1)
            self.apply_event_phi_12(record, tau_prime)
        elif queue in (1, 3, 4):
            tau_prime = self.apply_event_phi_i(record, queue)
        elif queue == 2:
            tau_prime = self.apply_event_phi_2(record)
        elif queue == 12:
            tau_prime = self.apply_event_phi_12(record)
        else:
            assert False, 'code must not reach here'

        derivatives = self.__derivatives
        derivatives.tau_prime = np.asarray(tau_prime, dtype = float)
        if kind in (EventKind.ARRIVAL, EventKind.DEPARTURE) or (kind == EventKind.JOIN and record.final):
            derivatives.cause_prime = derivatives.tau_prime.copy()
        assert not derivatives.rprime.any(), 'threshold indicator derivatives must stay zero'

        if self.__record_trace:
            self.__trace.append((record.time, kind.identifier, queue,
                                 *derivatives.xprime.ravel().tolist(), *derivatives.tau_prime.tolist()))
        return derivatives.tau_prime

    def apply_event_phi_i(self, record, i):
        '''Update for an event of road i in {1, 3, 4}.

        Parameters
        ----------
        record : EventRecord
            Event of road i.
        i : int
            Road 1, 3 or 4.

        Returns
        -------
        numpy.ndarray
            Event time derivative.

        Raises
        ------
        ProtocolError
            If the event kind does not belong to the event set of road i.
        '''
        if i not in (1, 3, 4):
            raise ValueError(f'i must be 1, 3 or 4, but it was {i}')
        tau_prime = self.__apply_road_event(record, i)
        if tau_prime is None:
            raise ProtocolError(record, f'not an event of road {i}')
        return tau_prime

    def apply_event_phi_2(self, record):
        '''Update for an event of road 2, including the J events of the burst in transit.

        Returns
        -------
        numpy.ndarray
            Event time derivative.

        Raises
        ------
        ProtocolError
            If a J event arrives without a burst in transit, or the kind is not an event of road 2.
        '''
        tau_prime = self.__apply_road_event(record, 2)
        if tau_prime is not None:
            return tau_prime
        if record.kind != EventKind.JOIN:
            raise ProtocolError(record, 'not an event of road 2')

        d  = self.__derivatives
        x2 = record.x_before[_ROAD2_ROW]
        h2 = record.h
        if not d.burst_active:
            raise ProtocolError(record, 'no burst derivative state is active')

        if record.k == 1 and record.time == d.burst_start:
            # Road 2 already reached the upstream intersection: the first J is the start itself.
            tau_prime = d.sigma0_prime.copy()
        else:
            tau_prime = collapsed_sigma_prime(record.k, d.x2_dot_prev, d.x2_prime_prev, d.sigma_prev_prime,
                                              d.sigma0_prime, d.burst_speed, self.__config.vehicle_length)
        d.sigma_prev_prime = tau_prime
        d.x2_prime_prev    = d.xprime[_ROAD2_ROW].copy()
        d.x2_dot_prev      = -h2 if record.green(2) and x2 > 0 else 0.0
        if record.final:
            # The joined vehicles are a whole number: their derivative is zero. Service only
            # starts at sigma_K if road 2 was empty and GREEN.
            if record.green(2) and x2 == 0 and record.x_after[_ROAD2_ROW] > 0:
                d.xprime[_ROAD2_ROW] += h2 * tau_prime
            d.burst_active = False
            d.burst_start  = None
        return tau_prime

    def apply_event_phi_12(self, record, tau_prime = None):
        '''Update for an event of the transit queue 12, or for the road 1 events that change its rate.

        Queue 12 holds the vehicles in transit plus the headway progress of road 1, so the
        road 1 switches and the E_1 reset mirror onto it. Without delay, a road 1 departure
        may start the service of an empty road 2 instead.

        Parameters
        ----------
        record : EventRecord
            Event of queue 12 or road 1.
        tau_prime : array_like or None
            Time derivative of a road 1 event, already computed by the road 1 event set.

        Returns
        -------
        numpy.ndarray
            Event time derivative.

        Raises
        ------
        UnsupportedModeError
            If a new burst starts while another one is still in transit.
        ProtocolError
            If the kind does not belong to the event set of queue 12.
        '''
        d       = self.__derivatives
        kind    = record.kind
        delayed = self.__delay_mode == DelayMode.WITH_DELAY

        if record.queue == 1:
            x1 = record.x_before[0]
            h1 = record.h
            if kind == EventKind.END:
                if delayed:
                    d.xprime[_TRANSIT_ROW] += d.xprime[queue_index(1)]
                return d.tau_prime
            if tau_prime is None:
                raise ProtocolError(record, 'the road 1 event time derivative is missing')
            if kind == EventKind.G2R:
                if delayed and x1 > 0:
                    d.xprime[_TRANSIT_ROW] += h1 * tau_prime
            elif kind == EventKind.R2G:
                if delayed and x1 > 0:
                    d.xprime[_TRANSIT_ROW] -= h1 * tau_prime
            elif kind == EventKind.DEPARTURE:
                joined = record.x_after[_ROAD2_ROW] > record.x_before[_ROAD2_ROW]
                if not delayed and joined and record.green(2) and record.x_before[_ROAD2_ROW] == 0:
                    d.xprime[_ROAD2_ROW] += self.__rate_h(2, record) * tau_prime
            else:
                raise ProtocolError(record, 'road 1 event outside of the transit event set')
            return tau_prime

        if record.queue != 12:
            raise ProtocolError(record, 'not an event of queue 12')

        if kind == EventKind.START:
            tau_prime = d.cause_prime.copy()
            if not record.appended:
                if d.burst_active:
                    raise UnsupportedModeError(record.time)
                x2 = record.x_before[_ROAD2_ROW]
                d.burst_active     = True
                d.burst_start      = record.time
                d.burst_speed      = record.speed if record.speed else self.__config.burst_speed
                d.sigma0_prime     = tau_prime.copy()
                d.sigma_prev_prime = tau_prime.copy()
                d.x2_prime_prev    = d.xprime[_ROAD2_ROW].copy()
                d.x2_dot_prev      = -self.__rate_h(2, record) if record.green(2) and x2 > 0 else 0.0
        elif kind == EventKind.END:
            tau_prime = d.cause_prime.copy()
            d.xprime[_TRANSIT_ROW] = 0.0
        elif kind in (EventKind.THRESHOLD_UP, EventKind.THRESHOLD_DOWN):
            tau_prime = d.cause_prime.copy()
            d.rprime[_TRANSIT_ROW] = 0.0
        else:
            raise ProtocolError(record, 'not an event of queue 12')
        return tau_prime

    def __apply_road_event(self, record, i):
        # Events every road shares. Returns None for kinds outside that set.
        d    = self.__derivatives
        row  = queue_index(i)
        kind = record.kind
        busy = record.x_before[row] > 0
        h    = record.h

        if kind in (EventKind.DEPARTURE, EventKind.END):
            # The headway in service completes when the fluid content reaches x - 1.
            tau_prime = self.__tau_prime(1.0, 0.0, -h, d.xprime[row], record)
            if kind == EventKind.END:
                d.xprime[row] = 0.0
        elif kind == EventKind.G2R:
            intersection = INTERSECTION[i] - 1
            tau_prime = self.__tau_prime(1.0, -_unit(i), 1.0, d.zprime[intersection], record)
            if busy:
                d.xprime[row] -= h * tau_prime
            d.last_g2r_prime[i - 1] = tau_prime
        elif kind == EventKind.R2G:
            tau_prime = _unit(PERPENDICULAR[i]) + d.last_g2r_prime[i - 1]
            if busy:
                d.xprime[row] += h * tau_prime
            d.last_r2g_prime[i - 1] = tau_prime
            d.zprime[INTERSECTION[i] - 1] = -d.last_r2g_prime[i - 1]
        elif kind == EventKind.START:
            # Arrivals are exogenous. A START induced by a departure or a join shares its
            # time, and the rate change was applied by that event.
            tau_prime = d.cause_prime.copy() if record.induced else np.zeros(4)
        elif kind in (EventKind.THRESHOLD_UP, EventKind.THRESHOLD_DOWN):
            tau_prime = d.cause_prime.copy()
            d.rprime[row] = 0.0
        else:
            return None
        return tau_prime

    def __tau_prime(self, dg_dx, dg_dtheta, f_before, xprime_before, record):
        return endogenous_tau_prime(dg_dx, dg_dtheta, f_before, xprime_before,
                                    strict = self.__strict, time = record.time, kind = record.kind)

    def __rate_h(self, road, record):
        if self.__estimator is not None:
            return self.__estimator.h(road, record.time)
        return self.__config.departure_rate(road)
