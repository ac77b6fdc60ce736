from enum import Enum

from .network import QUEUES


class EventKind(Enum):
    '''Kind of an event observed along a sample path.'''

    ARRIVAL        = 'Gamma'
    DEPARTURE      = 'D'
    START          = 'S'
    END            = 'E'
    G2R            = 'G2R'
    R2G            = 'R2G'
    JOIN           = 'J'
    THRESHOLD_UP   = 'Z'
    THRESHOLD_DOWN = 'Zbar'
    MERGE          = 'Jmerge'
    BURST_JOINED   = 'Ed'

    def __init__(self, identifier):
        self.__identifier = identifier

    @property
    def identifier(self):
        '''str: Short name used in CSV files, like "G2R" or "Zbar".'''
        return self.__identifier

    @classmethod
    def from_str(cls, identifier):
        '''Return the kind whose identifier is the given string.

        Raises
        ------
        ValueError
            If no kind has the identifier.
        '''
        for kind in cls:
            if kind.identifier == identifier:
                return kind
        raise ValueError(f'"{identifier}" is not a valid event kind')

    def __str__(self):
        return self.identifier


class EventRecord:
    '''One timestamped event of a sample path.

    Parameters
    ----------
    kind : EventKind
        Kind of the event.
    time : float
        Occurrence time in seconds.
    queue : int
        Queue affected by the event (1, 2, 3, 4 or 12).
    x_before : tuple of int
        Contents of queues 1, 2, 3, 4 and 12 just before the event.
    x_after : tuple of int
        Contents of queues 1, 2, 3, 4 and 12 just after the event.
    lights : tuple of bool
        Light states G1 to G4 just after the event.
    alpha : float
        Estimated inflow rate of the queue at the event time. For queue 12 it is the
        arrival rate of road 1.
    h : float
        Estimated service rate of the queue at the event time. For queue 12 it is the
        departure rate of road 1.
    burst : int or None
        Index n of the flow burst involved, if any.
    k : int or None
        Index k of a J_k event.
    final : bool
        True for the J_K event at which the burst actually joins road 2.
    induced : bool
        True if the event is induced by a light switch (endogenous S events).
    appended : bool
        True for an S event of queue 12 that resumes the inflow of a burst still in transit.
    speed : float or None
        Speed of the burst involved, if any.
    '''

    def __init__(self, kind, time, queue, x_before, x_after, lights,
                 alpha = 0.0, h = 0.0, burst = None, k = None,
                 final = False, induced = False, appended = False, speed = None):
        if not isinstance(kind, EventKind):
            raise TypeError('kind must be one of EventKind enum')
        if queue not in QUEUES:
            raise ValueError(f'queue must be one of {QUEUES}, but it was {queue}')

        self.__kind     = kind
        self.__time     = float(time)
        self.__queue    = queue
        self.__x_before = tuple(x_before)
        self.__x_after  = tuple(x_after)
        self.__lights   = tuple(bool(light) for light in lights)
        self.__alpha    = float(alpha)
        self.__h        = float(h)
        self.__burst    = burst
        self.__k        = k
        self.__final    = final
        self.__induced  = induced
        self.__appended = appended
        self.__speed    = speed

    @property
    def kind(self):
        '''EventKind: Kind of this event.'''
        return self.__kind

    @property
    def time(self):
        '''float: Occurrence time.'''
        return self.__time

    @property
    def queue(self):
        '''int: Affected queue.'''
        return self.__queue

    @property
    def x_before(self):
        '''tuple: Contents of queues 1, 2, 3, 4, 12 just before the event.'''
        return self.__x_before

    @property
    def x_after(self):
        '''tuple: Contents of queues 1, 2, 3, 4, 12 just after the event.'''
        return self.__x_after

    @property
    def lights(self):
        '''tuple: G1 to G4 just after the event.'''
        return self.__lights

    @property
    def alpha(self):
        '''float: Estimated inflow rate observed at the event.'''
        return self.__alpha

    @property
    def h(self):
        '''float: Estimated service rate observed at the event.'''
        return self.__h

    @property
    def burst(self):
        '''int or None: Burst index n.'''
        return self.__burst

    @property
    def k(self):
        '''int or None: J_k index.'''
        return self.__k

    @property
    def final(self):
        '''bool: True for J_K.'''
        return self.__final

    @property
    def induced(self):
        '''bool: True if induced by a light switch.'''
        return self.__induced

    @property
    def appended(self):
        '''bool: True if the event resumes the inflow of an active burst.'''
        return self.__appended

    @property
    def speed(self):
        '''float or None: Speed of the burst involved.'''
        return self.__speed

    def green(self, road):
        '''True if the given road (1 to 4) is GREEN just after the event.'''
        return self.__lights[road - 1]

    def __str__(self):
        suffix = '' if self.__k is None else f'_{self.__k}'
        return f'{self.__time:.6f} {self.__kind.identifier}{suffix} queue={self.__queue}'
