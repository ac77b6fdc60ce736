'''Experiment definitions read from YAML configuration files.

A configuration file has the sections ``network``, ``theta``, ``cost`` and ``optimizer``,
and optionally ``experiment``. Every key has a default, so an empty file describes the
reference setting: arrival rates [0.41, 0.45, 0.32], departure rates [1.2, 1.3, 1.2, 1.1],
T = 1000 s, L = 35, initial GREEN durations [40, 20, 20, 40] within [10, 50].

Example::

    network:
      segment_length: 100
    cost:
      metric: power
      power: 2
    experiment:
      name: power-l100
      seed: 7
'''

import math
from pathlib import Path

import yaml

from .cost import CostFunction, CostMetric
from .network import ConfigurationError, DelayMode, NetworkConfig, ThetaVector
from .optimizer import Optimizer
from .util import derive_seeds


SECTIONS = {
    'network': {
        'arrival_rates', 'departure_rates', 'segment_length', 'vehicle_length', 'burst_speed',
        'join_epsilon', 'horizon', 'queue_capacities', 'initial_queues', 'initial_clocks',
        'burst_speed_spread', 'multi_burst', 'strict_single_burst',
    },
    'theta': {'initial', 'min', 'max'},
    'cost': {'metric', 'weights', 'power', 'thresholds'},
    'optimizer': {
        'c0', 'kappa', 'replications', 'max_iterations', 'tolerance', 'patience',
        'gradient_tolerance', 'divergence_factor', 'common_random_numbers', 'cycle_lengths',
        'workers', 'estimation_window', 'estimate_rates', 'normalize_gradient',
    },
    'experiment': {'name', 'delay_mode', 'segment_lengths', 'seed', 'seeds', 'output'},
}

OPTIMIZER_DEFAULTS = {
    'c0': 5.0,
    'kappa': 0.6,
    'replications': 10,
    'max_iterations': 50,
    'tolerance': 1e-3,
    'patience': 3,
    'gradient_tolerance': 1e-9,
    'divergence_factor': 10.0,
    'common_random_numbers': True,
    'cycle_lengths': None,
    'workers': 1,
    'estimation_window': 100.0,
    'estimate_rates': True,
    'normalize_gradient': True,
}


def _number(section, key, value, integer = False):
    # PyYAML reads 1e-3 as a string, so numeric strings are accepted as well.
    if isinstance(value, bool):
        raise ConfigurationError(section, key, f'must be a number, but it was {value!r}')
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(section, key, f'must be a number, but it was {value!r}')
    if not math.isfinite(number):
        raise ConfigurationError(section, key, f'must be finite, but it was {value!r}')
    if integer:
        if number != int(number):
            raise ConfigurationError(section, key, f'must be an integer, but it was {value!r}')
        return int(number)
    return number


def _numbers(section, key, value, integer = False):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [None if item is None else _number(section, key, item, integer) for item in value]
    return _number(section, key, value, integer)


def _flag(section, key, value):
    if not isinstance(value, bool):
        raise ConfigurationError(section, key, f'must be true or false, but it was {value!r}')
    return value


class ExperimentSpec:
    '''Complete description of one experiment.

    Parameters
    ----------
    name : str
        Experiment name, used for output file names.
    network : NetworkConfig
        Network, including the segment length L of single runs.
    theta0 : ThetaVector
        Initial GREEN durations and their box.
    cost : CostFunction
        Cost to evaluate and minimize.
    delay_mode : DelayMode
        Transit model of single runs.
    segment_lengths : list of float
        Values of L visited by the L sweep.
    seed : int
        Base seed of the experiment.
    seeds : list of int
        Seeds of the evaluation runs.
    output : pathlib.Path
        Output directory.
    optimizer : dict
        Optimizer settings, see :data:`OPTIMIZER_DEFAULTS`.
    '''

    def __init__(self, name = 'experiment', network = None, theta0 = None, cost = None,
                 delay_mode = DelayMode.WITH_DELAY, segment_lengths = (0.0, 35.0, 70.0, 100.0),
                 seed = 0, seeds = None, output = 'results', optimizer = None):
        if not isinstance(delay_mode, DelayMode):
            raise TypeError('delay_mode must be one of DelayMode enum')
        if not segment_lengths:
            raise ConfigurationError('experiment', 'segment_lengths', 'must not be empty')
        if any(length < 0 for length in segment_lengths):
            raise ConfigurationError('experiment', 'segment_lengths', 'lengths must be non-negative')

        settings = dict(OPTIMIZER_DEFAULTS)
        settings.update(optimizer or {})

        self.__name            = str(name)
        self.__network         = network if network is not None else NetworkConfig()
        self.__theta0          = theta0 if theta0 is not None else ThetaVector([40, 20, 20, 40])
        self.__cost            = cost if cost is not None else CostFunction()
        self.__delay_mode      = delay_mode
        self.__segment_lengths = [float(length) for length in segment_lengths]
        self.__seed            = int(seed)
        self.__seeds           = list(seeds) if seeds is not None else derive_seeds(self.__seed, 10, stream = 1)
        self.__output          = Path(output)
        self.__optimizer       = settings

    @property
    def name(self):
        '''str: Experiment name.'''
        return self.__name

    @property
    def network(self):
        '''NetworkConfig: Network of single runs.'''
        return self.__network

    @property
    def theta0(self):
        '''ThetaVector: Initial GREEN durations.'''
        return self.__theta0

    @property
    def cost(self):
        '''CostFunction: Cost to evaluate and minimize.'''
        return self.__cost

    @property
    def delay_mode(self):
        '''DelayMode: Transit model of single runs.'''
        return self.__delay_mode

    @property
    def segment_lengths(self):
        '''list of float: Values of L of the L sweep.'''
        return list(self.__segment_lengths)

    @property
    def seed(self):
        '''int: Base seed.'''
        return self.__seed

    @property
    def seeds(self):
        '''list of int: Seeds of the evaluation runs.'''
        return list(self.__seeds)

    @property
    def output(self):
        '''pathlib.Path: Output directory.'''
        return self.__output

    @property
    def optimizer_settings(self):
        '''dict: Optimizer settings.'''
        return dict(self.__optimizer)

    def simulator_options(self):
        '''Keyword arguments of :class:`Simulator` shared by all runs of the experiment.'''
        return {
            'estimation_window': self.__optimizer['estimation_window'],
            'estimate_rates': self.__optimizer['estimate_rates'],
        }

    def make_optimizer(self, network = None, delay_mode = None):
        '''Optimizer configured by this experiment.

        Parameters
        ----------
        network : NetworkConfig or None
            Network to optimize, the experiment network if None.
        delay_mode : DelayMode or None
            Transit model, the experiment delay mode if None.
        '''
        settings = self.__optimizer
        return Optimizer(
            network if network is not None else self.__network,
            self.__cost,
            delay_mode = delay_mode if delay_mode is not None else self.__delay_mode,
            c0 = settings['c0'],
            kappa = settings['kappa'],
            replications = settings['replications'],
            max_iterations = settings['max_iterations'],
            tolerance = settings['tolerance'],
            patience = settings['patience'],
            gradient_tolerance = settings['gradient_tolerance'],
            divergence_factor = settings['divergence_factor'],
            common_random_numbers = settings['common_random_numbers'],
            base_seed = self.__seed,
            workers = settings['workers'],
            cycle_lengths = settings['cycle_lengths'],
            normalize_gradient = settings['normalize_gradient'],
            simulator_options = self.simulator_options(),
        )

    def replace(self, seed = None, output = None, metric = None, delay_mode = None):
        '''Copy of this experiment with command line overrides applied.

        Parameters
        ----------
        seed : int or None
            New base seed. The evaluation seeds are derived from it again unless they
            were listed explicitly.
        output : path-like object or None
            New output directory.
        metric : CostMetric, str or None
            New metric, keeping weights, power and thresholds.
        delay_mode : DelayMode, str or None
            New transit model.
        '''
        cost = self.__cost
        if metric is not None:
            cost = CostFunction(CostMetric.from_str(metric), cost.weights, cost.power, cost.thresholds)
        seeds = self.__seeds
        if seed is not None and seeds == derive_seeds(self.__seed, len(seeds), stream = 1):
            seeds = derive_seeds(seed, len(seeds), stream = 1)
        return ExperimentSpec(
            name            = self.__name,
            network         = self.__network,
            theta0          = self.__theta0,
            cost            = cost,
            delay_mode      = DelayMode.from_flag(delay_mode) if delay_mode is not None else self.__delay_mode,
            segment_lengths = self.__segment_lengths,
            seed            = self.__seed if seed is None else seed,
            seeds           = seeds,
            output          = self.__output if output is None else output,
            optimizer       = self.__optimizer,
        )

    def __str__(self):
        return (f'{self.__name}: {self.__cost}, {self.__delay_mode.name.lower()}, '
                f'theta0={self.__theta0}, L={self.__network.segment_length}')


def experiment_from_dict(data):
    '''Build an :class:`ExperimentSpec` from the parsed content of a configuration file.

    Parameters
    ----------
    data : dict or None
        Sections of the configuration. None is an empty configuration.

    Returns
    -------
    ExperimentSpec
        Validated experiment.

    Raises
    ------
    ConfigurationError
        If a section or key is unknown, or a value is malformed or invalid.

    Examples
    --------
    >>> spec = experiment_from_dict({'cost': {'metric': 'power'}, 'network': {'segment_length': 100}})
    >>> spec.cost.metric, spec.network.segment_length
    (<CostMetric.POWER: 'power'>, 100.0)
    '''
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError('file', '', 'the configuration must be a mapping of sections')
    for section, content in data.items():
        if section not in SECTIONS:
            raise ConfigurationError(section, '', f'unknown section, use one of {", ".join(sorted(SECTIONS))}')
        if content is None:
            continue
        if not isinstance(content, dict):
            raise ConfigurationError(section, '', 'must be a mapping')
        for key in content:
            if key not in SECTIONS[section]:
                raise ConfigurationError(section, key, 'unknown key')

    network_section    = dict(data.get('network') or {})
    theta_section      = dict(data.get('theta') or {})
    cost_section       = dict(data.get('cost') or {})
    optimizer_section  = dict(data.get('optimizer') or {})
    experiment_section = dict(data.get('experiment') or {})

    network_kwargs = {}
    for key, value in network_section.items():
        if key in ('multi_burst', 'strict_single_burst'):
            network_kwargs[key] = _flag('network', key, value)
        elif key == 'initial_queues':
            network_kwargs[key] = _numbers('network', key, value, integer = True)
        else:
            network_kwargs[key] = _numbers('network', key, value)
    network = NetworkConfig(**network_kwargs)

    try:
        theta0 = ThetaVector(_numbers('theta', 'initial', theta_section.get('initial', [40, 20, 20, 40])),
                             _numbers('theta', 'min', theta_section.get('min', 10.0)),
                             _numbers('theta', 'max', theta_section.get('max', 50.0)))
    except ValueError as error:
        if isinstance(error, ConfigurationError):
            raise
        raise ConfigurationError('theta', 'initial', str(error))

    try:
        metric = CostMetric.from_str(str(cost_section.get('metric', 'avg')))
    except ValueError as error:
        raise ConfigurationError('cost', 'metric', str(error))
    try:
        cost = CostFunction(metric,
                            _numbers('cost', 'weights', cost_section.get('weights', 1.0)),
                            _number('cost', 'power', cost_section.get('power', 2), integer = True),
                            _numbers('cost', 'thresholds', cost_section.get('thresholds', 25.0)))
    except (TypeError, ValueError) as error:
        if isinstance(error, ConfigurationError):
            raise
        raise ConfigurationError('cost', '', str(error))

    optimizer = {}
    for key, value in optimizer_section.items():
        if key in ('common_random_numbers', 'estimate_rates', 'normalize_gradient'):
            optimizer[key] = _flag('optimizer', key, value)
        elif key in ('replications', 'max_iterations', 'patience', 'workers'):
            optimizer[key] = _number('optimizer', key, value, integer = True)
            if optimizer[key] < 1:
                raise ConfigurationError('optimizer', key, 'must be at least 1')
        elif key == 'cycle_lengths':
            lengths = _numbers('optimizer', key, value)
            if lengths is not None and (not isinstance(lengths, list) or len(lengths) != 2):
                raise ConfigurationError('optimizer', key, 'must be a list [C1, C2]')
            optimizer[key] = lengths
        else:
            optimizer[key] = _number('optimizer', key, value)
    for key in ('c0', 'estimation_window'):
        if key in optimizer and optimizer[key] <= 0:
            raise ConfigurationError('optimizer', key, 'must be positive')
    if optimizer.get('divergence_factor', 10.0) <= 1:
        raise ConfigurationError('optimizer', 'divergence_factor', 'must exceed 1')
    lengths = optimizer.get('cycle_lengths')
    if lengths is not None:
        for intersection, length in zip((1, 2), lengths):
            if not math.isclose(theta0.cycle(intersection), length):
                raise ConfigurationError('optimizer', 'cycle_lengths',
                                         f'initial theta does not match the cycle length {length} of intersection {intersection}')

    seed = _number('experiment', 'seed', experiment_section.get('seed', 0), integer = True)
    seeds = experiment_section.get('seeds', 10)
    if isinstance(seeds, list):
        seeds = _numbers('experiment', 'seeds', seeds, integer = True)
    else:
        count = _number('experiment', 'seeds', seeds, integer = True)
        if count < 1:
            raise ConfigurationError('experiment', 'seeds', 'must be at least 1')
        seeds = derive_seeds(seed, count, stream = 1)
    if not seeds:
        raise ConfigurationError('experiment', 'seeds', 'must not be empty')

    segment_lengths = _numbers('experiment', 'segment_lengths',
                               experiment_section.get('segment_lengths', [0.0, 35.0, 70.0, 100.0]))
    if not isinstance(segment_lengths, list):
        segment_lengths = [segment_lengths]

    return ExperimentSpec(
        name            = experiment_section.get('name', 'experiment'),
        network         = network,
        theta0          = theta0,
        cost            = cost,
        delay_mode      = DelayMode.from_flag(experiment_section.get('delay_mode', 'with_delay')),
        segment_lengths = segment_lengths,
        seed            = seed,
        seeds           = seeds,
        output          = experiment_section.get('output', 'results'),
        optimizer       = optimizer,
    )


def load_experiment(path):
    '''Read and validate a YAML configuration file.

    Parameters
    ----------
    path : path-like object
        Configuration file.

    Returns
    -------
    ExperimentSpec
        Validated experiment.

    Raises
    ------
    ConfigurationError
        If the file cannot be read or parsed, or its content is invalid.
    '''
    path = Path(path)
    try:
        with open(path) as config_file:
            data = yaml.safe_load(config_file)
    except OSError as error:
        raise ConfigurationError('file', str(path), f'cannot be read: {error.strerror}')
    except yaml.YAMLError as error:
        raise ConfigurationError('file', str(path), f'is not valid YAML: {error}')
    return experiment_from_dict(data)
