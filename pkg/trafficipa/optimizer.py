'''Projected gradient descent on the GREEN durations driven by IPA gradient estimates.'''

import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cost import CostFunction
from .network import DelayMode, ThetaVector
from .simulator import Simulator
from .util import derive_seeds, write_csv


HISTORY_HEADER = ['k', 'theta_1', 'theta_2', 'theta_3', 'theta_4', 'F_mean', 'F_std',
                  'Q_1', 'Q_2', 'Q_3', 'Q_4', 'c_k']

GRADIENT_CHECK_HEADER = ['theta_index', 'theta', 'ipa', 'finite_difference', 'relative_error', 'smooth', 'passed']


class OptimizationDivergedError(RuntimeError):
    '''Raised if the mean cost grows beyond the allowed multiple of the initial cost.

    Parameters
    ----------
    iteration : int
        Iteration at which the divergence was detected.
    cost : float
        Mean cost of that iteration.
    initial_cost : float
        Mean cost of the first iteration.
    history : list of IterationRecord
        All iterations so far.
    '''

    def __init__(self, iteration, cost, initial_cost, history):
        self.__iteration    = iteration
        self.__cost         = cost
        self.__initial_cost = initial_cost
        self.__history      = history
        msg = f'Optimization diverged at iteration {iteration}: cost {cost:.6g} exceeds the initial cost {initial_cost:.6g}'
        super().__init__(msg)

    @property
    def iteration(self):
        '''int: Iteration at which the divergence was detected.'''
        return self.__iteration

    @property
    def cost(self):
        '''float: Mean cost of that iteration.'''
        return self.__cost

    @property
    def initial_cost(self):
        '''float: Mean cost of the first iteration.'''
        return self.__initial_cost

    @property
    def history(self):
        '''list of IterationRecord: Iterations until the divergence.'''
        return self.__history


class IterationRecord:
    '''One iteration of the optimizer: theta_k, the mean and spread of the cost, Q_k and c_k.'''

    def __init__(self, k, theta, cost_mean, cost_std, gradient, step_size):
        self.k         = k
        self.theta     = theta
        self.cost_mean = float(cost_mean)
        self.cost_std  = float(cost_std)
        self.gradient  = np.asarray(gradient, dtype = float)
        self.step_size = float(step_size)

    def as_row(self):
        '''Row of the history CSV.'''
        return [self.k, *self.theta.values.tolist(), self.cost_mean, self.cost_std,
                *self.gradient.tolist(), self.step_size]

    def __str__(self):
        gradient = ', '.join(f'{value:.4g}' for value in self.gradient)
        return f'k={self.k}: theta={self.theta}, F={self.cost_mean:.6g} (std {self.cost_std:.3g}), Q=[{gradient}]'


class OptimizerState:
    '''State of the projected gradient descent.

    Parameters
    ----------
    theta : ThetaVector
        Current GREEN durations theta_k.
    k : int
        Iteration index, starting at 1.
    c0 : float
        Initial step size.
    kappa : float
        Decay exponent of the step size, c_k = c0 / k^kappa.
    gradient : array_like or None
        Gradient estimate Q_k, None until it is estimated.
    replications : int
        Number R of sample paths per gradient estimate.
    tolerance : float
        Cost change tolerance of the stop rule.
    cycle_lengths : sequence of float or None
        Fixed cycle lengths (C1, C2) with theta_1 + theta_3 = C1 and theta_2 + theta_4 = C2,
        or None for independent GREEN durations.
    normalize_gradient : bool
        Divide Q_k by its largest absolute entry before the step, so that no GREEN duration
        moves by more than c_k seconds per iteration.
    history : list of IterationRecord
        Iterations done so far.
    '''

    def __init__(self, theta, k = 1, c0 = 5.0, kappa = 0.6, gradient = None, replications = 10,
                 tolerance = 1e-3, cycle_lengths = None, normalize_gradient = False, history = None):
        if not isinstance(theta, ThetaVector):
            raise TypeError('theta must be an instance of ThetaVector')
        if k < 1:
            raise ValueError(f'k must be at least 1, but it was {k}')
        if c0 <= 0:
            raise ValueError(f'c0 must be positive, but it was {c0}')
        if kappa < 0:
            raise ValueError(f'kappa must be non-negative, but it was {kappa}')
        if replications < 1:
            raise ValueError(f'replications must be at least 1, but it was {replications}')
        if cycle_lengths is not None:
            cycle_lengths = tuple(float(length) for length in cycle_lengths)
            if len(cycle_lengths) != 2:
                raise ValueError('cycle_lengths must have 2 elements')
            for intersection, length in zip((1, 2), cycle_lengths):
                if not math.isclose(theta.cycle(intersection), length, rel_tol = 1e-9, abs_tol = 1e-9):
                    raise ValueError(f'theta {theta} does not match cycle length {length} of intersection {intersection}')

        self.theta         = theta
        self.k             = k
        self.c0            = float(c0)
        self.kappa         = float(kappa)
        self.gradient      = None if gradient is None else np.asarray(gradient, dtype = float)
        self.replications  = replications
        self.tolerance     = tolerance
        self.cycle_lengths = cycle_lengths
        self.normalize_gradient = bool(normalize_gradient)
        self.history       = [] if history is None else history

    @property
    def step_size(self):
        '''float: Step size c_k of the current iteration.'''
        return self.c0 / self.k ** self.kappa

    @property
    def direction(self):
        '''numpy.ndarray: Q_k, scaled to a largest absolute entry of 1 if the gradient is normalized.'''
        if self.gradient is None:
            return None
        scale = np.abs(self.gradient).max()
        if self.normalize_gradient and scale > 0:
            return self.gradient / scale
        return self.gradient


def _coupled_step(theta, gradient, step_size, cycle_lengths):
    values    = theta.values
    theta_min = theta.theta_min
    theta_max = theta.theta_max
    for first, second, length in ((0, 2, cycle_lengths[0]), (1, 3, cycle_lengths[1])):
        # theta_second = C - theta_first, so the first coordinate moves along Q_first - Q_second.
        reduced = gradient[first] - gradient[second]
        lower   = max(theta_min[first], length - theta_max[second])
        upper   = min(theta_max[first], length - theta_min[second])
        values[first]  = min(max(values[first] - step_size * reduced, lower), upper)
        values[second] = length - values[first]
    return ThetaVector(values, theta_min, theta_max)


def step(state):
    '''One projected gradient step theta_{k+1} = clip(theta_k - c_k Q_k).

    With ``normalize_gradient`` set, Q_k is replaced by Q_k / max_j |Q_kj|.

    Parameters
    ----------
    state : OptimizerState
        State with the gradient Q_k estimated.

    Returns
    -------
    OptimizerState
        State of iteration k + 1 sharing the history of ``state``.

    Raises
    ------
    ValueError
        If the gradient has not been estimated.

    Examples
    --------
    >>> state = OptimizerState(ThetaVector([40, 20, 20, 40]), gradient = [1, 0, 0, 0])
    >>> step(state).theta.values.tolist()
    [35.0, 20.0, 20.0, 40.0]
    >>> state = OptimizerState(ThetaVector([40, 20, 20, 40]), gradient = [400, -200, 0, 0], normalize_gradient = True)
    >>> step(state).theta.values.tolist()
    [35.0, 22.5, 20.0, 40.0]
    '''
    if state.gradient is None:
        raise ValueError(f'the gradient of iteration {state.k} has not been estimated')

    if state.cycle_lengths is None:
        theta = state.theta.clip(state.theta.values - state.step_size * state.direction)
    else:
        theta = _coupled_step(state.theta, state.direction, state.step_size, state.cycle_lengths)
    return OptimizerState(theta, k = state.k + 1, c0 = state.c0, kappa = state.kappa,
                          replications = state.replications, tolerance = state.tolerance,
                          cycle_lengths = state.cycle_lengths, normalize_gradient = state.normalize_gradient,
                          history = state.history)


def _replicate(config, theta, seed, delay_mode, cost, simulator_options):
    # Module level so that it can be sent to worker processes.
    trajectory = Simulator(config, theta, seed, delay_mode = delay_mode, costs = (cost,),
                           **simulator_options).run()
    result = trajectory.result()
    return result.value, result.gradient


class GradientCheck:
    '''Comparison of the IPA gradient with a same-seed central finite difference for one coordinate.'''

    def __init__(self, index, theta, ipa, finite_difference, smooth, relative_tolerance = 0.05, absolute_tolerance = 1e-3):
        self.index             = index
        self.theta             = float(theta)
        self.ipa               = float(ipa)
        self.finite_difference = float(finite_difference)
        self.smooth            = smooth
        error = abs(self.ipa - self.finite_difference)
        scale = abs(self.finite_difference)
        self.relative_error = error / scale if scale > 0 else (0.0 if error == 0 else math.inf)
        self.passed = error <= absolute_tolerance or self.relative_error <= relative_tolerance

    def as_row(self):
        '''Row of the gradient check CSV.'''
        return [self.index + 1, self.theta, self.ipa, self.finite_difference, self.relative_error,
                self.smooth, self.passed if self.smooth else '']


class Optimizer:
    '''Iterative projected gradient descent using IPA gradients averaged over replications.

    Parameters
    ----------
    config : NetworkConfig
        Network to optimize.
    cost : CostFunction
        Cost to minimize.
    delay_mode : DelayMode
        Transit model used by the simulations.
    c0 : float
        Initial step size.
    kappa : float
        Decay exponent of the step size.
    replications : int
        Sample paths R per iteration.
    max_iterations : int
        Upper bound of iterations.
    tolerance : float
        The optimizer stops when the mean cost changes by less than this value for
        ``patience`` consecutive iterations.
    patience : int
        Consecutive iterations within ``tolerance``.
    gradient_tolerance : float
        The optimizer stops when the norm of the gradient estimate does not exceed this value.
    divergence_factor : float
        The optimizer aborts when the mean cost exceeds this multiple of the initial cost.
    common_random_numbers : bool
        Use the same seeds at every iteration.
    base_seed : int
        Seed from which the replication seeds are derived.
    workers : int
        Worker processes running the replications. 1 runs them in this process.
    cycle_lengths : sequence of float or None
        Fixed cycle lengths (C1, C2), or None.
    normalize_gradient : bool
        Step along the gradient scaled to a largest absolute entry of 1.
    simulator_options : dict or None
        Other arguments of :class:`Simulator`.
    '''

    def __init__(self, config, cost, delay_mode = DelayMode.WITH_DELAY, c0 = 5.0, kappa = 0.6,
                 replications = 10, max_iterations = 50, tolerance = 1e-3, patience = 3,
                 gradient_tolerance = 1e-9, divergence_factor = 10.0, common_random_numbers = True,
                 base_seed = 0, workers = 1, cycle_lengths = None, normalize_gradient = True,
                 simulator_options = None):
        if not isinstance(cost, CostFunction):
            raise TypeError('cost must be an instance of CostFunction')
        if not isinstance(delay_mode, DelayMode):
            raise TypeError('delay_mode must be one of DelayMode enum')
        if max_iterations < 1:
            raise ValueError(f'max_iterations must be at least 1, but it was {max_iterations}')
        if patience < 1:
            raise ValueError(f'patience must be at least 1, but it was {patience}')
        if divergence_factor <= 1:
            raise ValueError(f'divergence_factor must exceed 1, but it was {divergence_factor}')
        if workers < 1:
            raise ValueError(f'workers must be at least 1, but it was {workers}')

        self.__logger = logging.getLogger(__name__)
        if not self.__logger.hasHandlers():
            log_handler   = logging.StreamHandler()
            log_formatter = logging.Formatter('%(asctime)s: %(levelname)s - %(message)s')
            log_handler.setFormatter(log_formatter)
            self.__logger.addHandler(log_handler)

        self.__config             = config
        self.__cost               = cost
        self.__delay_mode         = delay_mode
        self.__c0                 = c0
        self.__kappa              = kappa
        self.__replications       = replications
        self.__max_iterations     = max_iterations
        self.__tolerance          = tolerance
        self.__patience           = patience
        self.__gradient_tolerance = gradient_tolerance
        self.__divergence_factor  = divergence_factor
        self.__common_random_numbers = common_random_numbers
        self.__base_seed          = base_seed
        self.__workers            = workers
        self.__cycle_lengths      = cycle_lengths
        self.__normalize_gradient = normalize_gradient
        self.__simulator_options  = dict(simulator_options or {})
        self.__history            = []

    @property
    def logger(self):
        '''logging.Logger: Logger of this instance

        It may be useful to change logging settings like log level.

        Examples
        --------
        >>> import logging
        >>> optimizer = Optimizer(NetworkConfig(), CostFunction())
        >>> optimizer.logger.setLevel(logging.WARNING)
        '''
        return self.__logger

    @property
    def history(self):
        '''list of IterationRecord: Iterations of the last call of :meth:`optimize`.'''
        return self.__history

    def seeds(self, k):
        '''Replication seeds of iteration k.'''
        stream = 0 if self.__common_random_numbers else k
        return derive_seeds(self.__base_seed, self.__replications, stream = stream)

    def estimate_gradient(self, theta, seeds):
        '''Mean cost and mean IPA gradient over one sample path per seed.

        Parameters
        ----------
        theta : ThetaVector
            GREEN durations.
        seeds : sequence of int
            One seed per replication.

        Returns
        -------
        tuple
            (mean cost, standard deviation of the cost, mean gradient).

        Raises
        ------
        ValueError
            If no seed is given.
        '''
        if len(seeds) < 1:
            raise ValueError('at least one seed is required')

        arguments = [(self.__config, theta, seed, self.__delay_mode, self.__cost, self.__simulator_options)
                     for seed in seeds]
        if self.__workers > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers = min(self.__workers, len(seeds))) as executor:
                outcomes = list(executor.map(_replicate, *zip(*arguments)))
        else:
            outcomes = [_replicate(*argument) for argument in arguments]

        costs     = np.array([value for value, _ in outcomes])
        gradients = np.array([gradient for _, gradient in outcomes])
        cost_std  = float(costs.std(ddof = 1)) if costs.size > 1 else 0.0
        return float(costs.mean()), cost_std, gradients.mean(axis = 0)

    def optimize(self, theta0, progress = False):
        '''Run the projected gradient descent from theta0.

        Parameters
        ----------
        theta0 : ThetaVector
            Initial GREEN durations.
        progress : bool
            Show a progress bar if `tqdm <https://tqdm.github.io/>`_ is installed.

        Returns
        -------
        list of IterationRecord
            All iterations. The last one holds the final theta.

        Raises
        ------
        OptimizationDivergedError
            If the mean cost exceeds ``divergence_factor`` times the initial cost.
        '''
        state = OptimizerState(theta0, c0 = self.__c0, kappa = self.__kappa,
                               replications = self.__replications, tolerance = self.__tolerance,
                               cycle_lengths = self.__cycle_lengths, normalize_gradient = self.__normalize_gradient)
        self.__history = state.history

        progress_bar = None
        if progress:
            try:
                from tqdm import tqdm
                progress_bar = tqdm(desc = str(self.__cost), total = self.__max_iterations, unit = 'it')
            except ImportError:
                progress_bar = None

        try:
            calm_iterations = 0
            while True:
                cost_mean, cost_std, gradient = self.estimate_gradient(state.theta, self.seeds(state.k))
                state.gradient = gradient
                record = IterationRecord(state.k, state.theta, cost_mean, cost_std, gradient, state.step_size)
                state.history.append(record)
                self.__logger.info(f'{self.__cost} {record}')
                if progress_bar is not None:
                    progress_bar.update(1)

                initial_cost = state.history[0].cost_mean
                if initial_cost > 0 and cost_mean > self.__divergence_factor * initial_cost:
                    self.__logger.warning(f'cost {cost_mean:.6g} exceeds {self.__divergence_factor} times the initial cost, aborting')
                    raise OptimizationDivergedError(state.k, cost_mean, initial_cost, state.history)

                if np.linalg.norm(gradient) <= self.__gradient_tolerance:
                    self.__logger.info(f'gradient vanished at iteration {state.k}')
                    break
                if len(state.history) > 1 and abs(cost_mean - state.history[-2].cost_mean) < self.__tolerance:
                    calm_iterations += 1
                else:
                    calm_iterations = 0
                if calm_iterations >= self.__patience:
                    self.__logger.info(f'cost settled at iteration {state.k}')
                    break
                if state.k >= self.__max_iterations:
                    break
                state = step(state)
        finally:
            if progress_bar is not None:
                progress_bar.close()

        return state.history

    def finite_difference(self, theta, seed, step_size = 1e-3, relative_tolerance = 0.05, absolute_tolerance = 1e-3):
        '''Compare the IPA gradient of one sample path with same-seed central finite differences.

        A coordinate is smooth when the runs at theta - h and theta + h have the same
        event order as the run at theta. Non-smooth coordinates are reported but not judged.

        Parameters
        ----------
        theta : ThetaVector
            GREEN durations.
        seed : int
            Seed shared by all runs.
        step_size : float
            Perturbation h in seconds.
        relative_tolerance, absolute_tolerance : float
            A smooth coordinate passes if either tolerance is met.

        Returns
        -------
        list of GradientCheck
            One check per coordinate.
        '''
        if step_size <= 0:
            raise ValueError(f'step_size must be positive, but it was {step_size}')

        def simulate(values):
            return Simulator(self.__config, values, seed, delay_mode = self.__delay_mode,
                             costs = (self.__cost,), **self.__simulator_options).run()

        nominal = simulate(theta)
        checks  = []
        for index in range(4):
            lower = simulate(theta.perturbed(index, -step_size))
            upper = simulate(theta.perturbed(index, step_size))
            smooth = lower.kinds() == nominal.kinds() == upper.kinds()
            difference = (upper.result().value - lower.result().value) / (2 * step_size)
            check = GradientCheck(index, theta[index], nominal.result().gradient[index], difference, smooth,
                                  relative_tolerance, absolute_tolerance)
            if not smooth:
                self.__logger.warning(f'theta_{index + 1}: event order changes within +/-{step_size}, non-smooth sample')
            checks.append(check)
        return checks

    def write_history(self, path):
        '''Write the history CSV (k, theta_1..4, F_mean, F_std, Q_1..4, c_k).'''
        return write_csv(path, HISTORY_HEADER, (record.as_row() for record in self.__history))


def write_gradient_checks(path, checks):
    '''Write the result of :meth:`Optimizer.finite_difference` to a CSV file.'''
    return write_csv(path, GRADIENT_CHECK_HEADER, (check.as_row() for check in checks))
