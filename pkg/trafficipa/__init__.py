'''This is the top page of PyTrafficIPA API Reference

The tables below or the left pane include the links to API documents of individual classes and functions.

It is recommended to see :ref:`getting-started` for typical usage of this API.
'''

from .network import (ROADS, QUEUES, ARRIVAL_ROADS, queue_index, ConfigurationError, NetworkConfig,
                      ThetaVector, QueueState, DelayMode, light_phase, generate_arrivals)
from .events import EventKind, EventRecord
from .transit import (ModelViolationError, JoinOutcome, Inflow, TransitBurst, tau, start_burst, on_jk,
                      accumulate_transit, detect_threshold_events, multi_burst_step)
from .estimation import estimate_alpha, estimate_h, RateEstimate, RateEstimator
from .ipa import (SingularEventError, ProtocolError, UnsupportedModeError, boundary_update, endogenous_tau_prime,
                  collapsed_sigma_prime, unrolled_sigma_prime, IpaDerivatives, IpaEngine)
from .cost import (CostMetric, CostFunction, accumulate_cost, NonEmptyPeriod, ThresholdInterval, power_gradient,
                   threshold_gradient, CostResult, CostAccumulator, RECORD_HEADER, write_records)
from .simulator import SimulationError, Trajectory, Simulator, run
from .optimizer import HISTORY_HEADER, OptimizationDivergedError, IterationRecord, OptimizerState, step, GradientCheck, Optimizer, write_gradient_checks
from .experiment import ExperimentSpec, experiment_from_dict, load_experiment
from .util import derive_seeds, write_csv, read_csv

__all__ = [
    'ROADS',
    'QUEUES',
    'ARRIVAL_ROADS',
    'queue_index',
    'ConfigurationError',
    'NetworkConfig',
    'ThetaVector',
    'QueueState',
    'DelayMode',
    'light_phase',
    'generate_arrivals',

    'EventKind',
    'EventRecord',

    'ModelViolationError',
    'JoinOutcome',
    'Inflow',
    'TransitBurst',
    'tau',
    'start_burst',
    'on_jk',
    'accumulate_transit',
    'detect_threshold_events',
    'multi_burst_step',

    'estimate_alpha',
    'estimate_h',
    'RateEstimate',
    'RateEstimator',

    'SingularEventError',
    'ProtocolError',
    'UnsupportedModeError',
    'boundary_update',
    'endogenous_tau_prime',
    'collapsed_sigma_prime',
    'unrolled_sigma_prime',
    'IpaDerivatives',
    'IpaEngine',

    'CostMetric',
    'CostFunction',
    'accumulate_cost',
    'NonEmptyPeriod',
    'ThresholdInterval',
    'power_gradient',
    'threshold_gradient',
    'CostResult',
    'CostAccumulator',
    'RECORD_HEADER',
    'write_records',

    'SimulationError',
    'Trajectory',
    'Simulator',
    'run',

    'HISTORY_HEADER',
    'OptimizationDivergedError',
    'IterationRecord',
    'OptimizerState',
    'step',
    'GradientCheck',
    'Optimizer',
    'write_gradient_checks',

    'ExperimentSpec',
    'experiment_from_dict',
    'load_experiment',

    'derive_seeds',
    'write_csv',
    'read_csv',
]
