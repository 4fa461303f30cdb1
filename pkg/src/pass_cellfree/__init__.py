"""Sum-rate maximization for pinching-antenna (PASS) assisted cell-free downlinks."""

from .baselines import SCHEMES, run_continuous_pass, run_discrete_pass, run_mimo, run_scheme, run_uniform_pass
from .channel import ChannelSet, assemble_channels
from .harness import ExperimentSpec, run_experiment
from .scenario import ConfigError, Deployment, Scenario, SystemConfig, build_scenario, initial_deployment
from .wmmse_driver import OptimizationResult, OptimizerOptions, maximize_sum_rate

__all__ = [
    "SCHEMES",
    "ChannelSet",
    "ConfigError",
    "Deployment",
    "ExperimentSpec",
    "OptimizationResult",
    "OptimizerOptions",
    "Scenario",
    "SystemConfig",
    "assemble_channels",
    "build_scenario",
    "initial_deployment",
    "maximize_sum_rate",
    "run_continuous_pass",
    "run_discrete_pass",
    "run_experiment",
    "run_mimo",
    "run_scheme",
    "run_uniform_pass",
]
