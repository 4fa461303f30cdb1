"""The proposed scheme and its three benchmarks, behind one selector."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .channel import ula_channels
from .scenario import Scenario, initial_deployment, snap_to_sockets
from .wmmse_driver import OptimizationResult, OptimizerOptions, maximize_sum_rate

SCHEMES = ("c_pass", "d_pass", "u_pass", "mimo")
DEFAULT_SOCKETS = 27


def run_continuous_pass(scenario: Scenario, options: Optional[OptimizerOptions] = None) -> OptimizationResult:
    opt = (options or OptimizerOptions()).with_sockets(None)
    return maximize_sum_rate(scenario, replace(opt, skip_pinching=False))


def run_discrete_pass(
    scenario: Scenario,
    options: Optional[OptimizerOptions] = None,
    Z: int = DEFAULT_SOCKETS,
) -> OptimizationResult:
    """PAs restricted to ``Z`` evenly spaced sockets per waveguide window."""
    opt = (options or OptimizerOptions()).with_sockets(Z)
    dep = snap_to_sockets(initial_deployment(scenario), Z)
    return maximize_sum_rate(scenario, replace(opt, skip_pinching=False), deployment=dep)


def run_uniform_pass(scenario: Scenario, options: Optional[OptimizerOptions] = None) -> OptimizationResult:
    opt = (options or OptimizerOptions()).with_sockets(None)
    return maximize_sum_rate(scenario, replace(opt, skip_pinching=True))


def run_mimo(scenario: Scenario, options: Optional[OptimizerOptions] = None) -> OptimizationResult:
    """Cell-free MIMO with a fixed half-wavelength ULA per BS."""
    opt = (options or OptimizerOptions()).with_sockets(None)
    return maximize_sum_rate(scenario, replace(opt, skip_pinching=True), fixed_channels=ula_channels(scenario))


def run_scheme(
    name: str,
    scenario: Scenario,
    options: Optional[OptimizerOptions] = None,
    sockets: int = DEFAULT_SOCKETS,
) -> OptimizationResult:
    if name == "c_pass":
        return run_continuous_pass(scenario, options)
    if name == "d_pass":
        return run_discrete_pass(scenario, options, sockets)
    if name == "u_pass":
        return run_uniform_pass(scenario, options)
    if name == "mimo":
        return run_mimo(scenario, options)
    raise ValueError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
