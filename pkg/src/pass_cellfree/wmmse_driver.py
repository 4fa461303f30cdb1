"""Alternating WMMSE optimization of digital and pinching beamforming."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .channel import ChannelSet, assemble_channels
from .digital_bf import build_coefficients, matched_filter_init, sequential_digital_bf
from .metrics import BeamformingState, gains, mses, sum_rate, user_rates, wmmse_objective
from .numerics import NumericalError
from .pinching_bf import PinchingOptions, WindowGrid, penalty_pinching_bf, rate_quadratic
from .scenario import Deployment, Scenario, initial_deployment, snap_to_sockets

log = logging.getLogger(__name__)


@dataclass
class OptimizerOptions:
    outer_tol: float = 1e-4
    max_outer: int = 50
    skip_pinching: bool = False
    digital_tol: float = 1e-6
    max_sweeps: int = 10_000
    digital_kkt_tol: Optional[float] = 1e-8
    pinching: PinchingOptions = field(default_factory=PinchingOptions)

    @property
    def sockets(self) -> Optional[int]:
        return self.pinching.sockets

    def with_sockets(self, Z: Optional[int]) -> "OptimizerOptions":
        return replace(self, pinching=replace(self.pinching, sockets=Z))


@dataclass
class TraceEntry:
    iteration: int
    block: str  # "uq", "digital" or "pinching"
    sum_rate: float
    objective_before: float
    objective_after: float
    detail: object = None


@dataclass
class OptimizationResult:
    W: np.ndarray
    deployment: Deployment
    u: np.ndarray
    q: np.ndarray
    sum_rate: float
    rates: np.ndarray
    channels: ChannelSet
    trace: list
    outer_iters: int
    converged: bool
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.converged and not self.warnings


def update_equalizers_weights(H: np.ndarray, state: BeamformingState, sigma2: float) -> BeamformingState:
    """Closed-form MMSE equalizers and MSE weights for the current beamformers."""
    z = gains(H, state.W)
    total = np.sum(np.abs(z) ** 2, axis=1) + sigma2
    u = np.diag(z) / total
    e = mses(H, state.W, u, sigma2)
    return BeamformingState(state.W, u, 1.0 / e)


def _objective(H, state, sigma2):
    return wmmse_objective(state.q, mses(H, state.W, state.u, sigma2))


def maximize_sum_rate(
    scenario: Scenario,
    options: Optional[OptimizerOptions] = None,
    deployment: Optional[Deployment] = None,
    fixed_channels: Optional[ChannelSet] = None,
) -> OptimizationResult:
    """Run the alternating optimization on one drop.

    Each outer iteration refreshes ``(u, q)`` and places the PAs (from the
    second iteration on), then refreshes ``(u, q)`` and re-optimizes the
    digital beamformers. Iterations end on a digital block; the iterate with
    the highest true sum rate among those is returned.

    Passing ``fixed_channels`` (a conventional antenna array) disables
    pinching beamforming.
    """
    opt = options or OptimizerOptions()
    cfg = scenario.config
    L, N, K = cfg.L, cfg.N, cfg.K
    sigma2, P = scenario.sigma2_lin, scenario.P_lin
    pinching = fixed_channels is None and not opt.skip_pinching

    if deployment is None:
        deployment = initial_deployment(scenario)
        if opt.sockets is not None and fixed_channels is None:
            deployment = snap_to_sockets(deployment, opt.sockets)
    dep = deployment.copy()
    channels = fixed_channels if fixed_channels is not None else assemble_channels(scenario, dep)
    H = channels.h

    W = matched_filter_init(H, L, N, P)
    state = BeamformingState(W, np.zeros(K, complex), np.ones(K))
    trace: list[TraceEntry] = []
    warnings: list[str] = []

    grid = WindowGrid(scenario, opt.pinching.grid_points, opt.pinching.phase_samples) if pinching else None
    best = (sum_rate(H, W, sigma2), W.copy(), dep.copy(), channels)
    prev_rate = None
    converged = False
    it = 0

    def check(value, where):
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective in {where} block at outer iteration {it}")

    def refresh():
        nonlocal state
        before = _objective(H, state, sigma2) if np.all(state.q > 0) else float("nan")
        state = update_equalizers_weights(H, state, sigma2)
        after = _objective(H, state, sigma2)
        check(after, "uq")
        trace.append(TraceEntry(it, "uq", sum_rate(H, state.W, sigma2), before, after))

    for it in range(1, opt.max_outer + 1):
        if pinching and it > 1:
            refresh()
            before = _objective(H, state, sigma2)
            rq = rate_quadratic(state.W, state.u, state.q)
            res = penalty_pinching_bf(scenario, dep, rq, opt.pinching, grid)
            if not res.converged:
                warnings.append(f"pinching: penalty loop not converged at iteration {it}")
            dep, channels = res.deployment, res.channels
            H = channels.h
            after = _objective(H, state, sigma2)
            check(after, "pinching")
            trace.append(TraceEntry(it, "pinching", sum_rate(H, state.W, sigma2), before, after, res))

        refresh()
        before = _objective(H, state, sigma2)
        coeffs = build_coefficients(H, state.u, state.q, L, N)
        dres = sequential_digital_bf(coeffs, state.W, P, opt.digital_tol, opt.max_sweeps, opt.digital_kkt_tol)
        if not dres.converged:
            warnings.append(f"digital: max sweeps reached at iteration {it}")
        state = BeamformingState(dres.W, state.u, state.q)
        after = _objective(H, state, sigma2)
        check(after, "digital")
        rate = sum_rate(H, state.W, sigma2)
        trace.append(TraceEntry(it, "digital", rate, before, after, dres))

        if rate > best[0]:
            best = (rate, state.W.copy(), dep.copy(), channels)
        if prev_rate is not None and abs(rate - prev_rate) < opt.outer_tol * abs(prev_rate):
            converged = True
            break
        prev_rate = rate

    if not converged:
        warnings.append(f"outer loop hit max_outer={opt.max_outer}")
        log.info("outer loop hit max_outer=%d", opt.max_outer)

    rate, W, dep, channels = best
    H = channels.h
    final = update_equalizers_weights(H, BeamformingState(W, state.u, state.q), sigma2)
    return OptimizationResult(
        W=W,
        deployment=dep,
        u=final.u,
        q=final.q,
        sum_rate=rate,
        rates=user_rates(H, W, sigma2),
        channels=channels,
        trace=trace,
        outer_iters=it,
        converged=converged,
        warnings=warnings,
    )
