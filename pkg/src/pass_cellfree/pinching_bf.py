"""Penalty-method pinching beamforming with element-wise PA placement.

With ``W``, ``u`` and ``q`` fixed the weighted-MSE objective as a function
of the composite channels is

    f(H) = sum_k  h_k^H B_k h_k - 2 Re(b_k^H h_k),
    B_k = q_k |u_k|^2 W W^H,   b_k = q_k conj(u_k) w_k.

Per-PA-index copies ``Q_m`` of ``H_m`` decouple the (nonconvex) placement:
``g = f(sum_m Q_m) + (1/rho) sum_m ||H_m - Q_m||_F^2`` is minimized
alternately in closed form over ``Q`` and by 1-D search over each PA
position, shrinking ``rho`` until ``H_m`` and ``Q_m`` agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelSet, assemble_channels, pa_user_channel
from .scenario import Deployment, Scenario, feasible_interval, feasible_sockets

log = logging.getLogger(__name__)


@dataclass
class RateQuadratic:
    B: np.ndarray  # (K, L*N, L*N), one Hermitian PSD matrix per user
    b: np.ndarray  # (K, L*N)

    def scaled(self, s: float) -> "RateQuadratic":
        """Same ``f`` expressed in channels multiplied by ``s``."""
        return RateQuadratic(self.B / s**2, self.b / s)


def rate_quadratic(W: np.ndarray, u: np.ndarray, q: np.ndarray) -> RateQuadratic:
    WW = W @ W.conj().T
    WW = 0.5 * (WW + WW.conj().T)
    B = (q * np.abs(u) ** 2)[:, None, None] * WW[None, :, :]
    b = (q * np.conj(u))[:, None] * W.T
    return RateQuadratic(B=B, b=b)


def rate_objective(rq: RateQuadratic, H: np.ndarray) -> float:
    """``f(H)`` for channels ``H`` (rows ``h_k``)."""
    quad = np.einsum("ki,kij,kj->", H.conj(), rq.B, H)
    lin = np.sum(rq.b.conj() * H)
    return float(np.real(quad) - 2.0 * np.real(lin))


def penalty_objective(rq: RateQuadratic, h_pa: np.ndarray, Q: np.ndarray, rho: float) -> float:
    return rate_objective(rq, Q.sum(axis=0)) + violation(h_pa, Q) / rho


def violation(h_pa: np.ndarray, Q: np.ndarray) -> float:
    return float(np.sum(np.abs(h_pa - Q) ** 2))


def q_update(rq: RateQuadratic, h_pa: np.ndarray, rho: float) -> np.ndarray:
    """Closed-form minimizer of ``g`` over all auxiliary copies ``Q[m, k, :]``.

    ``q_{k,m} = rho b_k + h_{k,m} - rho B_k (rho M B_k + I)^{-1} (rho M b_k + sum_m h_{k,m})``
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    M, K, D = h_pa.shape
    eye = np.eye(D)
    h_sum = h_pa.sum(axis=0)
    Q = np.empty_like(h_pa, dtype=complex)
    for k in range(K):
        total = np.linalg.solve(rho * M * rq.B[k] + eye, rho * M * rq.b[k] + h_sum[k])
        shared = rho * rq.b[k] - rho * (rq.B[k] @ total)
        Q[:, k, :] = h_pa[:, k, :] + shared[None, :]
    return Q


def _search_cost(scenario, l, n, x, target, scale):
    # target: (K,) desired feed-to-user coefficients of this PA
    vals = pa_user_channel(scenario, l, n, x, scale)
    return np.sum(np.abs(vals - target) ** 2, axis=-1)


def phase_resolving_points(scenario: Scenario, grid_points: int, phase_samples: int) -> int:
    """Grid size giving at least ``phase_samples`` points per channel phase period.

    Along the waveguide the phase of ``f g`` turns at up to ``kappa_g + kappa_c``
    rad/m, so a period is ``lambda / (n_e + 1)``, shorter than ``lambda``.
    """
    if phase_samples <= 0:
        return grid_points
    turns = scenario.config.L_hat * (scenario.kappa_g + scenario.kappa_c) / (2 * np.pi)
    return max(grid_points, int(np.ceil(turns * phase_samples)) + 1)


class WindowGrid:
    """Channel values on a fixed uniform grid spanning each waveguide window.

    The grid has ``grid_points`` points, raised if needed to resolve the
    channel phase (see :func:`phase_resolving_points`). Users never move
    within a drop, so one grid per waveguide serves every element search of
    every pinching block.
    """

    def __init__(self, scenario: Scenario, grid_points: int, phase_samples: int = 0):
        self.scenario = scenario
        self.grid_points = grid_points
        self.phase_samples = phase_samples
        self.size = phase_resolving_points(scenario, grid_points, phase_samples)
        self._grids: dict = {}

    def matches(self, grid_points: int, phase_samples: int) -> bool:
        return self.grid_points == grid_points and self.phase_samples == phase_samples

    def get(self, l: int, n: int) -> tuple:
        """Grid positions, ``[Re v, Im v, |v|]`` of shape ``(size, 3K)`` and ``sum_k |v|^2``."""
        if (l, n) not in self._grids:
            lo, hi = self.scenario.windows[l]
            x = np.linspace(lo, hi, self.size)
            v = pa_user_channel(self.scenario, l, n, x)
            mag = np.abs(v)
            design = np.ascontiguousarray(np.hstack((v.real, v.imag, mag)))
            self._grids[(l, n)] = (x, design, np.sum(mag**2, axis=1))
        return self._grids[(l, n)]


_ZOOM = np.linspace(-1.0, 1.0, 33)


def _basin_seeds(cost: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` most promising local minima of a sampled cost.

    Minima are ranked by the vertex of the parabola through each one and its
    two neighbours, which tracks the basin floor better than the sample
    itself when the cost oscillates within a few grid steps. Taking the
    lowest samples instead would mostly return neighbours from one basin.
    """
    if cost.size <= 2:
        return np.arange(cost.size)
    left, mid, right = cost[:-2], cost[1:-1], cost[2:]
    inner = np.flatnonzero((mid <= left) & (mid <= right))
    curv = left[inner] - 2 * mid[inner] + right[inner]
    slope = right[inner] - left[inner]
    with np.errstate(divide="ignore", invalid="ignore"):
        floor = np.where(curv > 0, mid[inner] - slope**2 / (8 * curv), mid[inner])
    idx = np.concatenate(([0], inner + 1, [cost.size - 1]))
    score = np.concatenate(([cost[0]], floor, [cost[-1]]))
    count = min(max(count, 1), idx.size)
    return idx[np.argpartition(score, count - 1)[:count]]


def element_search(
    scenario: Scenario,
    dep: Deployment,
    target: np.ndarray,
    l: int,
    m: int,
    n: int,
    grid_points: int = 2000,
    sockets: Optional[int] = None,
    scale: float = 1.0,
    refine: int = 4,
    grid: Optional[WindowGrid] = None,
    phase_samples: int = 16,
) -> tuple[float, float]:
    """Best position for PA ``(l, m, n)`` against per-user targets ``target[k]``.

    Minimizes ``J(x) = sum_k |s f(x) g_k(x) - target[k]|^2`` over the feasible
    set with every other PA fixed. The continuous search scans the points of
    a uniform grid over the waveguide window (``grid_points`` points, more
    if ``phase_samples`` asks for it) that fall in the feasible interval
    plus its two ends. It then zooms in three times (33 points, first over
    half a phase period, then 1/16 of the previous width) around the
    incumbent, the ``refine`` lowest grid local minima and the ``refine``
    lowest local minima of the phase-free envelope ``sum_k (|s f g_k| - |target[k]|)^2``.
    The envelope seeds matter near the optimum, where the grid cost is
    dominated by phase aliasing rather than by channel magnitude. The
    socket search scans the free sockets only. The incumbent is always a candidate, so ``J`` never increases.
    Updates ``dep`` in place.

    Returns
    -------
    x : float
        New position.
    cost : float
        ``J`` at the new position.
    """
    x0 = float(dep.x[l, m, n])

    if sockets is not None:
        cand = np.append(feasible_sockets(dep, l, m, n, sockets), x0)
        cost = _search_cost(scenario, l, n, cand, target, scale)
        j0 = float(cost[-1])
        i = int(np.argmin(cost))
        best_x, best_j = float(cand[i]), float(cost[i])
    else:
        lo, hi = feasible_interval(dep, l, m, n)
        if grid is None or not grid.matches(grid_points, phase_samples):
            grid = WindowGrid(scenario, grid_points, phase_samples)
        gx, design, gpow = grid.get(l, n)
        inside = slice(np.searchsorted(gx, lo, "left"), np.searchsorted(gx, hi, "right"))
        ends = np.array([lo, hi])
        cand = np.concatenate(([lo], gx[inside], [hi]))
        end_vals = pa_user_channel(scenario, l, n, ends, scale)
        K = target.size
        t_abs = np.abs(target)
        t_pow = float(np.sum(t_abs**2))
        # |s v - t|^2 and the phase-free envelope (|s v| - |t|)^2 share the
        # expansion s^2 |v|^2 - 2 s <., .> + |t|^2; one real product serves both
        proj = np.zeros((3 * K, 2))
        proj[:K, 0], proj[K : 2 * K, 0], proj[2 * K :, 1] = target.real, target.imag, t_abs
        cross = design[inside] @ proj
        base = scale**2 * gpow[inside] + t_pow
        end_cost = np.sum(np.abs(end_vals - target) ** 2, axis=-1)
        end_env = np.sum((np.abs(end_vals) - t_abs) ** 2, axis=-1)
        cost = np.concatenate(([end_cost[0]], base - 2 * scale * cross[:, 0], [end_cost[1]]))
        envelope = np.concatenate(([end_env[0]], base - 2 * scale * cross[:, 1], [end_env[1]]))
        i = int(np.argmin(cost))
        best_x, best_j = float(cand[i]), float(cost[i])

        seeds = np.concatenate((_basin_seeds(cost, refine), _basin_seeds(envelope, refine)))
        centres = np.concatenate(([x0], cand[seeds]))
        step = (gx[-1] - gx[0]) / max(gx.size - 1, 1)
        width = max(step, np.pi / (scenario.kappa_g + scenario.kappa_c))
        j0 = None
        for _ in range(3):
            local = np.clip(centres[:, None] + width * _ZOOM[None, :], lo, hi)
            local_cost = _search_cost(scenario, l, n, local, target, scale)
            if j0 is None:
                j0 = float(local_cost[0, _ZOOM.size // 2])
            j = np.argmin(local_cost, axis=1)
            rows = np.arange(local.shape[0])
            centres = local[rows, j]
            r = int(np.argmin(local_cost[rows, j]))
            if local_cost[r, j[r]] < best_j:
                best_x, best_j = float(centres[r]), float(local_cost[r, j[r]])
            width /= 16.0

    if best_j < j0:
        dep.x[l, m, n] = best_x
        return best_x, best_j
    return x0, j0


@dataclass
class PinchingOptions:
    rho0: float = 10.0
    tau: float = 0.3
    eps1: float = 1e-6
    eps2: float = 1e-4
    grid_points: int = 2000
    sockets: Optional[int] = None
    max_rounds: int = 30
    max_inner: int = 100
    refine: int = 4
    # 0 keeps the plain grid_points grid; repeated sweeps and the zoom
    # refine positions locally, so a phase-resolving grid buys little here
    phase_samples: int = 0


@dataclass
class PenaltyRound:
    rho: float
    g: list  # g after every Q update and every element sweep, in order
    violation: float


@dataclass
class PinchingResult:
    deployment: Deployment
    channels: ChannelSet
    rounds: list = field(default_factory=list)
    converged: bool = False
    scale: float = 1.0


def channel_scale(rq: RateQuadratic) -> float:
    """Unit change making the largest ``||B_k||_2`` equal to one.

    ``rho`` and the violation threshold are applied in these units, so the
    penalty schedule does not depend on the absolute channel magnitude.
    """
    norms = [np.linalg.norm(Bk, 2) for Bk in rq.B]
    top = max(norms, default=0.0)
    return float(np.sqrt(top)) if top > 0 else 1.0


def penalty_pinching_bf(
    scenario: Scenario,
    dep: Deployment,
    rq: RateQuadratic,
    options: Optional[PinchingOptions] = None,
    grid: Optional[WindowGrid] = None,
) -> PinchingResult:
    """Place all PAs for fixed digital beamformers via the penalty method."""
    opt = options or PinchingOptions()
    cfg = scenario.config
    L, M, N = cfg.L, cfg.M, cfg.N
    dep = dep.copy()
    s = channel_scale(rq)
    rq_s = rq.scaled(s)
    channels = assemble_channels(scenario, dep)
    rho = opt.rho0
    rounds = []
    if grid is None or not grid.matches(opt.grid_points, opt.phase_samples):
        grid = WindowGrid(scenario, opt.grid_points, opt.phase_samples)
    converged = False

    for _ in range(opt.max_rounds):
        g_trace = []
        prev = None
        for _ in range(opt.max_inner):
            Q = q_update(rq_s, s * channels.h_pa, rho)
            g_trace.append(penalty_objective(rq_s, s * channels.h_pa, Q, rho))
            for l in range(L):
                for n in range(N):
                    for m in range(M):
                        col = l * N + n
                        element_search(
                            scenario, dep, Q[m, :, col], l, m, n,
                            grid_points=opt.grid_points, sockets=opt.sockets,
                            scale=s, refine=opt.refine, grid=grid,
                            phase_samples=opt.phase_samples,
                        )
            channels = assemble_channels(scenario, dep)
            cur = penalty_objective(rq_s, s * channels.h_pa, Q, rho)
            g_trace.append(cur)
            if prev is not None and prev - cur <= opt.eps2 * abs(prev):
                break
            prev = cur
        viol = violation(s * channels.h_pa, Q)
        rounds.append(PenaltyRound(rho=rho, g=g_trace, violation=viol))
        if viol <= opt.eps1:
            converged = True
            break
        rho *= opt.tau

    if not converged:
        log.warning("pinching beamforming stopped after %d penalty rounds", len(rounds))
    return PinchingResult(dep, channels, rounds, converged, s)
