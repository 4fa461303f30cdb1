"""System parameters, drop geometry and pinching-antenna deployments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

SPEED_OF_LIGHT = 299_792_458.0

LEFT, RIGHT = 0, 1


class ConfigError(ValueError):
    """A configuration or deployment violates one of the model invariants."""


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


class SystemConfig(BaseModel):
    """Scalar parameters of one PASS cell-free system.

    Field names double as the keys of the JSON config file; unknown keys are
    rejected. ``delta`` left as ``None`` means one carrier wavelength.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    L: int = 2
    N: int = 4
    M: int = 1
    K: int = 4
    D_x: float = 30.0
    D_y: float = 30.0
    d_h: float = 3.0
    L_hat: float = 13.0
    f_c: float = 28e9
    n_e: float = 1.4
    P_dbm: float = 10.0
    sigma2_dbm: float = -80.0
    delta: Optional[float] = None
    rng_seed: int = 0

    @model_validator(mode="after")
    def _check_invariants(self) -> "SystemConfig":
        for name in ("L", "N", "M", "K"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("D_x", "D_y", "d_h", "L_hat", "f_c", "n_e"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0")
        for name in ("P_dbm", "sigma2_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.delta is not None and not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError("delta must be > 0")
        if self.K > self.N:
            raise ValueError(f"K <= N required (K={self.K}, N={self.N})")
        if self.L_hat > self.D_x:
            raise ValueError(f"L_hat <= D_x required (L_hat={self.L_hat}, D_x={self.D_x})")
        if self.M * self.gap > self.L_hat:
            raise ValueError(
                f"M*delta <= L_hat required (M={self.M}, delta={self.gap:.6g}, "
                f"L_hat={self.L_hat}): no feasible deployment"
            )
        return self

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def gap(self) -> float:
        """Minimum spacing between adjacent PAs on one waveguide (m)."""
        return self.wavelength if self.delta is None else self.delta

    @property
    def P_lin(self) -> float:
        return dbm_to_watt(self.P_dbm)

    @property
    def sigma2_lin(self) -> float:
        return dbm_to_watt(self.sigma2_dbm)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ConfigError(_format_validation(exc)) from None

    @classmethod
    def from_file(cls, path: str | Path) -> "SystemConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def updated(self, **changes) -> "SystemConfig":
        """Copy with ``changes`` applied and re-validated."""
        return type(self).from_dict({**self.model_dump(), **changes})


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        msg = err["msg"].removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


@dataclass(frozen=True)
class Scenario:
    """One concrete drop: users, waveguide feeds and derived constants."""

    config: SystemConfig
    user_pos: np.ndarray  # (K, 3)
    feed_pos: np.ndarray  # (L, N, 3)
    side: np.ndarray  # (L,), LEFT or RIGHT
    kappa_c: float
    kappa_g: float
    eta: float
    P_lin: float
    sigma2_lin: float

    @property
    def windows(self) -> np.ndarray:
        """Admissible x-range of the PAs of each BS, shape (L, 2)."""
        cfg = self.config
        return np.array(
            [(0.0, cfg.L_hat) if s == LEFT else (cfg.D_x - cfg.L_hat, cfg.D_x) for s in self.side]
        )

    @property
    def anchors(self) -> np.ndarray:
        """BS positions (x at the feed side, y = 0, z = d_h), shape (L, 3)."""
        cfg = self.config
        return np.array([(0.0 if s == LEFT else cfg.D_x, 0.0, cfg.d_h) for s in self.side])


def _bs_sides(L: int) -> np.ndarray:
    return np.array([LEFT if l % 2 == 0 else RIGHT for l in range(L)])


def _feed_positions(cfg: SystemConfig, side: np.ndarray) -> np.ndarray:
    # BSs sharing a side interleave their waveguides over D_y
    feeds = np.empty((cfg.L, cfg.N, 3))
    for l, s in enumerate(side):
        group = l // 2
        n_same_side = int(np.sum(side == s))
        total = n_same_side * cfg.N
        for n in range(cfg.N):
            feeds[l, n] = (
                0.0 if s == LEFT else cfg.D_x,
                (group * cfg.N + n + 0.5) * cfg.D_y / total,
                cfg.d_h,
            )
    return feeds


def uniform_split_users(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Users dealt round-robin over L equal x-strips, uniform inside each strip."""
    strip = cfg.D_x / cfg.L
    users = np.zeros((cfg.K, 3))
    for k in range(cfg.K):
        s = k % cfg.L
        users[k, 0] = rng.uniform(s * strip, (s + 1) * strip)
        users[k, 1] = rng.uniform(0.0, cfg.D_y)
    return users


def build_scenario(config: SystemConfig, users=None) -> Scenario:
    """Materialize a drop.

    Parameters
    ----------
    config : SystemConfig
    users : array_like, optional
        Explicit ``(K, 3)`` user positions. When omitted users are drawn
        with :func:`uniform_split_users` from ``config.rng_seed``.
    """
    if users is None:
        user_pos = uniform_split_users(config, np.random.default_rng(config.rng_seed))
    else:
        user_pos = np.array(users, dtype=float)
        if user_pos.shape != (config.K, 3):
            raise ConfigError(f"users: expected shape ({config.K}, 3), got {user_pos.shape}")
        inside = (
            (user_pos[:, 0] >= 0)
            & (user_pos[:, 0] <= config.D_x)
            & (user_pos[:, 1] >= 0)
            & (user_pos[:, 1] <= config.D_y)
        )
        if not inside.all():
            raise ConfigError("users: every user must lie inside the service area")
        if np.any(user_pos[:, 2] != 0):
            raise ConfigError("users: user z-coordinates must be 0")

    side = _bs_sides(config.L)
    kappa_c = 2.0 * math.pi * config.f_c / SPEED_OF_LIGHT
    return Scenario(
        config=config,
        user_pos=user_pos,
        feed_pos=_feed_positions(config, side),
        side=side,
        kappa_c=kappa_c,
        kappa_g=config.n_e * kappa_c,
        eta=1.0 / (2.0 * kappa_c),
        P_lin=config.P_lin,
        sigma2_lin=config.sigma2_lin,
    )


@dataclass
class Deployment:
    """PA x-coordinates ``x[l, m, n]`` plus the window each BS is confined to."""

    x: np.ndarray  # (L, M, N)
    windows: np.ndarray  # (L, 2)
    gap: float

    def copy(self) -> "Deployment":
        return Deployment(self.x.copy(), self.windows.copy(), self.gap)

    def violations(self, tol: float = 1e-12) -> list[str]:
        """Human-readable list of broken deployment constraints (empty if feasible)."""
        out = []
        L, M, N = self.x.shape
        for l in range(L):
            lo, hi = self.windows[l]
            for n in range(N):
                col = self.x[l, :, n]
                if np.any(col < lo - tol) or np.any(col > hi + tol):
                    out.append(f"BS {l} waveguide {n}: PA outside window [{lo}, {hi}]")
                spacing = np.diff(col)
                if np.any(spacing < self.gap - tol):
                    out.append(
                        f"BS {l} waveguide {n}: adjacent PAs closer than {self.gap:.6g} m"
                    )
        return out

    def is_feasible(self, tol: float = 1e-12) -> bool:
        return not self.violations(tol)


def initial_deployment(scenario: Scenario) -> Deployment:
    """Evenly spaced PAs: ``x = start + (m + 1/2) * L_hat / M`` on every waveguide."""
    cfg = scenario.config
    windows = scenario.windows
    offsets = (np.arange(cfg.M) + 0.5) * cfg.L_hat / cfg.M
    x = windows[:, 0][:, None, None] + offsets[None, :, None] + np.zeros((cfg.L, cfg.M, cfg.N))
    return Deployment(x=x, windows=windows, gap=cfg.gap)


def socket_positions(window: np.ndarray, Z: int) -> np.ndarray:
    return np.linspace(window[0], window[1], Z)


def snap_to_sockets(dep: Deployment, Z: int) -> Deployment:
    """Move every PA to its nearest socket, keeping PAs on distinct sockets."""
    L, M, N = dep.x.shape
    if Z < M:
        raise ConfigError(f"sockets: Z={Z} cannot hold M={M} PAs per waveguide")
    out = dep.copy()
    for l in range(L):
        lo, hi = dep.windows[l]
        step = (hi - lo) / (Z - 1)
        if M > 1 and step < dep.gap:
            raise ConfigError(f"sockets: spacing {step:.4g} m is below the minimum PA gap")
        for n in range(N):
            idx = np.floor((dep.x[l, :, n] - lo) / step + 0.5).astype(int)
            idx = np.clip(idx, 0, Z - 1)
            for m in range(1, M):
                idx[m] = max(idx[m], idx[m - 1] + 1)
            for m in range(M - 2, -1, -1):
                idx[m] = min(idx[m], idx[m + 1] - 1)
            out.x[l, :, n] = lo + idx * step
    return out


def feasible_interval(dep: Deployment, l: int, m: int, n: int) -> tuple[float, float]:
    """Range of x for PA ``(l, m, n)`` that keeps every constraint with other PAs fixed."""
    lo, hi = dep.windows[l]
    M = dep.x.shape[1]
    if m > 0:
        lo = max(lo, dep.x[l, m - 1, n] + dep.gap)
    if m < M - 1:
        hi = min(hi, dep.x[l, m + 1, n] - dep.gap)
    x0 = dep.x[l, m, n]
    assert lo <= x0 + 1e-12 and x0 <= hi + 1e-12, "incumbent PA position is infeasible"
    return float(min(lo, x0)), float(max(hi, x0))


def feasible_sockets(dep: Deployment, l: int, m: int, n: int, Z: int) -> np.ndarray:
    lo, hi = feasible_interval(dep, l, m, n)
    sockets = socket_positions(dep.windows[l], Z)
    eps = 1e-9 * max(1.0, abs(dep.windows[l, 1]))
    return sockets[(sockets >= lo - eps) & (sockets <= hi + eps)]
