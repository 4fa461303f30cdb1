"""Monte-Carlo experiments: seeded drops, parameter sweeps, CSV output."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .baselines import SCHEMES, run_scheme
from .pinching_bf import PinchingOptions
from .scenario import ConfigError, SystemConfig, build_scenario, _format_validation
from .wmmse_driver import OptimizerOptions

log = logging.getLogger(__name__)

DETAIL_COLUMNS = (
    "sweep_var", "sweep_value", "drop", "seed", "scheme",
    "sum_rate_bps_hz", "avg_rate_bps_hz", "outer_iters", "converged", "wall_ms",
)
AGGREGATE_COLUMNS = (
    "sweep_var", "sweep_value", "scheme", "n",
    "mean_sum_rate", "stderr_sum_rate", "mean_avg_rate",
)

Scheme = Literal["c_pass", "d_pass", "u_pass", "mimo"]


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    outer_tol: float = Field(1e-4, gt=0)
    max_outer: int = Field(50, ge=1)
    digital_tol: float = Field(1e-6, gt=0)
    max_sweeps: int = Field(10_000, ge=1)
    digital_kkt_tol: Optional[float] = Field(1e-8, gt=0)
    rho0: float = Field(10.0, gt=0)
    tau: float = Field(0.3, gt=0, lt=1)
    eps1: float = Field(1e-6, gt=0)
    eps2: float = Field(1e-4, gt=0)
    grid_points: int = Field(2000, ge=2)
    max_rounds: int = Field(30, ge=1)

    def to_options(self) -> OptimizerOptions:
        return OptimizerOptions(
            outer_tol=self.outer_tol,
            max_outer=self.max_outer,
            digital_tol=self.digital_tol,
            max_sweeps=self.max_sweeps,
            digital_kkt_tol=self.digital_kkt_tol,
            pinching=PinchingOptions(
                rho0=self.rho0, tau=self.tau, eps1=self.eps1, eps2=self.eps2,
                grid_points=self.grid_points, max_rounds=self.max_rounds,
            ),
        )


class ExperimentSpec(BaseModel):
    """One sweep over a single system parameter, several schemes, ``n_drops`` drops each."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    base_config: SystemConfig = SystemConfig()
    sweep_var: Literal["P_dbm", "K", "M"]
    sweep_values: list[float] = Field(min_length=1)
    schemes: list[Scheme] = Field(min_length=1)
    n_drops: int = Field(ge=1)
    seed: int = 0
    output: str = "results.csv"
    sockets: int = Field(27, ge=2)
    solver: SolverSettings = SolverSettings()
    record_wall_time: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("schemes")
    @classmethod
    def _unique_schemes(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("schemes must not repeat")
        return v

    @model_validator(mode="after")
    def _check_sweep(self) -> "ExperimentSpec":
        for value in self.sweep_values:
            if self.sweep_var in ("K", "M") and value != int(value):
                raise ValueError(f"sweep value {value} for {self.sweep_var} must be an integer")
            try:
                self.config_for(value)
            except ConfigError as exc:
                raise ValueError(f"sweep value {value}: {exc}") from None
        return self

    def config_for(self, value: float, seed: Optional[int] = None) -> SystemConfig:
        v = int(value) if self.sweep_var in ("K", "M") else float(value)
        changes = {self.sweep_var: v}
        if seed is not None:
            changes["rng_seed"] = seed
        return self.base_config.updated(**changes)

    @property
    def aggregate_path(self) -> Path:
        out = Path(self.output)
        return out.with_name(out.stem + "_aggregate" + (out.suffix or ".csv"))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ConfigError(_format_validation(exc)) from None

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def drop_seed(master: int, value_index: int, drop: int) -> int:
    """Seed of one drop; depends only on its (sweep value, drop) cell."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(value_index, drop))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _fmt(x: float) -> str:
    return repr(float(x))


def _run_cell(spec: ExperimentSpec, value_index: int, drop: int) -> list[dict]:
    value = spec.sweep_values[value_index]
    seed = drop_seed(spec.seed, value_index, drop)
    cfg = spec.config_for(value, seed)
    scenario = build_scenario(cfg)
    options = spec.solver.to_options()
    rows = []
    for scheme in spec.schemes:
        t0 = time.perf_counter()
        res = run_scheme(scheme, scenario, options, spec.sockets)
        wall_ms = (time.perf_counter() - t0) * 1e3
        for w in res.warnings:
            log.warning("value=%s drop=%d scheme=%s: %s", value, drop, scheme, w)
        rows.append({
            "sweep_var": spec.sweep_var,
            "sweep_value": _fmt(value),
            "drop": drop,
            "seed": seed,
            "scheme": scheme,
            "sum_rate_bps_hz": _fmt(res.sum_rate),
            "avg_rate_bps_hz": _fmt(res.sum_rate / cfg.K),
            "outer_iters": res.outer_iters,
            "converged": int(res.ok),
            "wall_ms": f"{wall_ms:.1f}" if spec.record_wall_time else "",
        })
    return rows


def _run_cell_args(args):
    return _run_cell(*args)


def run_experiment(spec: ExperimentSpec) -> tuple[list[dict], list[dict]]:
    """Run every (sweep value, drop, scheme) and return detail and aggregate rows.

    Cells are independent; with ``workers > 1`` they run in a process pool
    but rows are always emitted in (sweep value, drop, scheme) order.
    """
    cells = [(spec, vi, d) for vi in range(len(spec.sweep_values)) for d in range(spec.n_drops)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [_run_cell_args(c) for c in cells]
    detail = [row for rows in results for row in rows]
    return detail, aggregate(spec, detail)


def aggregate(spec: ExperimentSpec, detail: list[dict]) -> list[dict]:
    out = []
    for value in spec.sweep_values:
        for scheme in spec.schemes:
            sel = [r for r in detail if r["sweep_value"] == _fmt(value) and r["scheme"] == scheme]
            sums = np.array([float(r["sum_rate_bps_hz"]) for r in sel])
            avgs = np.array([float(r["avg_rate_bps_hz"]) for r in sel])
            n = len(sel)
            stderr = float(np.std(sums, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            out.append({
                "sweep_var": spec.sweep_var,
                "sweep_value": _fmt(value),
                "scheme": scheme,
                "n": n,
                "mean_sum_rate": _fmt(sums.mean()),
                "stderr_sum_rate": _fmt(stderr),
                "mean_avg_rate": _fmt(avgs.mean()),
            })
    return out


def write_csv(path: str | Path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def run_and_write(spec: ExperimentSpec) -> tuple[Path, Path]:
    detail, agg = run_experiment(spec)
    write_csv(spec.output, DETAIL_COLUMNS, detail)
    write_csv(spec.aggregate_path, AGGREGATE_COLUMNS, agg)
    return Path(spec.output), spec.aggregate_path


def demo_spec(output: str = "demo_results.csv", n_drops: int = 2) -> ExperimentSpec:
    """The reference setup (L=2, K=4, N=4, 30 m x 30 m, 28 GHz) swept over BS power."""
    return ExperimentSpec(
        base_config=SystemConfig(
            L=2, N=4, M=1, K=4, D_x=30.0, D_y=30.0, d_h=3.0, L_hat=13.0,
            f_c=28e9, n_e=1.4, P_dbm=10.0, sigma2_dbm=-80.0,
        ),
        sweep_var="P_dbm",
        sweep_values=[0.0, 5.0, 10.0],
        schemes=list(SCHEMES),
        n_drops=n_drops,
        seed=2025,
        output=output,
    )
