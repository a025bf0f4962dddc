"""Infinite / known / unknown horizon comparisons swept over the horizon length.

All reported statistics are of penalty per unit of simulated time. Trials
draw from ``trial_rng(seed, trial)``, so the three scenarios see common
random numbers for a given trial index.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytics import (
    ExperimentStats,
    expected_penalty,
    simulate_penalties,
    trial_rng,
    variance_upper_bound,
)
from .core import DelayModel, DomainError, PenaltyParams, Policy, total_penalty
from .solver import SolverInput, infinite_horizon_policy, solve_critical_policy

SCENARIOS = ("infinite", "known", "unknown")


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "known"
    rho: float = 0.4
    horizon_values: tuple[float, ...] = (25.0, 50.0, 100.0, 250.0)
    total_time: float = 1000.0
    trials: int = 10_000
    seed: int = 0
    delay_model: DelayModel = field(default_factory=lambda: DelayModel.uniform(0.0, 1.0))
    params: PenaltyParams = field(default_factory=PenaltyParams)
    scenarios: tuple[str, ...] = SCENARIOS
    workers: int = 1

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"rho must be > 0, got {self.rho}")
        for s in (self.scenario, *self.scenarios):
            if s not in SCENARIOS:
                raise DomainError(f"unknown scenario {s!r}")
        if self.trials < 2:
            raise DomainError(f"need at least 2 trials, got {self.trials}")

    def budget(self, horizon: float) -> int:
        return round_half_away(self.rho * horizon)


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    horizon: float
    n: int
    trials: int
    mean: float
    std_dev: float
    ci_half_width: float


def _known_policy(cfg: ScenarioConfig, horizon: float, params: PenaltyParams) -> Policy:
    n = cfg.budget(horizon)
    if n == 0:
        return Policy((), horizon, params.age(horizon + params.d_0))
    mean = cfg.delay_model.mean()
    return solve_critical_policy(SolverInput(n, horizon, (mean,) * n, params))


def known_horizon_policy(cfg: ScenarioConfig, t: float) -> Policy:
    return _known_policy(cfg, t, cfg.params)


def run_known_horizon(cfg: ScenarioConfig, t: float) -> ExperimentStats:
    """Critical policy for ``(N = round(rho t), T = t)``; stats of ``S/T``.

    ``bound`` carries the Bhatia-Davis bound on ``Var(S/T)`` when it is not vacuous.
    """
    policy = known_horizon_policy(cfg, t)
    models = [cfg.delay_model] * policy.n
    samples = simulate_penalties(policy, models, cfg.params, None, cfg.trials, cfg.seed, cfg.workers)
    bound = None
    if policy.n:
        means = [m.mean() for m in models]
        vb = variance_upper_bound(policy, expected_penalty(policy, means, cfg.params), means, cfg.params)
        bound = None if vb.vacuous else vb.value
    return ExperimentStats.from_samples(samples, bound).scaled(1.0 / t)


def infinite_policy(cfg: ScenarioConfig, t: float) -> Policy:
    return infinite_horizon_policy(cfg.rho, t, cfg.delay_model.mean(), cfg.params)


def run_infinite_horizon(cfg: ScenarioConfig, t: float) -> ExperimentStats:
    """Constant-rate schedule evaluated over ``[0, t]``; stats of ``S/T``."""
    policy = infinite_policy(cfg, t)
    models = [cfg.delay_model] * policy.n
    samples = simulate_penalties(policy, models, cfg.params, None, cfg.trials, cfg.seed, cfg.workers)
    return ExperimentStats.from_samples(samples).scaled(1.0 / t)


def period_lengths(total_time: float, t: float) -> list[float]:
    if not 0 < t <= total_time * (1 + 1e-12):
        raise DomainError(f"period {t} must lie in (0, total_time={total_time}]")
    count = math.floor(total_time / t + 1e-9)
    lengths = [t] * count
    rest = total_time - count * t
    if rest > 1e-9 * total_time:
        lengths.append(rest)
    return lengths


def unknown_horizon_trial(
    cfg: ScenarioConfig, t: float, trial: int, boundary_ages: list[float] | None = None
) -> float:
    """Total penalty of one trial over ``[0, total_time]`` cut into periods of length ``t``.

    Each period re-solves the known-horizon policy with the realized age left
    by the previous period. ``boundary_ages`` collects the carried ages.
    """
    rng = trial_rng(cfg.seed, trial)
    params = cfg.params
    total = []
    for length in period_lengths(cfg.total_time, t):
        policy = _known_policy(cfg, length, params)
        delays = cfg.delay_model.sample(rng, policy.n)
        s, last_offset = total_penalty(policy.departures, delays, length, params)
        total.append(s)
        carried = params.age(length - last_offset)
        if boundary_ages is not None:
            boundary_ages.append(carried)
        params = params.with_initial_age(carried)
    return math.fsum(total)


def _unknown_batch(args) -> list[float]:
    cfg, t, lo, hi = args
    return [unknown_horizon_trial(cfg, t, i) for i in range(lo, hi)]


def run_unknown_horizon(cfg: ScenarioConfig, t: float) -> ExperimentStats:
    """Concatenated periods of length ``t`` with carried age; stats of ``S / total_time``."""
    size = max(1, math.ceil(cfg.trials / (4 * cfg.workers)))
    jobs = [(cfg, t, lo, min(cfg.trials, lo + size)) for lo in range(0, cfg.trials, size)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_unknown_batch, jobs))
    else:
        parts = [_unknown_batch(job) for job in jobs]
    samples = np.fromiter((x for p in parts for x in p), dtype=float, count=cfg.trials)
    return ExperimentStats.from_samples(samples).scaled(1.0 / cfg.total_time)


_RUNNERS = {
    "infinite": run_infinite_horizon,
    "known": run_known_horizon,
    "unknown": run_unknown_horizon,
}


def scenario_budget(cfg: ScenarioConfig, scenario: str, t: float) -> int:
    if scenario == "infinite":
        return infinite_policy(cfg, t).n
    return cfg.budget(t)


def run_scenario(cfg: ScenarioConfig, scenario: str, t: float) -> ExperimentStats:
    return _RUNNERS[scenario](cfg, t)


def sweep(cfg: ScenarioConfig) -> list[SweepRow]:
    """One row per ``(scenario, T)`` in ``cfg.scenarios`` x ``cfg.horizon_values``."""
    if not cfg.scenarios:
        raise DomainError("no scenarios selected")
    rows = []
    for scenario in cfg.scenarios:
        for t in cfg.horizon_values:
            st = run_scenario(cfg, scenario, t)
            rows.append(SweepRow(scenario, t, scenario_budget(cfg, scenario, t), st.trials,
                                 st.mean, st.std_dev, st.ci_half_width))
    return rows


def sweep_config(
    horizons: Sequence[float],
    scenarios: Sequence[str] = SCENARIOS,
    **kwargs,
) -> ScenarioConfig:
    return ScenarioConfig(horizon_values=tuple(float(h) for h in horizons), scenarios=tuple(scenarios), **kwargs)
