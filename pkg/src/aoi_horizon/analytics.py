"""Closed-form expectations, partial-update results, variance bound and Monte Carlo."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import DelayModel, DomainError, PenaltyParams, Policy, sample_delays, total_penalty

Z_95 = 1.96


@dataclass(frozen=True)
class ExperimentStats:
    """Monte Carlo summary of one quantity.

    ``bound`` is the Bhatia-Davis variance bound in the same units as
    ``variance`` (``None`` when not computed or vacuous).
    """

    trials: int
    mean: float
    variance: float
    std_dev: float
    ci_half_width: float
    bound: float | None = None

    @classmethod
    def from_samples(cls, samples, bound: float | None = None) -> ExperimentStats:
        x = np.asarray(samples, dtype=float)
        if x.size < 2:
            raise DomainError(f"need at least 2 trials for a variance, got {x.size}")
        # numpy reductions use pairwise summation
        mean = float(np.mean(x))
        std = float(np.std(x, ddof=1))
        return cls(int(x.size), mean, std * std, std, Z_95 * std / math.sqrt(x.size), bound)

    def scaled(self, factor: float) -> ExperimentStats:
        """Statistics of ``factor * X``."""
        bound = None if self.bound is None else self.bound * factor * factor
        return ExperimentStats(
            self.trials,
            self.mean * factor,
            self.variance * factor * factor,
            self.std_dev * abs(factor),
            self.ci_half_width * abs(factor),
            bound,
        )


def _power_term(base: float, k: float) -> float:
    if base < 0 and not float(k + 1).is_integer():
        raise DomainError(f"negative gap {base} under a fractional power; policy arrivals out of order")
    return base ** (k + 1)


def expected_penalty(policy: Policy, expected_delays: Sequence[float], params: PenaltyParams) -> float:
    """Average total penalty of ``policy`` with delays replaced by their means.

    Exact in expectation for ``k = 1`` when every update is useful; an
    approximation for larger ``k`` (and exact for deterministic delays).
    """
    if len(expected_delays) != policy.n:
        raise DomainError(f"{policy.n} departures but {len(expected_delays)} expected delays")
    d0 = params.d_0
    deps = [-d0, *policy.departures, policy.horizon]
    delays = [d0, *expected_delays, 0.0]
    k = params.k
    terms = (
        _power_term(deps[i + 1] + delays[i + 1] - deps[i], k) - _power_term(delays[i], k)
        for i in range(policy.n + 1)
    )
    return params.c_k * math.fsum(terms) / (k + 1)


def partial_update_policy(
    n: int, horizon: float, expected_delays: Sequence[float], params: PenaltyParams | None = None
) -> Policy:
    """Departures aiming partial updates at ``i T / (N + 1)``.

    The critical age is the sawtooth peak ``C_k (d_0 + T/(N+1))**k``.
    """
    if n < 1:
        raise DomainError(f"update budget must be >= 1, got {n}")
    if len(expected_delays) != n:
        raise DomainError(f"need {n} expected delays, got {len(expected_delays)}")
    params = params or PenaltyParams()
    step = horizon / (n + 1)
    departures = [max(0.0, i * step - e) for i, e in enumerate(expected_delays, start=1)]
    return Policy(tuple(departures), horizon, params.age(params.d_0 + step))


def partial_update_penalty_closed_form(n: int, horizon: float, params: PenaltyParams) -> float:
    """Total linear penalty of ``n`` evenly spaced partial updates."""
    if params.k != 1:
        raise DomainError(f"closed form exists only for k = 1, got k = {params.k}")
    return params.c_k * horizon**2 / (2 * (n + 1)) + params.a_0 * horizon


def full_vs_partial_dominates(delays: Sequence[float], params: PenaltyParams) -> bool:
    """True when every delay is at most ``A_0 / C_k``.

    Under that condition all-full updates are no worse than all-partial ones
    for the linear penalty.
    """
    limit = params.a_0 / params.c_k
    return all(d <= limit for d in delays)


class VarianceBound(NamedTuple):
    value: float
    vacuous: bool


def variance_upper_bound(
    policy: Policy, expected_penalty: float, expected_delays: Sequence[float], params: PenaltyParams
) -> VarianceBound:
    """Bhatia-Davis bound ``(T A* - S)(S - min(A_0, E[d_i]))`` on the penalty variance.

    The lower anchor mixes penalty and time units as the bound is usually
    stated. The result is flagged ``vacuous`` when either factor is negative.
    """
    upper = policy.horizon * policy.critical_age - expected_penalty
    lower = expected_penalty - min([params.a_0, *expected_delays])
    return VarianceBound(upper * lower, upper < 0 or lower < 0)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, fixed by ``(seed, trial)`` alone."""
    return np.random.default_rng([seed, trial])


def _penalty_batch(args) -> list[float]:
    departures, models, horizon, params, partial_flags, seed, lo, hi = args
    out = []
    for t in range(lo, hi):
        delays = sample_delays(models, trial_rng(seed, t))
        out.append(total_penalty(departures, delays, horizon, params, partial_flags)[0])
    return out


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(trials / (4 * workers)))
    return [(lo, min(trials, lo + size)) for lo in range(0, trials, size)]


def simulate_penalties(
    policy: Policy,
    delay_models: Sequence[DelayModel],
    params: PenaltyParams,
    partial_flags: Sequence[bool] | None = None,
    trials: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Per-trial total penalties, ordered by trial index."""
    if len(delay_models) != policy.n:
        raise DomainError(f"{policy.n} departures but {len(delay_models)} delay models")
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    models = tuple(delay_models)
    flags = None if partial_flags is None else tuple(partial_flags)
    jobs = [(policy.departures, models, policy.horizon, params, flags, seed, lo, hi)
            for lo, hi in _chunks(trials, workers)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_penalty_batch, jobs))
    else:
        parts = [_penalty_batch(job) for job in jobs]
    return np.fromiter((x for part in parts for x in part), dtype=float, count=trials)


def monte_carlo(
    policy: Policy,
    delay_models: Sequence[DelayModel],
    params: PenaltyParams,
    partial_flags: Sequence[bool] | None = None,
    trials: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentStats:
    """Mean, variance and 95% CI of the total penalty over ``trials`` runs.

    Bit-reproducible for a fixed seed whatever the number of workers.
    """
    if trials < 2:
        raise DomainError(f"need at least 2 trials, got {trials}")
    samples = simulate_penalties(policy, delay_models, params, partial_flags, trials, seed, workers)
    return ExperimentStats.from_samples(samples)
