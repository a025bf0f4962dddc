"""Domain types, the age function and exact penalty integration.

Time is continuous on ``[0, T]``. The age seen by the monitor at time ``t``
is ``C_k * (t - offset)**k`` where ``offset`` is the departure time of the
freshest received update (or ``-d_0`` before any useful arrival). Partial
updates shift the offset so the age restarts at the level it had right after
the previous useful arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class DomainError(ValueError):
    """A time or parameter lies outside the model's domain."""


@dataclass(frozen=True)
class PenaltyParams:
    """Polynomial age penalty ``C_k * age**k`` with initial age ``a_0``."""

    k: float = 1.0
    c_k: float = 1.0
    a_0: float = 0.0

    def __post_init__(self):
        if not self.k >= 1:
            raise DomainError(f"exponent k must be >= 1, got {self.k}")
        if not self.c_k > 0:
            raise DomainError(f"scale c_k must be > 0, got {self.c_k}")
        if not self.a_0 >= 0:
            raise DomainError(f"initial age a_0 must be >= 0, got {self.a_0}")

    @property
    def d_0(self) -> float:
        """Time offset that produces the initial age: ``(a_0 / c_k)**(1/k)``."""
        return (self.a_0 / self.c_k) ** (1.0 / self.k)

    def age(self, elapsed: float) -> float:
        return self.c_k * elapsed**self.k

    def area(self, lo: float, hi: float) -> float:
        """Integral of ``C_k * x**k`` for ``x`` in ``[lo, hi]``."""
        k1 = self.k + 1.0
        return self.c_k * (hi**k1 - lo**k1) / k1

    def with_initial_age(self, a_0: float) -> PenaltyParams:
        return PenaltyParams(k=self.k, c_k=self.c_k, a_0=a_0)


_DELAY_KINDS = {"deterministic": 1, "uniform": 2, "exponential": 1}
_DELAY_ALIASES = {"det": "deterministic", "uniform": "uniform", "unif": "uniform", "exp": "exponential"}


@dataclass(frozen=True)
class DelayModel:
    """Distribution of a single update's transmission time.

    ``deterministic(c)``, ``uniform(a, b)`` or ``exponential(rate)``.
    Sampling goes through the inverse CDF of one uniform draw per update so
    any mix of models consumes the random stream identically.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _DELAY_KINDS:
            raise DomainError(f"unknown delay kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != _DELAY_KINDS[self.kind]:
            raise DomainError(f"{self.kind} takes {_DELAY_KINDS[self.kind]} parameter(s), got {len(self.params)}")
        p = self.params
        if self.kind == "deterministic" and not p[0] > 0:
            raise DomainError(f"deterministic delay must be > 0, got {p[0]}")
        if self.kind == "uniform" and not 0 <= p[0] < p[1]:
            raise DomainError(f"uniform delay needs 0 <= a < b, got {p}")
        if self.kind == "exponential" and not p[0] > 0:
            raise DomainError(f"exponential rate must be > 0, got {p[0]}")
        if not all(math.isfinite(x) for x in p):
            raise DomainError(f"delay parameters must be finite, got {p}")

    @classmethod
    def deterministic(cls, c: float) -> DelayModel:
        return cls("deterministic", (c,))

    @classmethod
    def uniform(cls, a: float, b: float) -> DelayModel:
        return cls("uniform", (a, b))

    @classmethod
    def exponential(cls, rate: float) -> DelayModel:
        return cls("exponential", (rate,))

    @classmethod
    def parse(cls, text: str) -> DelayModel:
        """Parse ``name:param[,param]`` (names ``det``, ``uniform``, ``exp``)."""
        name, sep, rest = text.strip().partition(":")
        if not sep or name not in _DELAY_ALIASES:
            raise DomainError(f"invalid delay spec {text!r}")
        try:
            values = tuple(float(x) for x in rest.split(","))
        except ValueError:
            raise DomainError(f"invalid delay spec {text!r}") from None
        return cls(_DELAY_ALIASES[name], values)

    def mean(self) -> float:
        p = self.params
        if self.kind == "deterministic":
            return p[0]
        if self.kind == "uniform":
            return 0.5 * (p[0] + p[1])
        return 1.0 / p[0]

    def second_moment(self) -> float:
        p = self.params
        if self.kind == "deterministic":
            return p[0] ** 2
        if self.kind == "uniform":
            a, b = p
            return (a * a + a * b + b * b) / 3.0
        return 2.0 / p[0] ** 2

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2

    def quantile(self, u):
        """Inverse CDF, vectorized over ``u`` in ``[0, 1)``."""
        p = self.params
        if self.kind == "deterministic":
            return np.full_like(np.asarray(u, dtype=float), p[0])
        if self.kind == "uniform":
            return p[0] + (p[1] - p[0]) * np.asarray(u, dtype=float)
        return -np.log1p(-np.asarray(u, dtype=float)) / p[0]

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return self.quantile(rng.random(size))

    def __str__(self):
        short = {"deterministic": "det", "uniform": "uniform", "exponential": "exp"}[self.kind]
        return f"{short}:" + ",".join(f"{x:g}" for x in self.params)


def sample_delays(models: Sequence[DelayModel], rng: np.random.Generator) -> np.ndarray:
    """One delay per model, drawn from a single block of uniforms."""
    u = rng.random(len(models))
    first = models[0] if models else None
    if all(m == first for m in models):
        return first.quantile(u) if first is not None else u
    return np.array([m.quantile(x) for m, x in zip(models, u)], dtype=float)


@dataclass(frozen=True)
class Policy:
    """A priori schedule of update request (departure) times."""

    departures: tuple[float, ...]
    horizon: float
    critical_age: float
    clamped_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "departures", tuple(float(x) for x in self.departures))
        object.__setattr__(self, "horizon", float(self.horizon))
        if not self.horizon > 0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")
        prev = 0.0
        for i, x in enumerate(self.departures):
            if x < prev:
                raise DomainError(f"departure {i + 1} ({x}) is out of order or negative")
            prev = x
        if self.departures and self.departures[-1] > self.horizon:
            raise DomainError(f"departure {self.departures[-1]} exceeds horizon {self.horizon}")
        if self.departures and not self.critical_age > 0:
            raise DomainError("critical_age must be > 0 when updates are scheduled")

    @property
    def n(self) -> int:
        return len(self.departures)


class Segment(NamedTuple):
    """Piece of the age curve on ``[start, end)`` with age ``C_k (t - offset)**k``."""

    start: float
    end: float
    offset: float

    def penalty(self, params: PenaltyParams) -> float:
        return params.area(self.start - self.offset, self.end - self.offset)


@dataclass(frozen=True)
class Trajectory:
    """One realized run of a policy."""

    arrivals: tuple[float, ...]
    useful: tuple[bool, ...]
    segments: tuple[Segment, ...]
    total_penalty: float
    horizon: float = field(default=0.0)

    def segment_at(self, t: float) -> Segment:
        if not 0.0 <= t <= self.horizon:
            raise DomainError(f"t={t} outside [0, {self.horizon}]")
        # right-continuous: a boundary belongs to the segment it starts
        for seg in self.segments:
            if t < seg.end:
                return seg
        return self.segments[-1]

    def final_offset(self) -> float:
        return self.segments[-1].offset


def age_at(t: float, trajectory: Trajectory, params: PenaltyParams) -> float:
    """Age penalty at ``t``, taking the right limit at useful arrivals."""
    seg = trajectory.segment_at(t)
    return params.age(t - seg.offset)


def final_age(trajectory: Trajectory, params: PenaltyParams) -> float:
    """Left-limit age at the horizon."""
    return params.age(trajectory.horizon - trajectory.final_offset())


def classify_useful(departures: Sequence[float], arrivals: Sequence[float], horizon: float) -> list[bool]:
    """Flag updates that are the freshest received update at some ``t <= T``.

    Update ``i`` is useful iff it arrives by the horizon and strictly before
    every update that departed after it. On equal arrivals the later
    departure wins.
    """
    if len(departures) != len(arrivals):
        raise DomainError(f"{len(departures)} departures but {len(arrivals)} arrivals")
    useful = [False] * len(arrivals)
    later_min = math.inf
    for i in range(len(arrivals) - 1, -1, -1):
        a = arrivals[i]
        useful[i] = a <= horizon and a < later_min
        if a < later_min:
            later_min = a
    return useful


def _build(departures, delays, horizon, params, partial_flags):
    if len(delays) != len(departures):
        raise DomainError(f"{len(departures)} departures but {len(delays)} delays")
    if partial_flags is None:
        partial_flags = (False,) * len(departures)
    elif len(partial_flags) != len(departures):
        raise DomainError(f"{len(departures)} departures but {len(partial_flags)} partial flags")
    arrivals = []
    for x, d in zip(departures, delays):
        if d < 0:
            raise DomainError(f"negative sampled delay {d}")
        arrivals.append(x + d)
    useful = classify_useful(departures, arrivals, horizon)

    segments = []
    start, offset = 0.0, -params.d_0
    for i in sorted((i for i in range(len(arrivals)) if useful[i]), key=arrivals.__getitem__):
        a = arrivals[i]
        if partial_flags[i]:
            # restart at the age held right after the previous useful arrival
            new_offset = a - (start - offset)
        else:
            new_offset = departures[i]
        if a > start:
            segments.append(Segment(start, a, offset))
        start, offset = a, new_offset
    if horizon > start or not segments:
        segments.append(Segment(start, horizon, offset))
    return arrivals, useful, segments


def build_trajectory(
    policy: Policy,
    sampled_delays: Sequence[float],
    params: PenaltyParams,
    partial_flags: Sequence[bool] | None = None,
) -> Trajectory:
    """Realize ``policy`` under the given delays and integrate its penalty exactly."""
    arrivals, useful, segments = _build(policy.departures, list(sampled_delays), policy.horizon, params, partial_flags)
    total = math.fsum(seg.penalty(params) for seg in segments)
    return Trajectory(tuple(arrivals), tuple(useful), tuple(segments), total, policy.horizon)


def total_penalty(
    departures: Sequence[float],
    delays: Sequence[float],
    horizon: float,
    params: PenaltyParams,
    partial_flags: Sequence[bool] | None = None,
) -> tuple[float, float]:
    """Total penalty and final offset without materializing a Trajectory.

    Same arithmetic as :func:`build_trajectory`; used in Monte Carlo loops.
    """
    _, _, segments = _build(departures, delays, horizon, params, partial_flags)
    return math.fsum(seg.penalty(params) for seg in segments), segments[-1].offset


def no_update_penalty(horizon: float, params: PenaltyParams) -> float:
    d0 = params.d_0
    return params.area(d0, horizon + d0)
