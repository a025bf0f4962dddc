"""Critical-age (equal-peak) schedules.

The optimal a priori schedule equalizes the expected peak age: the age just
before every expected arrival, and the age at the horizon, all equal ``A*``.
With a common gap ``g`` between an update's departure and the next expected
arrival, the departures follow

    delta_0 = -d_0,   delta_i = delta_{i-1} + g - E[d_i],   T - delta_N = g

so ``g = (d_0 + T + sum E[d_i]) / (N + 1)`` and ``A* = C_k g**k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .core import DomainError, PenaltyParams, Policy


class OrderingViolation(ValueError):
    """The equal-peak recursion scheduled update ``index`` before its predecessor."""

    def __init__(self, index: int, departures: Sequence[float]):
        self.index = index
        self.departures = tuple(departures)
        super().__init__(
            f"departure {index} ({departures[index - 1]:.6g}) precedes departure {index - 1} "
            f"({departures[index - 2]:.6g}); reorder the sources"
        )


class RecastError(ValueError):
    """A single clamped update leaves nothing to recast; the policy is ``[0]``."""


@dataclass(frozen=True)
class SolverInput:
    n: int
    horizon: float
    expected_delays: tuple[float, ...]
    params: PenaltyParams = field(default_factory=PenaltyParams)

    def __post_init__(self):
        object.__setattr__(self, "expected_delays", tuple(float(x) for x in self.expected_delays))
        if self.n < 1:
            raise DomainError(f"update budget must be >= 1, got {self.n}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive and finite, got {self.horizon}")
        if len(self.expected_delays) != self.n:
            raise DomainError(f"need {self.n} expected delays, got {len(self.expected_delays)}")
        for x in self.expected_delays:
            if not (x > 0 and math.isfinite(x)):
                raise DomainError(f"expected delays must be positive and finite, got {x}")


def equal_peak_gap(horizon: float, expected_delays: Sequence[float], d_0: float) -> float:
    return (d_0 + horizon + math.fsum(expected_delays)) / (len(expected_delays) + 1)


def equal_peak_departures(horizon: float, expected_delays: Sequence[float], d_0: float) -> list[float]:
    """Unconstrained forward recursion; entries may be negative or unordered."""
    g = equal_peak_gap(horizon, expected_delays, d_0)
    out, prev = [], -d_0
    for e in expected_delays:
        prev = prev + g - e
        out.append(prev)
    return out


def last_departure_closed_form(horizon: float, expected_delays: Sequence[float], d_0: float) -> float:
    n = len(expected_delays)
    return (n * horizon - d_0 - math.fsum(expected_delays)) / (n + 1)


def recast_after_clamp(inp: SolverInput) -> SolverInput:
    """Subproblem left after fixing the first departure at 0.

    Time restarts at the first expected arrival ``E[d_1]``, where the expected
    age is ``C_k E[d_1]**k``. Add ``E[d_1]`` to the subproblem's departures to
    recover absolute times.
    """
    if inp.n == 1:
        raise RecastError("single update clamped at 0; nothing left to recast")
    e1 = inp.expected_delays[0]
    if not inp.horizon > e1:
        raise DomainError(f"first expected arrival {e1} leaves no horizon for the remaining updates")
    return SolverInput(
        n=inp.n - 1,
        horizon=inp.horizon - e1,
        expected_delays=inp.expected_delays[1:],
        params=inp.params.with_initial_age(inp.params.age(e1)),
    )


def solve_critical_policy(inp: SolverInput) -> Policy:
    """Minimal-critical-age schedule for ``inp``.

    A negative first departure is clamped to 0 and the rest re-solved from
    the clamped update's expected arrival. Clamping repeats while the next
    absolute departure is still negative.

    Raises :class:`OrderingViolation` when a later departure would precede an
    earlier one (an expected delay larger than the gap).
    """
    params = inp.params
    fixed: list[float] = []
    delays = list(inp.expected_delays)
    # offset of the age curve the free departures build on: -d_0 initially,
    # 0 once an update is pinned to t=0 (its age restarts from its departure)
    anchor = -params.d_0
    while delays:
        free = equal_peak_departures(inp.horizon, delays, -anchor)
        if free[0] < 0:
            fixed.append(0.0)
            delays.pop(0)
            anchor = 0.0
            continue
        departures = fixed + free
        for i in range(len(fixed) + 1, len(departures)):
            if departures[i] < departures[i - 1]:
                raise OrderingViolation(i + 1, departures)
        g = equal_peak_gap(inp.horizon, delays, -anchor)
        return Policy(tuple(departures), inp.horizon, params.age(g), clamped_count=len(fixed))
    # every update pinned to 0: the age climbs from 0 to T after the arrivals
    return Policy(tuple(fixed), inp.horizon, params.age(inp.horizon), clamped_count=len(fixed))


def reorder_sources(inp: SolverInput) -> list[int]:
    """Permutation (new position -> source index) to apply before solving.

    When the first departure would be clamped, the source with the smallest
    expected delay goes first; otherwise the order is left alone.
    """
    ident = list(range(inp.n))
    first = equal_peak_departures(inp.horizon, inp.expected_delays, inp.params.d_0)[0]
    if first >= 0:
        return ident
    best = min(ident, key=lambda i: (inp.expected_delays[i], i))
    return [best] + [i for i in ident if i != best]


def permute_input(inp: SolverInput, perm: Sequence[int]) -> SolverInput:
    return SolverInput(inp.n, inp.horizon, tuple(inp.expected_delays[i] for i in perm), inp.params)


def infinite_horizon_policy(
    rho: float, window: float, expected_delay_mean: float, params: PenaltyParams
) -> Policy:
    """Constant-rate schedule: the ``N, T -> inf`` limit at fixed ``rho = N/T``.

    Departures ``i/rho - d_0`` (clamped at 0) for every ``i/rho`` inside the window.
    """
    if not rho > 0:
        raise DomainError(f"rate must be > 0, got {rho}")
    if not window > 0:
        raise DomainError(f"window must be > 0, got {window}")
    count = math.floor(rho * window * (1 + 1e-12))
    spacing = 1.0 / rho
    departures = []
    for i in range(1, count + 1):
        x = max(0.0, i * spacing - params.d_0)
        if x > window:
            break
        departures.append(min(x, window))
    return Policy(tuple(departures), window, params.age(spacing + expected_delay_mean))
