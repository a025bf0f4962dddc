"""Brute-force reference computations for testing.

Nothing here calls the solver or the trajectory builder. The freshest
update is recomputed from its definition (latest departure among arrivals
so far) and penalties are integrated numerically or interval by interval.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .core import PenaltyParams, Policy, Trajectory, age_at


class GridTooLarge(RuntimeError):
    pass


MAX_GRID_POINTS = 5_000_000


def freshest_update(t: float, departures: Sequence[float], arrivals: Sequence[float]) -> int | None:
    """Index of the received update with the latest departure, ties to the higher index."""
    best = None
    for i, (x, a) in enumerate(zip(departures, arrivals)):
        if a <= t and (best is None or x >= departures[best]):
            best = i
    return best


def brute_force_useful(departures: Sequence[float], arrivals: Sequence[float], horizon: float) -> list[bool]:
    """Useful flags by evaluating ``u(t)`` at every instant where it can change."""
    probes = sorted({a for a in arrivals if a <= horizon})
    seen = set()
    for t in probes:
        u = freshest_update(t, departures, arrivals)
        if u is not None:
            seen.add(u)
    return [i in seen for i in range(len(arrivals))]


def _offset_history(departures, arrivals, horizon, params, partial_flags):
    """Breakpoints and the age offset in force on each interval between them."""
    n = len(departures)
    partial_flags = partial_flags or [False] * n
    times = sorted({0.0, horizon, *(a for a in arrivals if 0.0 < a < horizon)})
    offsets = []
    cur_u, offset, last_level_elapsed = None, -params.d_0, params.d_0
    for lo in times[:-1]:
        u = freshest_update(lo, departures, arrivals)
        if u is not None and u != cur_u:
            if partial_flags[u]:
                # same age level as right after the previous freshest arrival
                offset = lo - last_level_elapsed
            else:
                offset = departures[u]
            cur_u = u
            last_level_elapsed = lo - offset
        offsets.append(offset)
    return times, offsets


def brute_force_age(t, departures, arrivals, horizon, params, partial_flags=None) -> float:
    """Right-continuous age at ``t`` from first principles."""
    times, offsets = _offset_history(departures, arrivals, horizon, params, partial_flags)
    idx = min(int(np.searchsorted(times, t, side="right")) - 1, len(offsets) - 1)
    return params.age(t - offsets[idx])


def _trapezoid(lo: float, hi: float, offset: float, params: PenaltyParams, step: float) -> float:
    m = max(2, math.ceil((hi - lo) / step) + 1)
    t = np.linspace(lo, hi, m)
    y = params.c_k * (t - offset) ** params.k
    return float(np.sum((y[1:] + y[:-1]) * np.diff(t)) / 2.0)


def quadrature_penalty(trajectory: Trajectory, params: PenaltyParams, step: float) -> float:
    """Trapezoidal integral of :func:`age_at` over ``[0, T]`` with breakpoints at arrivals."""
    horizon = trajectory.horizon
    times = sorted({0.0, horizon, *(a for a in trajectory.arrivals if 0.0 < a < horizon)})
    total = 0.0
    for lo, hi in zip(times[:-1], times[1:]):
        m = max(2, math.ceil((hi - lo) / step) + 1)
        t = np.linspace(lo, hi, m)
        y = np.array([age_at(x, trajectory, params) for x in t[:-1]] + [0.0])
        # left limit at the interval end
        seg = trajectory.segment_at(0.5 * (lo + hi))
        y[-1] = params.age(hi - seg.offset)
        total += float(np.sum((y[1:] + y[:-1]) * np.diff(t)) / 2.0)
    return total


def quadrature_penalty_from_run(
    departures: Sequence[float],
    delays: Sequence[float],
    horizon: float,
    params: PenaltyParams,
    partial_flags: Sequence[bool] | None = None,
    step: float = 1e-3,
) -> float:
    """Trapezoidal penalty of a realized run, with the age rebuilt from scratch."""
    arrivals = [x + d for x, d in zip(departures, delays)]
    times, offsets = _offset_history(departures, arrivals, horizon, params, partial_flags)
    return math.fsum(
        _trapezoid(lo, hi, off, params, step) for lo, hi, off in zip(times[:-1], times[1:], offsets)
    )


def exact_deterministic_penalty(
    departures: Sequence[float], delays: Sequence[float], horizon: float, params: PenaltyParams
) -> float:
    """Exact penalty when every delay equals its given value.

    Integrates ``C_k (t - o)**k`` between consecutive arrivals, where ``o`` is
    the running maximum of departures already received.
    """
    events = sorted((x + d, x) for x, d in zip(departures, delays) if x + d <= horizon)
    k1 = params.k + 1.0
    total, t, offset = 0.0, 0.0, -params.d_0
    for a, x in events:
        total += ((a - offset) ** k1 - (t - offset) ** k1)
        t, offset = a, max(offset, x)
    total += (horizon - offset) ** k1 - (t - offset) ** k1
    return params.c_k * total / k1


def _peak_age(departures, delays, horizon, params) -> float:
    events = sorted((x + d, x) for x, d in zip(departures, delays) if x + d <= horizon)
    offset, peaks = -params.d_0, []
    for a, x in events:
        peaks.append(a - offset)
        offset = max(offset, x)
    peaks.append(horizon - offset)
    return params.age(max(peaks))


def grid_search_policy(inp, step: float) -> tuple[Policy, float]:
    """Best sorted schedule on the grid ``{0, step, 2 step, ..., T}``.

    ``inp`` is a ``SolverInput``; the expected delays are treated as
    deterministic and every candidate is scored exactly.
    """
    n, horizon, delays, params = inp.n, inp.horizon, list(inp.expected_delays), inp.params
    points = int(math.floor(horizon / step + 1e-9)) + 1
    combos = math.comb(points + n - 1, n)
    if n > 3 or combos > MAX_GRID_POINTS:
        raise GridTooLarge(f"{combos} candidate schedules for N={n}; refine the grid or reduce N")
    grid = [min(i * step, horizon) for i in range(points)]
    best, best_val = None, math.inf
    for cand in itertools.combinations_with_replacement(grid, n):
        val = exact_deterministic_penalty(cand, delays, horizon, params)
        if val < best_val:
            best, best_val = cand, val
    peak = _peak_age(best, delays, horizon, params)
    return Policy(best, horizon, peak), best_val
