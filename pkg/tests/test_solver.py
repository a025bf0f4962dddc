import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_horizon.analytics import expected_penalty
from aoi_horizon.core import DomainError, PenaltyParams
from aoi_horizon.oracle import exact_deterministic_penalty, grid_search_policy
from aoi_horizon.solver import (
    OrderingViolation,
    RecastError,
    SolverInput,
    equal_peak_departures,
    infinite_horizon_policy,
    last_departure_closed_form,
    permute_input,
    recast_after_clamp,
    reorder_sources,
    solve_critical_policy,
)


def peaks(policy, inp):
    """Expected pre-arrival ages and the age at T, computed from the departures."""
    p = inp.params
    out = []
    prev = -p.d_0
    for x, e in zip(policy.departures, inp.expected_delays):
        out.append(p.age(x + e - prev))
        prev = x
    out.append(p.age(inp.horizon - prev))
    return out


@pytest.mark.parametrize(
    "n, T, a0, delays, expected, a_star",
    [
        (2, 10, 0, [1, 1], [3, 6], 4),
        (1, 2, 0, [2], [0], 2),
        (2, 10, 100, [1, 1], [0, 4.5], 5.5),
        (4, 10, 0, [0.5] * 4, [1.9, 3.8, 5.7, 7.6], 2.4),
    ],
)
def test_solve_examples(n, T, a0, delays, expected, a_star):
    pol = solve_critical_policy(SolverInput(n, T, delays, PenaltyParams(a_0=a0)))
    assert pol.departures == pytest.approx(expected, abs=1e-12)
    assert pol.critical_age == pytest.approx(a_star)


def test_solve_example_equal_peaks_hold():
    inp = SolverInput(2, 10, [1, 1])
    assert peaks(solve_critical_policy(inp), inp) == pytest.approx([4, 4, 4])


def test_clamped_example_matches_grid_search():
    inp = SolverInput(2, 10, [1, 1], PenaltyParams(a_0=100))
    pol = solve_critical_policy(inp)
    assert pol.clamped_count == 1
    grid_pol, grid_val = grid_search_policy(inp, 0.05)
    assert grid_pol.departures == pytest.approx([0, 4.5], abs=0.05)
    assert exact_deterministic_penalty(pol.departures, [1, 1], 10, inp.params) <= grid_val + 1e-9


def test_repeated_clamp_keeps_absolute_lower_bound():
    # A_0 huge and a short horizon: only delta_1 is pinned, the rest stay in [0, E[d_1])
    inp = SolverInput(3, 3, [1, 1, 1], PenaltyParams(a_0=30))
    pol = solve_critical_policy(inp)
    assert pol.departures == pytest.approx([0, 2 / 3, 4 / 3])
    assert pol.critical_age == pytest.approx(5 / 3)
    # beats the composed sub-frame recast schedule [0, 1, 2]
    ours = exact_deterministic_penalty(pol.departures, [1, 1, 1], 3, inp.params)
    assert ours < exact_deterministic_penalty([0, 1, 2], [1, 1, 1], 3, inp.params)


def test_all_updates_pinned():
    inp = SolverInput(1, 5, [1], PenaltyParams(a_0=50))
    pol = solve_critical_policy(inp)
    assert pol.departures == (0.0,)
    assert pol.clamped_count == 1


def test_ordering_violation_names_index():
    inp = SolverInput(3, 10, [0.1, 0.1, 6])
    with pytest.raises(OrderingViolation) as err:
        solve_critical_policy(inp)
    assert err.value.index == 3


def test_solver_input_validation():
    with pytest.raises(DomainError):
        SolverInput(0, 10, [])
    with pytest.raises(DomainError):
        SolverInput(2, 10, [1])
    with pytest.raises(DomainError):
        SolverInput(1, 10, [0])
    with pytest.raises(DomainError):
        SolverInput(1, -1, [1])


# recast_after_clamp


def test_recast_example():
    sub = recast_after_clamp(SolverInput(2, 10, [1, 1], PenaltyParams(a_0=100)))
    assert (sub.n, sub.horizon, sub.expected_delays, sub.params.a_0) == (1, 9, (1,), 1)


def test_recast_single_update():
    with pytest.raises(RecastError):
        recast_after_clamp(SolverInput(1, 5, [1], PenaltyParams(a_0=50)))


def test_recast_three_updates():
    inp = SolverInput(3, 3, [1, 1, 1], PenaltyParams(a_0=30))
    assert last_departure_closed_form(3, [1, 1, 1], 30) == pytest.approx((9 - 30 - 3) / 4)
    sub = recast_after_clamp(inp)
    assert (sub.n, sub.horizon, sub.expected_delays, sub.params.a_0) == (2, 2, (1, 1), 1)


def test_recast_subproblem_gives_the_clamped_tail():
    inp = SolverInput(3, 20, [1, 2, 0.5], PenaltyParams(k=2, c_k=0.5, a_0=400))
    pol = solve_critical_policy(inp)
    assert pol.clamped_count == 1
    sub = recast_after_clamp(inp)
    tail = equal_peak_departures(sub.horizon, sub.expected_delays, sub.params.d_0)
    assert [x + 1 for x in tail] == pytest.approx(pol.departures[1:])


# reorder_sources


def test_reorder_on_clamp():
    inp = SolverInput(3, 10, [3, 1, 2], PenaltyParams(a_0=100))
    assert reorder_sources(inp) == [1, 0, 2]


def test_reorder_identity_when_equal():
    for a0 in (0, 1e4):
        assert reorder_sources(SolverInput(3, 10, [1, 1, 1], PenaltyParams(a_0=a0))) == [0, 1, 2]


def test_reorder_identity_without_clamp():
    inp = SolverInput(2, 10, [1, 2])
    assert reorder_sources(inp) == [0, 1]
    swapped = solve_critical_policy(permute_input(inp, [1, 0]))
    assert solve_critical_policy(inp).critical_age == pytest.approx(swapped.critical_age)


def test_reorder_recovers_optimum_when_slow_source_clamps():
    # slow source first with a large initial age: the grid prefers to let the
    # fast source overtake it, wasting update 1
    params = PenaltyParams(k=2, c_k=1.3301666682517528, a_0=7.642510890011085)
    inp = SolverInput(2, 4.052542642265454, (1.6906443881446465, 0.31358851438096735), params)
    step = 0.01 * inp.horizon
    pol = solve_critical_policy(inp)
    assert pol.clamped_count == 1
    as_given = expected_penalty(pol, inp.expected_delays, params)
    _, grid_min = grid_search_policy(inp, step)
    assert as_given > 1.1 * grid_min

    perm = reorder_sources(inp)
    assert perm == [1, 0]
    permuted = permute_input(inp, perm)
    reordered = solve_critical_policy(permuted)
    assert reordered.clamped_count == 0
    value = expected_penalty(reordered, permuted.expected_delays, params)
    assert value <= grid_min
    assert value <= grid_search_policy(permuted, step)[1]


# infinite horizon


def test_infinite_examples():
    p = PenaltyParams()
    assert infinite_horizon_policy(0.4, 10, 0.5, p).departures == pytest.approx([2.5, 5, 7.5, 10])
    assert infinite_horizon_policy(0.4, 10, 0.5, p).critical_age == pytest.approx(3.0)
    assert infinite_horizon_policy(1, 3, 0.5, PenaltyParams(a_0=1)).departures == pytest.approx([0, 1, 2])


def test_infinite_is_limit_of_finite():
    # finite spacing g - E[d] -> 1/rho as N, T grow with N/T fixed
    rho, e = 0.4, 0.5
    for T in (1e3, 1e5):
        n = int(rho * T)
        pol = solve_critical_policy(SolverInput(n, T, [e] * n))
        assert pol.departures[1] - pol.departures[0] == pytest.approx(1 / rho, rel=10 / T)
        assert pol.critical_age == pytest.approx(1 / rho + e, rel=10 / T)


# properties

instance = st.integers(1, 10).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.floats(1, 100),
        st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n),
        st.floats(0, 10),
        st.sampled_from([1, 2, 3]),
        st.floats(0.5, 2),
    )
)


def _inp(case):
    n, T, fr, a0, k, ck = case
    return SolverInput(n, T, [f * T / n for f in fr], PenaltyParams(k=k, c_k=ck, a_0=a0))


@settings(max_examples=300, deadline=None)
@given(instance)
def test_equal_peaks_and_closed_form(case):
    inp = _inp(case)
    pol = solve_critical_policy(inp)
    if pol.clamped_count == 0:
        assert peaks(pol, inp) == pytest.approx([pol.critical_age] * (inp.n + 1), rel=1e-9)
        assert pol.departures[-1] == pytest.approx(
            last_departure_closed_form(inp.horizon, inp.expected_delays, inp.params.d_0), rel=1e-9, abs=1e-9
        )
        gaps = [b - a for a, b in zip((-inp.params.d_0,) + pol.departures, pol.departures)]
        assert math.fsum(gaps) + inp.horizon - pol.departures[-1] == pytest.approx(inp.horizon + inp.params.d_0)
    else:
        # peaks after the last pinned update's arrival are equal
        m = pol.clamped_count
        p = inp.params
        prev = 0.0
        tail = []
        for x, e in zip(pol.departures[m:], inp.expected_delays[m:]):
            tail.append(p.age(x + e - prev))
            prev = x
        tail.append(p.age(inp.horizon - prev))
        assert tail == pytest.approx([pol.critical_age] * len(tail), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.floats(1, 50), st.floats(0.01, 1), st.floats(0, 5))
def test_iid_constant_spacing(n, T, frac, a0):
    e = frac * T / n
    pol = solve_critical_policy(SolverInput(n, T, [e] * n, PenaltyParams(a_0=a0)))
    d = pol.departures[pol.clamped_count:]
    spacing = [b - a for a, b in zip(d, d[1:])]
    for s in spacing:
        assert s == pytest.approx(spacing[0], rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.05, 1), min_size=2, max_size=5), st.floats(10, 50))
def test_permutation_invariance_k1(delays, T):
    base = solve_critical_policy(SolverInput(len(delays), T, delays)).critical_age
    for perm in itertools.islice(itertools.permutations(range(len(delays))), 24):
        pol = solve_critical_policy(SolverInput(len(delays), T, [delays[i] for i in perm]))
        assert pol.critical_age == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("T, delays, a0", [(10, [1, 0.5], 0), (4, [0.3, 1.2], 2), (20, [2, 2], 50)])
def test_optimal_against_grid(k, n, T, delays, a0):
    inp = SolverInput(n, T, delays[:n], PenaltyParams(k=k, a_0=a0))
    pol = solve_critical_policy(inp)
    _, grid_val = grid_search_policy(inp, 0.01 * T)
    ours = expected_penalty(pol, inp.expected_delays, inp.params)
    assert ours <= grid_val + 1e-9 * max(1.0, grid_val)


def test_more_budget_never_hurts():
    T, e = 30.0, 0.7
    for p in (PenaltyParams(), PenaltyParams(k=2, a_0=3)):
        vals = []
        for n in range(1, 25):
            pol = solve_critical_policy(SolverInput(n, T, [e] * n, p))
            vals.append(expected_penalty(pol, [e] * n, p))
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
