"""Command-line front end: ``aoi-horizon {solve,simulate,sweep}``.

Exit codes: 0 success, 1 usage error, 2 model error (ordering violation),
3 resource error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .analytics import ExperimentStats, simulate_penalties, trial_rng
from .core import DelayModel, DomainError, PenaltyParams, Policy, build_trajectory, sample_delays
from .experiments import SCENARIOS, ScenarioConfig, round_half_away, sweep
from .oracle import GridTooLarge
from .solver import OrderingViolation, SolverInput, solve_critical_policy

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_RESOURCE = 0, 1, 2, 3
SWEEP_HEADER = ["scenario", "T", "N", "trials", "mean_penalty_per_time", "std_penalty_per_time", "ci_half_width"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    seed: int
    tool_version: str = __version__
    config_path: str | None = None
    emitted_files: list[str] = field(default_factory=list)


def fmt(x: float) -> str:
    """Nine significant digits."""
    return f"{x + 0.0:.9g}"  # no "-0"


def parse_delays(text: str) -> list[DelayModel]:
    """``det:1,det:1`` or ``uniform:0,1,exp:2``: a token with ``:`` starts a new model."""
    specs: list[str] = []
    for token in text.split(","):
        token = token.strip()
        if ":" in token:
            specs.append(token)
        elif specs and token:
            specs[-1] += "," + token
        else:
            raise UsageError(f"invalid delay token {token!r} in {text!r}")
    models = []
    for spec in specs:
        try:
            models.append(DelayModel.parse(spec))
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    return models


def parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"invalid {what} list {text!r}") from None


def default_seed() -> int:
    env = os.environ.get("AOI_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"AOI_SEED must be an integer, got {env!r}") from None


def _params(args) -> PenaltyParams:
    try:
        return PenaltyParams(k=args.k, c_k=args.ck, a_0=args.a0)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _budget(args) -> int:
    if args.n is not None:
        return args.n
    if args.rho is not None:
        return round_half_away(args.rho * args.horizon)
    raise UsageError("give --n or --rho")


def _delay_models(args, n: int) -> list[DelayModel]:
    if args.delays is None:
        raise UsageError("--delays is required")
    models = parse_delays(args.delays)
    if len(models) == 1 and n > 1:
        models = models * n
    if len(models) != n:
        raise UsageError(f"{len(models)} delay models for {n} updates")
    return models


def _solve(args) -> tuple[Policy, list[DelayModel]]:
    n = _budget(args)
    models = _delay_models(args, n)
    try:
        inp = SolverInput(n, args.horizon, tuple(m.mean() for m in models), _params(args))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    return solve_critical_policy(inp), models


def _write(path: str | None, rows: Sequence[Sequence[str]], manifest: RunManifest) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    if path is None:
        sys.stdout.write(buf.getvalue())
        return
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    manifest.emitted_files.append(path)


def _write_manifest(path: str | None, manifest: RunManifest) -> None:
    if path is None:
        return
    text = json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"
    Path(path + ".manifest.json").write_text(text, encoding="utf-8", newline="")


def cmd_solve(args) -> int:
    policy, models = _solve(args)
    deps = ", ".join(f"{x:.6f}" for x in policy.departures)
    print(f"δ = {deps}; A* = {policy.critical_age:.6f}")
    print(f"clamped_count = {policy.clamped_count}")
    if args.out:
        manifest = RunManifest("solve", seed=0)
        rows = [["index", "departure", "expected_delay"]]
        rows += [[str(i), fmt(x), fmt(m.mean())] for i, (x, m) in enumerate(zip(policy.departures, models), 1)]
        _write(args.out, rows, manifest)
        _write_manifest(args.out, manifest)
    return EXIT_OK


def _partial_flags(text: str | None, n: int) -> list[bool] | None:
    if not text:
        return None
    flags = [False] * n
    for tok in text.split(","):
        try:
            i = int(tok)
        except ValueError:
            raise UsageError(f"invalid partial index {tok!r}") from None
        if not 1 <= i <= n:
            raise UsageError(f"partial index {i} outside 1..{n}")
        flags[i - 1] = True
    return flags


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    params = _params(args)
    if args.from_solve:
        policy, models = _solve(args)
    else:
        if args.departures is None:
            raise UsageError("give --departures or --from-solve")
        deps = parse_floats(args.departures, "departure")
        if any(b < a for a, b in zip(deps, deps[1:])):
            raise UsageError(f"departures must be sorted ascending: {args.departures}")
        models = _delay_models(args, len(deps))
        try:
            # the simulator never reads critical_age
            policy = Policy(tuple(deps), args.horizon, 1.0)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    flags = _partial_flags(args.partial, policy.n)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    manifest = RunManifest("simulate", seed=seed)

    if args.trials == 1:
        delays = sample_delays(models, trial_rng(seed, 0))
        traj = build_trajectory(policy, delays, params, flags)
        rows = [["start", "end", "offset", "segment_penalty"]]
        rows += [[fmt(s.start), fmt(s.end), fmt(s.offset), fmt(s.penalty(params))] for s in traj.segments]
    else:
        samples = simulate_penalties(policy, models, params, flags, args.trials, seed, args.workers)
        # aggregate the emitted (rounded) values so re-parsing reproduces the summary
        shown = [fmt(x) for x in samples]
        st = ExperimentStats.from_samples([float(x) for x in shown])
        rows = [["trial", "total_penalty"]] + [[str(i), x] for i, x in enumerate(shown)]
        rows += [["mean", fmt(st.mean)], ["std", fmt(st.std_dev)], ["ci_half_width", fmt(st.ci_half_width)]]
    _write(args.out, rows, manifest)
    _write_manifest(args.out, manifest)
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    if not scenarios:
        raise UsageError("empty scenario list")
    bad = [s for s in scenarios if s not in SCENARIOS]
    if bad:
        raise UsageError(f"unknown scenario(s) {bad}; choose from {','.join(SCENARIOS)}")
    horizons = parse_floats(args.horizons, "horizon")
    if not horizons:
        raise UsageError("empty horizon list")
    models = parse_delays(args.delay)
    if len(models) != 1:
        raise UsageError("--delay takes exactly one model")
    try:
        cfg = ScenarioConfig(
            rho=args.rho,
            horizon_values=tuple(horizons),
            total_time=args.total_time,
            trials=args.trials,
            seed=seed,
            delay_model=models[0],
            params=_params(args),
            scenarios=tuple(scenarios),
            workers=args.workers,
        )
        table = sweep(cfg)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    rows = [SWEEP_HEADER]
    rows += [[r.scenario, fmt(r.horizon), str(r.n), str(r.trials), fmt(r.mean), fmt(r.std_dev), fmt(r.ci_half_width)]
             for r in table]
    manifest = RunManifest("sweep", seed=seed)
    _write(args.out, rows, manifest)
    _write_manifest(args.out, manifest)
    return EXIT_OK


def _add_model_flags(p, horizon_required=True):
    p.add_argument("--horizon", type=float, required=horizon_required, help="horizon T")
    p.add_argument("--a0", type=float, default=0.0, help="initial age A_0")
    p.add_argument("--k", type=float, default=1.0, help="penalty exponent")
    p.add_argument("--ck", type=float, default=1.0, help="penalty scale C_k")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aoi-horizon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute the critical-age schedule")
    _add_model_flags(p)
    p.add_argument("--n", type=int, help="update budget N")
    p.add_argument("--rho", type=float, help="update rate; N = round(rho * T)")
    p.add_argument("--delays", help="comma list of det:c | uniform:a,b | exp:rate (one model is repeated)")
    p.add_argument("--out", help="CSV path (index,departure,expected_delay)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="realize a schedule under random delays")
    _add_model_flags(p)
    p.add_argument("--departures", help="comma list of sorted departure times")
    p.add_argument("--from-solve", action="store_true", help="solve the schedule from --n/--rho first")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--delays")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, help="defaults to $AOI_SEED, else 0")
    p.add_argument("--partial", help="1-based indices of partial updates")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="compare infinite/known/unknown horizons across T")
    p.add_argument("--scenarios", default=",".join(SCENARIOS))
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--horizons", default="25,50,100,250")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, help="defaults to $AOI_SEED, else 0")
    p.add_argument("--total-time", type=float, default=1000.0)
    p.add_argument("--delay", default="uniform:0,1", help="delay model shared by all updates")
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--ck", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"aoi-horizon {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OrderingViolation as exc:
        print(f"aoi-horizon {args.command}: ordering violation at index {exc.index}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (GridTooLarge, MemoryError, OSError) as exc:
        print(f"aoi-horizon {args.command}: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
