"""Command-line entry points for simulation, evaluation and serving."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import envserver, harness
from .config import load_environment, load_scenario
from .engine import PlannerChoice, run_episode, write_trace_csv
from .planner import PRESETS


def _add_env_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML environment config")


def _env_kwargs(args) -> dict:
    env = load_environment(args.config)
    return {
        "track": env.track,
        "limits": env.limits,
        "geometry": env.geometry,
        "sampler": env.sampler,
    }


def _grid_from_config(args) -> harness.EvaluationGrid:
    env = load_environment(args.config)
    overrides = env.grid_overrides
    grid = harness.EvaluationGrid()
    if overrides:
        grid = harness.EvaluationGrid(
            s_b_values=tuple(overrides.get("s_b_init", grid.s_b_values)),
            n_b_values=tuple(overrides.get("n_b_init", grid.n_b_values)),
            lookahead_values=tuple(overrides.get("s_d", grid.lookahead_values)),
        )
    return grid


def cmd_simulate(args) -> int:
    config, env = load_scenario(args.scenario)
    outcome = run_episode(
        config,
        track=env.track,
        limits=env.limits,
        geometry=env.geometry,
        sampler=env.sampler,
    )
    print(f"status={outcome.status.value} steps={outcome.steps}")
    if args.trace:
        write_trace_csv(outcome, args.trace)
        print(f"trace written to {args.trace}")
    return 0


def cmd_evaluate(args) -> int:
    if args.variant in PRESETS:
        variant = harness.Variant(
            name=args.variant,
            planner=PlannerChoice(kind="conventional", preset=args.variant),
        )
    elif args.variant == "rl":
        if not args.weights:
            print("evaluate --variant rl requires --weights", file=sys.stderr)
            return 2
        variant = harness.Variant(
            name="rl" + ("" if args.safety else "-no-sl"),
            planner=PlannerChoice(
                kind="rl", weights_path=args.weights, safety_on=args.safety
            ),
            noise_sigma=args.sigma,
        )
    else:
        print(f"unknown variant {args.variant!r}; choose from "
              f"{sorted(PRESETS)} or 'rl'", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = harness.evaluate(
        variant,
        grid=_grid_from_config(args),
        jobs=args.jobs,
        master_seed=args.seed,
        **_env_kwargs(args),
    )
    csv_path = out_dir / f"rates_{variant.name}.csv"
    harness.write_report_csv(report, csv_path)
    harness.plot_success_rates([report], out_dir / f"rates_{variant.name}.png")
    for row in report.rows:
        print(f"{row.variant} s_d={row.lookahead:g}: success={row.success:.1f}% "
              f"collision={row.collision:.1f}% infeasible={row.infeasible:.1f}% "
              f"track_end={row.track_end:.1f}%")
    print(f"report written to {csv_path}")
    return 0


def cmd_noise_study(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    without, with_sl = harness.noise_study(
        args.weights,
        sigma=args.sigma,
        grid=_grid_from_config(args),
        jobs=args.jobs,
        master_seed=args.seed,
        **_env_kwargs(args),
    )
    csv_path = out_dir / "noise_study.csv"
    harness.write_report_csv([without, with_sl], csv_path)
    harness.plot_noise_study(without, with_sl, out_dir / "noise_study.png")
    for report in (without, with_sl):
        for row in report.rows:
            print(f"{row.variant} s_d={row.lookahead:g}: success={row.success:.1f}% "
                  f"infeasible={row.infeasible:.1f}%")
    print(f"report written to {csv_path}")
    return 0


def cmd_serve_env(args) -> int:
    env = load_environment(args.config)

    def factory() -> envserver.EnvSession:
        return envserver.EnvSession(
            track=env.track,
            limits=env.limits,
            geometry=env.geometry,
            sampler=env.sampler,
            default_stage=args.stage,
        )

    envserver.serve(args.endpoint, session_factory=factory, once=args.once)
    return 0


def cmd_plot(args) -> int:
    in_dir = Path(getattr(args, "in"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for csv_path in sorted(in_dir.glob("*.csv")):
        reports = harness.read_report_csv(csv_path)
        harness.plot_success_rates(
            reports, out_dir / (csv_path.stem + ".png"), title=csv_path.stem
        )
        count += 1
    print(f"{count} plot(s) written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raceduel",
        description="Two-vehicle overtaking-versus-blocking duel simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", default=None, help="write per-step CSV trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run the evaluation grid for one variant")
    p.add_argument("--variant", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", default=None, help="policy file for --variant rl")
    p.add_argument("--safety", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--sigma", type=float, default=0.0, help="observation noise std")
    _add_env_arg(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("noise-study", help="paired noisy evaluation without/with safety layer")
    p.add_argument("--weights", required=True)
    p.add_argument("--sigma", type=float, default=0.7)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_env_arg(p)
    p.set_defaults(func=cmd_noise_study)

    p = sub.add_parser("serve-env", help="serve the training environment protocol")
    p.add_argument("--endpoint", required=True, help="'stdio' or tcp://host:port")
    p.add_argument("--stage", type=int, default=6)
    p.add_argument("--once", action="store_true", help="exit after one session")
    _add_env_arg(p)
    p.set_defaults(func=cmd_serve_env)

    p = sub.add_parser("plot", help="re-plot rate CSVs from a directory")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
