"""Batch evaluation: full initialization grids, rates, CSV and plots.

Every (initial gap, initial offset, blocking lookahead) combination of
the evaluation grid runs as one deterministic episode; per-lookahead
outcome rates aggregate into a report. Episode seeds derive from the
master seed and the grid coordinates only, so results are independent
of worker count and scheduling order, and a noisy evaluation can be
repeated with identical draws under a different planner flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from multiprocessing import Pool, cpu_count
from pathlib import Path

import numpy as np

from .dynamics import BlockingParams
from .engine import (
    EpisodeStatus,
    PlannerChoice,
    ScenarioConfig,
    make_step_planner,
    run_episode,
)
from .feasibility import FeasibilityLimits
from .frenet import SamplerConfig
from .track import TrackModel
from .vehicle import VehicleGeometry

REPORT_HEADER = "variant,s_d,success,collision,infeasible,track_end,episodes"

_STATUS_COLUMNS = (
    EpisodeStatus.SUCCESS,
    EpisodeStatus.COLLISION,
    EpisodeStatus.INFEASIBLE,
    EpisodeStatus.TRACK_END,
)


@dataclass(frozen=True)
class EvaluationGrid:
    """Initialization sweep; the default reproduces the 1722-point grid."""

    s_b_values: tuple = tuple(float(v) for v in range(20, 101, 2))
    n_b_values: tuple = tuple(float(v) for v in range(-6, 7, 2))
    lookahead_values: tuple = tuple(float(v) for v in range(40, 141, 20))
    v_init: float = 50.0

    @property
    def size(self) -> int:
        return len(self.s_b_values) * len(self.n_b_values) * len(self.lookahead_values)

    @property
    def episodes_per_lookahead(self) -> int:
        return len(self.s_b_values) * len(self.n_b_values)


@dataclass(frozen=True)
class Variant:
    """A named planner configuration to sweep over the grid."""

    name: str
    planner: PlannerChoice
    noise_mu: float = 0.0
    noise_sigma: float = 0.0


def conventional_variants() -> list[Variant]:
    from .planner import PRESETS

    return [Variant(name=name, planner=PlannerChoice(kind="conventional", preset=name))
            for name in PRESETS]


@dataclass(frozen=True)
class RateRow:
    variant: str
    lookahead: float
    success: float
    collision: float
    infeasible: float
    track_end: float
    episodes: int

    def rate(self, status: EpisodeStatus) -> float:
        return {
            EpisodeStatus.SUCCESS: self.success,
            EpisodeStatus.COLLISION: self.collision,
            EpisodeStatus.INFEASIBLE: self.infeasible,
            EpisodeStatus.TRACK_END: self.track_end,
        }[status]


@dataclass
class SuccessReport:
    variant: str
    rows: list[RateRow] = field(default_factory=list)

    def by_lookahead(self) -> dict[float, RateRow]:
        return {row.lookahead: row for row in self.rows}


def episode_seed(master_seed: int, i_sd: int, i_sb: int, i_nb: int) -> int:
    """Stable per-episode RNG seed from the grid coordinates."""
    ss = np.random.SeedSequence([int(master_seed), i_sd, i_sb, i_nb])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class _EpisodeTask:
    i_sd: int
    lookahead: float
    s_b_init: float
    n_b_init: float
    seed: int


_WORKER = {}


def _init_worker(variant, track, limits, geometry, sampler, grid):
    _WORKER["planner"] = make_step_planner(
        variant.planner, track, limits, geometry, sampler
    )
    _WORKER["ctx"] = (variant, track, limits, geometry, sampler, grid)


def _run_task(task: _EpisodeTask) -> tuple[int, str]:
    variant, track, limits, geometry, sampler, grid = _WORKER["ctx"]
    config = ScenarioConfig(
        s_b_init=task.s_b_init,
        n_b_init=task.n_b_init,
        v_init=grid.v_init,
        blocking=BlockingParams(lookahead=task.lookahead),
        planner=variant.planner,
        noise_mu=variant.noise_mu,
        noise_sigma=variant.noise_sigma,
        seed=task.seed,
    )
    outcome = run_episode(
        config, track, limits, geometry, sampler, planner=_WORKER["planner"]
    )
    return task.i_sd, outcome.status.value


def evaluate(
    variant: Variant,
    grid: EvaluationGrid | None = None,
    jobs: int = 1,
    master_seed: int = 0,
    track: TrackModel | None = None,
    limits: FeasibilityLimits | None = None,
    geometry: VehicleGeometry | None = None,
    sampler: SamplerConfig | None = None,
) -> SuccessReport:
    """Run the full grid for one variant and aggregate outcome rates."""
    grid = grid or EvaluationGrid()
    track = track or TrackModel()
    limits = limits or FeasibilityLimits()
    geometry = geometry or VehicleGeometry()
    sampler = sampler or SamplerConfig()
    tasks = [
        _EpisodeTask(
            i_sd=i_sd,
            lookahead=lookahead,
            s_b_init=s_b,
            n_b_init=n_b,
            seed=episode_seed(master_seed, i_sd, i_sb, i_nb),
        )
        for i_sd, lookahead in enumerate(grid.lookahead_values)
        for i_sb, s_b in enumerate(grid.s_b_values)
        for i_nb, n_b in enumerate(grid.n_b_values)
    ]
    init_args = (variant, track, limits, geometry, sampler, grid)
    if jobs <= 1:
        _init_worker(*init_args)
        results = [_run_task(task) for task in tasks]
    else:
        with Pool(min(jobs, cpu_count()), initializer=_init_worker, initargs=init_args) as pool:
            results = pool.map(_run_task, tasks, chunksize=16)
    counts: dict[int, dict[str, int]] = {
        i: {status.value: 0 for status in _STATUS_COLUMNS}
        for i in range(len(grid.lookahead_values))
    }
    for i_sd, status in results:
        counts[i_sd][status] += 1
    episodes = grid.episodes_per_lookahead
    report = SuccessReport(variant=variant.name)
    for i_sd, lookahead in enumerate(grid.lookahead_values):
        c = counts[i_sd]
        report.rows.append(RateRow(
            variant=variant.name,
            lookahead=lookahead,
            success=100.0 * c["success"] / episodes,
            collision=100.0 * c["collision"] / episodes,
            infeasible=100.0 * c["infeasible"] / episodes,
            track_end=100.0 * c["track_end"] / episodes,
            episodes=episodes,
        ))
    return report


def noise_study(
    weights_path: str | Path,
    sigma: float,
    grid: EvaluationGrid | None = None,
    jobs: int = 1,
    master_seed: int = 0,
    mu: float = 0.0,
    **env,
) -> tuple[SuccessReport, SuccessReport]:
    """Noisy-observation evaluation without and with the safety layer.

    Both sweeps share the per-episode seeds, so the observation noise
    sequences are identical while the episodes evolve identically.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    base = PlannerChoice(kind="rl", weights_path=str(weights_path))
    without = Variant(
        name="rl-noise-wo-sl",
        planner=replace(base, safety_on=False),
        noise_mu=mu,
        noise_sigma=sigma,
    )
    with_sl = Variant(
        name="rl-noise-w-sl",
        planner=replace(base, safety_on=True),
        noise_mu=mu,
        noise_sigma=sigma,
    )
    report_without = evaluate(without, grid, jobs, master_seed, **env)
    report_with = evaluate(with_sl, grid, jobs, master_seed, **env)
    return report_without, report_with


def write_report_csv(reports, path: str | Path) -> None:
    """Emit one or more reports as the canonical rate CSV."""
    if isinstance(reports, SuccessReport):
        reports = [reports]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER.split(","))
        for report in reports:
            for row in report.rows:
                writer.writerow([
                    row.variant, f"{row.lookahead:g}",
                    repr(row.success), repr(row.collision),
                    repr(row.infeasible), repr(row.track_end),
                    row.episodes,
                ])


def read_report_csv(path: str | Path) -> list[SuccessReport]:
    """Inverse of write_report_csv (rates parse back exactly)."""
    reports: dict[str, SuccessReport] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_HEADER.split(","):
            raise ValueError(f"unexpected report header in {path}")
        for rec in reader:
            report = reports.setdefault(rec["variant"], SuccessReport(variant=rec["variant"]))
            report.rows.append(RateRow(
                variant=rec["variant"],
                lookahead=float(rec["s_d"]),
                success=float(rec["success"]),
                collision=float(rec["collision"]),
                infeasible=float(rec["infeasible"]),
                track_end=float(rec["track_end"]),
                episodes=int(rec["episodes"]),
            ))
    return list(reports.values())


def plot_success_rates(
    reports: list[SuccessReport],
    path: str | Path,
    title: str = "",
    metric: str = "success",
) -> None:
    """Success-rate-vs-lookahead lines, one per report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for report in reports:
        xs = [row.lookahead for row in report.rows]
        ys = [getattr(row, metric) for row in report.rows]
        ax.plot(xs, ys, marker="o", label=report.variant)
    ax.set_xlabel("blocking lookahead $s_d$ in m")
    ax.set_ylabel(f"{metric} rate in %")
    ax.set_ylim(-5.0, 105.0)
    ax.grid(True, alpha=0.4)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_noise_study(
    report_without: SuccessReport,
    report_with: SuccessReport,
    path: str | Path,
    title: str = "",
) -> None:
    """Success and infeasibility rates with/without the safety layer."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for report, style, label in (
        (report_without, "-", "w/o safety layer"),
        (report_with, "--", "w/ safety layer"),
    ):
        xs = [row.lookahead for row in report.rows]
        ax.plot(xs, [r.success for r in report.rows], style, marker="o",
                label=f"success {label}")
        ax.plot(xs, [r.infeasible for r in report.rows], style, marker="s",
                label=f"infeasibility {label}")
    ax.set_xlabel("blocking lookahead $s_d$ in m")
    ax.set_ylabel("rate in %")
    ax.set_ylim(-5.0, 105.0)
    ax.grid(True, alpha=0.4)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
