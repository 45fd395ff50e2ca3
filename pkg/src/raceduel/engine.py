"""Episode simulation: alternating replanning and opponent stepping.

Each simulation step plans a fresh trajectory for the overtaking
vehicle from its current state, advances it along that trajectory under
the perfect-tracking assumption, then steps the blocking vehicle once
with its controller reacting to the updated ego position. Terminal
conditions are checked in a fixed order: infeasibility (no plan),
collision, successful overtake, end of track.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import BlockingController, BlockingParams, CurvilinearState, lateral_velocity, longitudinal_velocity
from .feasibility import FeasibilityLimits, check_all
from .frenet import EgoState, SamplerConfig, Trajectory, sample_end_states, trajectory_from_end_state
from .planner import PRESETS, ConventionalPlanner, CostWeights, NoValidTrajectoryError
from .policy import PolicyWeights, build_state, denormalize_action, forward
from .safety import rescue
from .track import TrackModel
from .vehicle import VehicleGeometry

TRACE_HEADER = "time,s_o,n_o,v_o,s_b,n_b,chi_b,v_b,end_n,end_sdot,sl_engaged,status"


class EpisodeStatus(enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    INFEASIBLE = "infeasible"
    TRACK_END = "track_end"


@dataclass(frozen=True)
class PlannerChoice:
    """Which planner drives the overtaking vehicle in an episode."""

    kind: str = "conventional"  # "conventional" | "rl"
    preset: str = "small-ch"
    weights_path: str | None = None
    safety_on: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("conventional", "rl"):
            raise ValueError(f"unknown planner kind: {self.kind}")
        if self.kind == "conventional" and self.preset not in PRESETS:
            raise ValueError(f"unknown preset: {self.preset}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One episode's initialization and runtime knobs."""

    s_b_init: float
    n_b_init: float
    v_init: float = 50.0
    blocking: BlockingParams = field(default_factory=BlockingParams)
    planner: PlannerChoice = field(default_factory=PlannerChoice)
    dt: float = 0.1
    max_steps: int = 2000
    noise_mu: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    success_margin: float = 1.0
    collision_enabled: bool = True
    collision_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.s_b_init <= 0.0:
            raise ValueError("the blocking vehicle must start ahead (s_b_init > 0)")
        if self.dt <= 0.0 or self.max_steps < 1:
            raise ValueError("invalid time discretization")
        if self.noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class TraceRow:
    time: float
    s_o: float
    n_o: float
    v_o: float
    s_b: float
    n_b: float
    chi_b: float
    v_b: float
    end_n: float
    end_sdot: float
    sl_engaged: bool
    status: str


@dataclass
class EpisodeOutcome:
    status: EpisodeStatus
    steps: int
    trace: list[TraceRow]


def rectangles_collide(
    x1: float, y1: float, heading1: float,
    x2: float, y2: float, heading2: float,
    geometry: VehicleGeometry,
    scale: float = 1.0,
) -> bool:
    """Oriented-rectangle overlap via the separating-axis test.

    Both footprints share the same geometry, centered on the given
    positions; touching counts as overlap. ``scale`` shrinks both
    footprints uniformly (curriculum stages use fractions of the true
    geometry).
    """
    half_l = 0.5 * geometry.length * scale
    half_w = 0.5 * geometry.width * scale
    dx = x2 - x1
    dy = y2 - y1
    axes = []
    for h in (heading1, heading2):
        c, s = math.cos(h), math.sin(h)
        axes.append((c, s))
        axes.append((-s, c))
    u1, v1, u2, v2 = axes
    for ax, ay in axes:
        center_gap = abs(dx * ax + dy * ay)
        reach1 = half_l * abs(u1[0] * ax + u1[1] * ay) + half_w * abs(v1[0] * ax + v1[1] * ay)
        reach2 = half_l * abs(u2[0] * ax + u2[1] * ay) + half_w * abs(v2[0] * ax + v2[1] * ay)
        if center_gap > reach1 + reach2:
            return False
    return True


def check_collision(
    ego: EgoState,
    opponent: CurvilinearState,
    track: TrackModel,
    geometry: VehicleGeometry,
    scale: float = 1.0,
) -> bool:
    """Footprint overlap between the two vehicles in the world frame."""
    ex, ey = track.to_cartesian(ego.s, ego.n)
    ox, oy = track.to_cartesian(opponent.s, opponent.n)
    return rectangles_collide(
        ex, ey, ego.heading, ox, oy, opponent.chi, geometry, scale
    )


def check_success(
    ego: EgoState,
    opponent: CurvilinearState,
    geometry: VehicleGeometry,
    margin: float = 1.0,
) -> bool:
    """Overtake complete: a full vehicle length plus margin of clear air."""
    return ego.s - opponent.s >= geometry.length + margin


def state_at_time(traj: Trajectory, tau: float) -> EgoState:
    """Trajectory state at elapsed time ``tau`` (exact sample or linear)."""
    grid_dt = traj.t[1] - traj.t[0]
    k = tau / grid_dt
    k_round = round(k)
    if abs(k - k_round) < 1e-9 and 0 <= k_round < traj.n_points:
        return traj.state_at(int(k_round))
    lo = int(np.clip(math.floor(k), 0, traj.n_points - 2))
    w = (tau - traj.t[lo]) / grid_dt

    def lerp(channel):
        return float(channel[lo] + w * (channel[lo + 1] - channel[lo]))

    return EgoState(
        s=lerp(traj.s), s_dot=lerp(traj.s_dot), s_ddot=lerp(traj.s_ddot),
        n=lerp(traj.n), n_dot=lerp(traj.n_dot), n_ddot=lerp(traj.n_ddot),
    )


class DuelSim:
    """Stepwise two-vehicle simulation for one episode.

    Exposes the per-step protocol used both by the closed episode loop
    and by the training environment server: observe, apply a planned
    trajectory, read the terminal status.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        track: TrackModel | None = None,
        geometry: VehicleGeometry | None = None,
        sampler: SamplerConfig | None = None,
    ):
        self.config = config
        self.track = track or TrackModel()
        self.geometry = geometry or VehicleGeometry()
        self.sampler = sampler or SamplerConfig()
        lo, hi = self.track.lateral_limits(self.geometry.half_width)
        if not lo <= config.n_b_init <= hi:
            raise ValueError("blocking vehicle initialized outside the drivable corridor")
        self.ego = EgoState(0.0, config.v_init, 0.0, 0.0, 0.0, 0.0)
        self.opponent = CurvilinearState(
            s=config.s_b_init, n=config.n_b_init, chi=0.0, v=config.v_init, delta=0.0
        )
        self.controller = BlockingController(config.blocking, self.track, config.dt)
        self.rng = np.random.default_rng(config.seed)
        self.steps = 0
        self.status: EpisodeStatus | None = None

    def observe_opponent_rate(self) -> float:
        """Opponent longitudinal rate as seen by the planner (one draw per step)."""
        rate = longitudinal_velocity(self.opponent, self.track)
        if self.config.noise_sigma > 0.0:
            rate += self.rng.normal(self.config.noise_mu, self.config.noise_sigma)
        return rate

    def mark_infeasible(self) -> None:
        self.status = EpisodeStatus.INFEASIBLE

    def advance(self, traj: Trajectory) -> EpisodeStatus | None:
        """Advance both vehicles by one step and evaluate terminal rules.

        Both vehicles move simultaneously over the step: the blocking
        controller samples the overtaking vehicle's state at the start
        of the interval.
        """
        if self.status is not None:
            raise RuntimeError("episode already terminated")
        prev = self.ego
        self.ego = state_at_time(traj, self.config.dt)
        self.opponent = self.controller.advance(
            self.opponent, prev.n, prev.n_dot, prev.n_ddot
        )
        self.steps += 1
        if self.config.collision_enabled and check_collision(
            self.ego, self.opponent, self.track, self.geometry, self.config.collision_scale
        ):
            self.status = EpisodeStatus.COLLISION
        elif check_success(self.ego, self.opponent, self.geometry, self.config.success_margin):
            self.status = EpisodeStatus.SUCCESS
        elif self.ego.s + self.sampler.v_max * self.sampler.horizon >= self.track.length:
            self.status = EpisodeStatus.TRACK_END
        elif self.steps >= self.config.max_steps:
            self.status = EpisodeStatus.TRACK_END
        return self.status


@dataclass(frozen=True)
class StepPlan:
    trajectory: Trajectory | None
    sl_engaged: bool = False


class ConventionalStepPlanner:
    """Adapter running the sampling planner each step (no observation noise)."""

    def __init__(
        self,
        weights: CostWeights,
        track: TrackModel,
        limits: FeasibilityLimits,
        geometry: VehicleGeometry,
        sampler: SamplerConfig | None = None,
    ):
        self._planner = ConventionalPlanner(weights, track, limits, geometry, sampler)

    def plan_step(
        self, ego: EgoState, opponent: CurvilinearState, observed_rate: float
    ) -> StepPlan:
        try:
            result = self._planner.plan(ego, opponent)
        except NoValidTrajectoryError:
            return StepPlan(None)
        return StepPlan(result.trajectory)


class RlStepPlanner:
    """Adapter running the learned planner, optionally with the safety layer."""

    def __init__(
        self,
        weights: PolicyWeights,
        track: TrackModel,
        limits: FeasibilityLimits,
        geometry: VehicleGeometry,
        sampler: SamplerConfig | None = None,
        safety_on: bool = True,
    ):
        self.weights = weights
        self.track = track
        self.limits = limits
        self.geometry = geometry
        self.sampler = sampler or SamplerConfig()
        self.safety_on = safety_on
        self.grid = sample_end_states(None, track, geometry, self.sampler)

    def plan_step(
        self, ego: EgoState, opponent: CurvilinearState, observed_rate: float
    ) -> StepPlan:
        state = build_state(ego, opponent, self.weights.norms, self.track, observed_rate)
        action = forward(state, self.weights)
        end = denormalize_action(action, self.weights.action_bounds)
        traj = trajectory_from_end_state(ego, end, self.track, self.sampler)
        if check_all(traj, self.track, self.limits, self.geometry):
            return StepPlan(traj)
        if not self.safety_on:
            return StepPlan(None)
        try:
            outcome = rescue(
                traj, ego, self.track, self.limits, self.geometry, self.grid, self.sampler
            )
        except NoValidTrajectoryError:
            return StepPlan(None)
        return StepPlan(outcome.trajectory, sl_engaged=True)


def make_step_planner(
    choice: PlannerChoice,
    track: TrackModel,
    limits: FeasibilityLimits,
    geometry: VehicleGeometry,
    sampler: SamplerConfig | None = None,
    weights: PolicyWeights | None = None,
):
    if choice.kind == "conventional":
        return ConventionalStepPlanner(PRESETS[choice.preset], track, limits, geometry, sampler)
    if weights is None:
        if choice.weights_path is None:
            raise ValueError("rl planner needs a weights file")
        weights = PolicyWeights.load(choice.weights_path)
    return RlStepPlanner(
        weights, track, limits, geometry, sampler, safety_on=choice.safety_on
    )


def run_episode(
    config: ScenarioConfig,
    track: TrackModel | None = None,
    limits: FeasibilityLimits | None = None,
    geometry: VehicleGeometry | None = None,
    sampler: SamplerConfig | None = None,
    planner=None,
) -> EpisodeOutcome:
    """Run one episode to termination and return its outcome with trace.

    A prebuilt step planner can be passed to amortize setup across many
    episodes; it must match the supplied track/limits/geometry.
    """
    track = track or TrackModel()
    limits = limits or FeasibilityLimits()
    geometry = geometry or VehicleGeometry()
    sampler = sampler or SamplerConfig()
    if planner is None:
        planner = make_step_planner(config.planner, track, limits, geometry, sampler)
    sim = DuelSim(config, track, geometry, sampler)
    trace: list[TraceRow] = []
    while sim.status is None:
        observed = sim.observe_opponent_rate()
        step = planner.plan_step(sim.ego, sim.opponent, observed)
        if step.trajectory is None:
            sim.mark_infeasible()
            trace.append(_trace_row(sim, math.nan, math.nan, False))
            break
        sim.advance(step.trajectory)
        trace.append(_trace_row(
            sim, step.trajectory.end_lateral, step.trajectory.end_velocity, step.sl_engaged
        ))
    return EpisodeOutcome(status=sim.status, steps=sim.steps, trace=trace)


def _trace_row(sim: DuelSim, end_n: float, end_sdot: float, sl: bool) -> TraceRow:
    return TraceRow(
        time=sim.steps * sim.config.dt,
        s_o=sim.ego.s,
        n_o=sim.ego.n,
        v_o=sim.ego.speed,
        s_b=sim.opponent.s,
        n_b=sim.opponent.n,
        chi_b=sim.opponent.chi,
        v_b=sim.opponent.v,
        end_n=end_n,
        end_sdot=end_sdot,
        sl_engaged=sl,
        status="running" if sim.status is None else sim.status.value,
    )


def write_trace_csv(outcome: EpisodeOutcome, path: str | Path) -> None:
    """One CSV per episode; the last row carries the terminal status."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER.split(","))
        for row in outcome.trace:
            writer.writerow([
                repr(row.time), repr(row.s_o), repr(row.n_o), repr(row.v_o),
                repr(row.s_b), repr(row.n_b), repr(row.chi_b), repr(row.v_b),
                repr(row.end_n), repr(row.end_sdot), int(row.sl_engaged), row.status,
            ])
