"""Sampling-based planner with opponent prediction and cost selection.

Builds the full end-state candidate set, drops infeasible candidates,
and returns the cost minimizer. The cost integrates lateral deviation,
shortfall from the velocity target and proximity to the predicted
opponent position; the integral is approximated with the left-endpoint
rectangle rule on the trajectory time grid. Ties resolve to the lowest
flat candidate index, which keeps repeated runs and the exhaustive
scoring oracle in exact agreement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import CurvilinearState, lateral_velocity, longitudinal_velocity
from .feasibility import FeasibilityLimits, scan_candidates
from .frenet import (
    CandidateBatch,
    EgoState,
    EndStateGrid,
    FloatArray,
    SamplerConfig,
    Trajectory,
    build_candidates,
    sample_end_states,
)
from .track import TrackModel
from .vehicle import VehicleGeometry


class PredictionMode(enum.Enum):
    """Lateral opponent model: extrapolated heading vs frozen position."""

    CH = "ch"
    CLP = "clp"


class NoValidTrajectoryError(Exception):
    """Every candidate failed feasibility; the episode cannot continue."""


@dataclass(frozen=True)
class CostWeights:
    """Weights of the scalar trajectory cost and the prediction ellipse.

    ``p_s`` and ``p_n`` shape the elliptical penalty spanned around the
    predicted opponent position; ``v_target`` is the velocity the cost
    pulls toward (the vehicle's top speed).
    """

    w_n: float
    w_v: float
    w_pr: float
    p_s: float
    p_n: float
    prediction_mode: PredictionMode
    v_target: float = 85.0

    def __post_init__(self) -> None:
        if min(self.w_n, self.w_v, self.w_pr) < 0.0:
            raise ValueError("cost weights must be non-negative")
        if self.p_s <= 0.0 or self.p_n <= 0.0:
            raise ValueError("ellipse parameters must be positive")


#: Tuned weight sets, one per ellipse size and prediction mode.
PRESETS: dict[str, CostWeights] = {
    "small-ch": CostWeights(0.08, 0.28, 5000.0, 0.08, 0.5, PredictionMode.CH),
    "small-clp": CostWeights(0.0, 0.04, 5000.0, 0.08, 0.5, PredictionMode.CLP),
    "medium-ch": CostWeights(0.0, 0.08, 5000.0, 0.02, 0.18, PredictionMode.CH),
    "medium-clp": CostWeights(0.72, 1.0, 5000.0, 0.02, 0.18, PredictionMode.CLP),
    "large-ch": CostWeights(0.36, 0.24, 5000.0, 0.01, 0.1, PredictionMode.CH),
    "large-clp": CostWeights(0.8, 0.28, 5000.0, 0.01, 0.1, PredictionMode.CLP),
}


@dataclass(frozen=True)
class OpponentPrediction:
    """Predicted opponent track coordinates on the trajectory time grid."""

    s: FloatArray
    n: FloatArray


def predict(
    opponent: CurvilinearState,
    mode: PredictionMode,
    horizon: float,
    n_points: int,
    track: TrackModel,
    lateral_margin: float,
) -> OpponentPrediction:
    """Constant-velocity longitudinal prediction with a lateral model.

    CH extrapolates the opponent's current lateral rate; CLP freezes the
    lateral position. Lateral values clip to the margin-inset corridor
    so the prediction never leaves the track.
    """
    t = np.linspace(0.0, horizon, n_points)
    s_rate = longitudinal_velocity(opponent, track)
    s_pred = opponent.s + s_rate * t
    if mode is PredictionMode.CH:
        n_pred = opponent.n + lateral_velocity(opponent) * t
    else:
        n_pred = np.full_like(t, opponent.n)
    lo, hi = track.lateral_limits(lateral_margin)
    return OpponentPrediction(s=s_pred, n=np.clip(n_pred, lo, hi))


def prediction_cost(ego_s, ego_n, pred_s, pred_n, p_s: float, p_n: float):
    """Elliptical proximity penalty in (0, 1], peaking on the prediction."""
    ds = pred_s - ego_s
    dn = pred_n - ego_n
    return np.exp(-p_s * ds * ds - p_n * dn * dn)


def trajectory_cost(
    traj: Trajectory, pred: OpponentPrediction, weights: CostWeights
) -> float:
    """Scalar cost of one trajectory (left-endpoint rectangle rule)."""
    if pred.s.size != traj.n_points:
        raise ValueError("prediction and trajectory grids differ")
    dv = weights.v_target - traj.v
    integrand = (
        weights.w_n * traj.n * traj.n
        + weights.w_v * dv * dv
        + weights.w_pr * prediction_cost(traj.s, traj.n, pred.s, pred.n, weights.p_s, weights.p_n)
    )
    dt = traj.t[1] - traj.t[0]
    return float(integrand[:-1].sum() * dt)


def batch_costs(
    batch: CandidateBatch,
    pred: OpponentPrediction,
    weights: CostWeights,
    v: FloatArray | None = None,
) -> FloatArray:
    """Costs of all candidates, elementwise identical to trajectory_cost.

    ``v`` can inject precomputed candidate speeds (the feasibility scan
    produces them); entries of infeasible candidates may be arbitrary.
    The buffer reuse below must keep the exact operation order of
    trajectory_cost's integrand so both routes agree bitwise.
    """
    if v is None:
        v = batch.v
    n = batch.n[None, :, :]
    s = batch.s[:, None, :]
    # exponent of the prediction term, separably: (-p_s*ds)*ds - (p_n*dn)*dn
    ds = pred.s - s
    dn = pred.n - n
    arg_s = -weights.p_s * ds
    arg_s *= ds
    arg_n = weights.p_n * dn
    arg_n *= dn
    big = np.subtract(arg_s, arg_n, out=np.empty(v.shape))
    np.exp(big, out=big)
    big *= weights.w_pr
    dvel = weights.v_target - v
    wdv = weights.w_v * dvel
    wdv *= dvel
    lat_term = weights.w_n * n
    lat_term *= batch.n[None, :, :]
    wdv += lat_term  # (w_n*n*n + w_v*dv*dv), addition commutes bitwise
    big += wdv  # ... + w_pr*d_pr, matching the left-to-right sum
    dt = batch.t[1] - batch.t[0]
    return big[:, :, :-1].sum(axis=2) * dt


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    candidate_index: int
    cost: float


class ConventionalPlanner:
    """Predict-then-plan pipeline around one weight set.

    Stateless between calls; safe to share across sequential replans of
    one episode but instantiated per variant.
    """

    def __init__(
        self,
        weights: CostWeights,
        track: TrackModel,
        limits: FeasibilityLimits,
        geometry: VehicleGeometry,
        sampler: SamplerConfig | None = None,
    ):
        self.weights = weights
        self.track = track
        self.limits = limits
        self.geometry = geometry
        self.sampler = sampler or SamplerConfig()
        self.grid: EndStateGrid = sample_end_states(None, track, geometry, self.sampler)

    def plan(self, ego: EgoState, opponent: CurvilinearState) -> PlanResult:
        """Lowest-cost feasible candidate for the current duel state.

        Raises
        ------
        NoValidTrajectoryError
            If the entire candidate set is infeasible.
        """
        batch = build_candidates(ego, self.grid, self.sampler)
        mask, v = scan_candidates(
            batch.s_dot, batch.s_ddot, batch.n, batch.n_dot, batch.n_ddot,
            self.track, self.limits, self.geometry,
        )
        if not mask.any():
            raise NoValidTrajectoryError("all candidates infeasible")
        pred = predict(
            opponent,
            self.weights.prediction_mode,
            self.sampler.horizon,
            self.sampler.n_points,
            self.track,
            self.geometry.half_width,
        )
        costs = batch_costs(batch, pred, self.weights, v=v)
        costs = np.where(mask, costs, np.inf)
        index = int(np.argmin(costs))  # C-order flat index: ties pick the lowest
        return PlanResult(
            trajectory=batch.trajectory(index, self.track),
            candidate_index=index,
            cost=float(costs.flat[index]),
        )
