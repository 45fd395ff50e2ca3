"""Fallback selection when the learned trajectory is infeasible.

Regenerates the sampling planner's candidate set from the same start
state, keeps the feasible ones, and picks the candidate closest to the
rejected trajectory in integrated squared curvilinear distance. No
opponent prediction is involved: the layer repairs infeasibility, it
does not try to repair predicted collisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feasibility import FeasibilityLimits, scan_candidates
from .frenet import (
    EgoState,
    EndStateGrid,
    SamplerConfig,
    Trajectory,
    build_candidates,
)
from .planner import NoValidTrajectoryError
from .track import TrackModel
from .vehicle import VehicleGeometry


@dataclass(frozen=True)
class SafetyOutcome:
    replaced: bool
    trajectory: Trajectory
    similarity_cost: float
    candidate_index: int | None = None


def rescue(
    rejected: Trajectory,
    ego: EgoState,
    track: TrackModel,
    limits: FeasibilityLimits,
    geometry: VehicleGeometry,
    grid: EndStateGrid,
    sampler: SamplerConfig,
) -> SafetyOutcome:
    """Most similar feasible candidate to a rejected trajectory.

    Similarity is the left-endpoint rectangle-rule integral of the
    squared position gap in both track coordinates; ties resolve to the
    lowest flat candidate index.

    Raises
    ------
    NoValidTrajectoryError
        If no candidate in the set is feasible either.
    """
    batch = build_candidates(ego, grid, sampler)
    mask, _ = scan_candidates(
        batch.s_dot, batch.s_ddot, batch.n, batch.n_dot, batch.n_ddot,
        track, limits, geometry,
    )
    if not mask.any():
        raise NoValidTrajectoryError("safety layer found no feasible candidate")
    ds = rejected.s - batch.s[:, None, :]
    dn = rejected.n - batch.n[None, :, :]
    integrand = ds * ds + dn * dn
    dt = batch.t[1] - batch.t[0]
    costs = integrand[:, :, :-1].sum(axis=2) * dt
    costs = np.where(mask, costs, np.inf)
    index = int(np.argmin(costs))
    return SafetyOutcome(
        replaced=True,
        trajectory=batch.trajectory(index, track),
        similarity_cost=float(costs.flat[index]),
        candidate_index=index,
    )
