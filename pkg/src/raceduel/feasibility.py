"""Trajectory feasibility: track bounds, turning radius, gg-diagram.

A trajectory is drivable iff every sample stays inside the track with
half a vehicle width of margin, never demands a curvature tighter than
the minimum turning radius, and keeps the combined longitudinal/lateral
acceleration inside the velocity-dependent gg envelope (elliptical
combination). Checks run in that order; the verdict records the first
violating check and sample.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .frenet import CandidateBatch, FloatArray, Trajectory
from .track import TrackModel
from .vehicle import VehicleGeometry


class Violation(enum.Enum):
    BOUNDS = "bounds"
    TURNING_RADIUS = "turning_radius"
    GG = "gg"


#: numerical guard on the corridor check: candidates targeting the
#: boundary itself reproduce it only to evaluation precision, and the
#: boundary-touching case counts as inside
BOUNDS_TOL = 1e-9


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    violation: Violation | None = None
    sample_index: int | None = None

    def __bool__(self) -> bool:
        return self.feasible


FEASIBLE = FeasibilityVerdict(True)


@dataclass(frozen=True)
class FeasibilityLimits:
    """Kinematic and dynamic limits of the overtaking vehicle.

    The gg envelope is a lookup table over speed, interpolated linearly
    and clamped at the table ends. The default table is shaped like a
    real race car's: grip-limited laterally, power-limited forward with
    the longitudinal reserve collapsing toward top speed. Envelopes load
    from config as (speed, a_lon_max, a_lat_max) rows.
    """

    r_min: float = 1.0
    gg_speeds: FloatArray = None  # type: ignore[assignment]
    gg_a_lon: FloatArray = None  # type: ignore[assignment]
    gg_a_lat: FloatArray = None  # type: ignore[assignment]
    speed_eps: float = 0.1

    def __post_init__(self) -> None:
        if self.gg_speeds is None:
            object.__setattr__(self, "gg_speeds", np.array([0.0, 50.0, 85.0]))
            object.__setattr__(self, "gg_a_lon", np.array([8.0, 3.0, 1.0]))
            object.__setattr__(self, "gg_a_lat", np.array([20.0, 20.0, 20.0]))
        speeds = np.asarray(self.gg_speeds, dtype=float)
        object.__setattr__(self, "gg_speeds", speeds)
        object.__setattr__(self, "gg_a_lon", np.asarray(self.gg_a_lon, dtype=float))
        object.__setattr__(self, "gg_a_lat", np.asarray(self.gg_a_lat, dtype=float))
        if self.r_min <= 0.0:
            raise ValueError("r_min must be positive")
        if not (self.gg_speeds.size == self.gg_a_lon.size == self.gg_a_lat.size):
            raise ValueError("gg table rows must align")
        if np.any(np.diff(self.gg_speeds) <= 0.0):
            raise ValueError("gg table speeds must be strictly increasing")
        if np.any(self.gg_a_lon < 0.0) or np.any(self.gg_a_lat < 0.0):
            raise ValueError("gg limits must be non-negative")

    def gg_limits(self, v: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Interpolated (a_lon_max, a_lat_max) at speeds ``v``."""
        return (
            np.interp(v, self.gg_speeds, self.gg_a_lon),
            np.interp(v, self.gg_speeds, self.gg_a_lat),
        )


def _first_true(mask: FloatArray) -> int:
    return int(np.argmax(mask))


def check_bounds(
    traj: Trajectory, track: TrackModel, geometry: VehicleGeometry
) -> FeasibilityVerdict:
    """Fails iff any sample leaves the half-width-inset corridor."""
    lo, hi = track.lateral_limits(geometry.half_width)
    bad = (traj.n < lo - BOUNDS_TOL) | (traj.n > hi + BOUNDS_TOL)
    if bad.any():
        return FeasibilityVerdict(False, Violation.BOUNDS, _first_true(bad))
    return FEASIBLE


def check_turning_radius(traj: Trajectory, limits: FeasibilityLimits) -> FeasibilityVerdict:
    """Fails on curvature beyond 1/r_min (at driving speed) or reversal.

    Samples with negative longitudinal velocity count as violations
    here: reverse motion is never a valid racing candidate.
    """
    bad = traj.s_dot < 0.0
    bad |= (traj.v > limits.speed_eps) & (np.abs(traj.curvature) > 1.0 / limits.r_min)
    if bad.any():
        return FeasibilityVerdict(False, Violation.TURNING_RADIUS, _first_true(bad))
    return FEASIBLE


def _gg_excess(a_lon, a_lat, v, limits: FeasibilityLimits) -> FloatArray:
    """Elliptical combination minus one; positive values violate.

    Zero-limit table entries admit only zero acceleration on that axis.
    """
    lim_lon, lim_lat = limits.gg_limits(v)
    term_lon = np.where(
        a_lon == 0.0, 0.0,
        np.where(lim_lon > 0.0, (a_lon / np.where(lim_lon > 0.0, lim_lon, 1.0)) ** 2, np.inf),
    )
    term_lat = np.where(
        a_lat == 0.0, 0.0,
        np.where(lim_lat > 0.0, (a_lat / np.where(lim_lat > 0.0, lim_lat, 1.0)) ** 2, np.inf),
    )
    return term_lon + term_lat - 1.0


def check_gg(traj: Trajectory, limits: FeasibilityLimits) -> FeasibilityVerdict:
    """Fails iff the combined acceleration leaves the gg ellipse."""
    bad = _gg_excess(traj.a_lon, traj.a_lat, traj.v, limits) > 0.0
    if bad.any():
        return FeasibilityVerdict(False, Violation.GG, _first_true(bad))
    return FEASIBLE


def check_all(
    traj: Trajectory,
    track: TrackModel,
    limits: FeasibilityLimits,
    geometry: VehicleGeometry,
) -> FeasibilityVerdict:
    """All three checks, short-circuiting at the first failure."""
    verdict = check_bounds(traj, track, geometry)
    if not verdict:
        return verdict
    verdict = check_turning_radius(traj, limits)
    if not verdict:
        return verdict
    return check_gg(traj, limits)


def feasible_mask(
    batch: CandidateBatch,
    track: TrackModel,
    limits: FeasibilityLimits,
    geometry: VehicleGeometry,
) -> FloatArray:
    """Boolean (n_velocity, n_lateral) mask over a candidate batch.

    Elementwise identical to running check_all on each candidate; the
    lateral-bounds and reversal tests factor over the grid axes.
    """
    lo, hi = track.lateral_limits(geometry.half_width)
    lat_ok = ((batch.n >= lo - BOUNDS_TOL) & (batch.n <= hi + BOUNDS_TOL)).all(axis=1)
    forward_ok = (batch.s_dot >= 0.0).all(axis=1)
    radius_ok = ~(
        (batch.v > limits.speed_eps) & (np.abs(batch.curvature) > 1.0 / limits.r_min)
    ).any(axis=2)
    gg_ok = ~(_gg_excess(batch.a_lon, batch.a_lat, batch.v, limits) > 0.0).any(axis=2)
    return forward_ok[:, None] & lat_ok[None, :] & radius_ok & gg_ok


def scan_candidates(
    s_dot: FloatArray,
    s_ddot: FloatArray,
    n: FloatArray,
    n_dot: FloatArray,
    n_ddot: FloatArray,
    track: TrackModel,
    limits: FeasibilityLimits,
    geometry: VehicleGeometry,
) -> tuple[FloatArray, FloatArray]:
    """Fused feasibility scan over the candidate grid rows.

    Returns the (n_velocity, n_lateral) feasibility mask and the full
    speed array needed by the cost; results agree bitwise with the
    unfused numpy path (same operations in the same order). Speeds of
    infeasible candidates are left at zero.
    """
    from ._kernels import candidate_scan

    lo, hi = track.lateral_limits(geometry.half_width)
    return candidate_scan(
        s_dot, s_ddot, n, n_dot, n_ddot,
        lo - BOUNDS_TOL, hi + BOUNDS_TOL, 1.0 / limits.r_min, limits.speed_eps,
        limits.gg_speeds, limits.gg_a_lon, limits.gg_a_lat,
    )


def load_gg_table(rows) -> FeasibilityLimits:
    """Limits from (speed, a_lon_max, a_lat_max) rows, e.g. config data."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("gg table rows must be (speed, a_lon_max, a_lat_max)")
    order = np.argsort(arr[:, 0])
    arr = arr[order]
    return FeasibilityLimits(gg_speeds=arr[:, 0], gg_a_lon=arr[:, 1], gg_a_lat=arr[:, 2])
