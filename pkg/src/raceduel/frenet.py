"""Jerk-minimal polynomial trajectories in the curvilinear frame.

Lateral motion candidates are quintic polynomials pinned at both ends;
longitudinal candidates are quartics with a free end position. Both are
the jerk-minimal connections for their boundary conditions. Candidates
are discretized on a fixed time grid and carry Cartesian, curvature and
acceleration channels for the downstream feasibility checks.

The coefficient solvers and channel derivations accept scalars or numpy
arrays through one code path, so a row of a batched candidate set is
bit-identical to the same candidate built in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .track import TrackModel
from .vehicle import VehicleGeometry

FloatArray = NDArray[np.float64]

#: Speed below which curvature and tangential acceleration are reported
#: as zero instead of dividing by a vanishing speed.
SPEED_EPS = 0.1


@dataclass(frozen=True)
class EgoState:
    """Planning start state of the overtaking vehicle.

    Position, velocity and acceleration in both curvilinear directions;
    this is exactly the boundary data consumed by the polynomial solvers.
    """

    s: float
    s_dot: float
    s_ddot: float
    n: float
    n_dot: float
    n_ddot: float

    @property
    def speed(self) -> float:
        return math.sqrt(self.s_dot * self.s_dot + self.n_dot * self.n_dot)

    @property
    def heading(self) -> float:
        """Orientation relative to the reference line [rad]."""
        return math.atan2(self.n_dot, self.s_dot)


@dataclass(frozen=True)
class EndState:
    """Boundary condition tuple at the horizon defining one candidate.

    The longitudinal end acceleration is fixed to zero and the end
    position is free (quartic manifold), so four numbers suffice.
    """

    n_end: float
    n_dot_end: float
    n_ddot_end: float
    s_dot_end: float


def quintic_coefficients(n0, v0, a0, n_end, v_end, a_end, horizon):
    """Coefficients c0..c5 of the jerk-minimal quintic, lowest order first.

    The start state fixes c0..c2 directly; the remaining three follow
    from closed-form elimination of the end-condition system. Inputs
    broadcast, so a whole end-state grid solves in one call.
    """
    T = horizon
    c0, c1, c2 = n0, v0, 0.5 * a0
    dp = n_end - (c0 + T * (c1 + T * c2))
    dv = v_end - (c1 + 2.0 * c2 * T)
    da = a_end - 2.0 * c2
    T2 = T * T
    T3 = T2 * T
    T4 = T3 * T
    T5 = T4 * T
    c3 = (10.0 * dp - 4.0 * T * dv + 0.5 * T2 * da) / T3
    c4 = (-15.0 * dp + 7.0 * T * dv - T2 * da) / T4
    c5 = (6.0 * dp - 3.0 * T * dv + 0.5 * T2 * da) / T5
    return np.stack(np.broadcast_arrays(
        np.asarray(c0, dtype=float), np.asarray(c1, dtype=float),
        np.asarray(c2, dtype=float), c3, c4, c5), axis=-1)


def quartic_coefficients(s0, v0, a0, v_end, a_end, horizon):
    """Coefficients c0..c4 of the jerk-minimal quartic (end position free)."""
    T = horizon
    c0, c1, c2 = s0, v0, 0.5 * a0
    dv = v_end - (c1 + 2.0 * c2 * T)
    da = a_end - 2.0 * c2
    T2 = T * T
    T3 = T2 * T
    c3 = (3.0 * dv - T * da) / (3.0 * T2)
    c4 = (T * da - 2.0 * dv) / (4.0 * T3)
    return np.stack(np.broadcast_arrays(
        np.asarray(c0, dtype=float), np.asarray(c1, dtype=float),
        np.asarray(c2, dtype=float), c3, c4), axis=-1)


def polyval(coeffs: FloatArray, t) -> FloatArray:
    """Horner evaluation of ``coeffs[..., k]`` (lowest order first) at ``t``."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    if scalar:
        t = t[None]
    res = np.broadcast_to(coeffs[..., -1][..., None], coeffs.shape[:-1] + t.shape).copy()
    for i in range(coeffs.shape[-1] - 2, -1, -1):
        res *= t
        res += coeffs[..., i][..., None]
    if scalar:
        return res[..., 0] if res.ndim > 1 else float(res[0])
    return res


def polyder(coeffs: FloatArray, order: int = 1) -> FloatArray:
    """Coefficients of the derivative polynomial (lowest order first)."""
    c = np.asarray(coeffs, dtype=float)
    for _ in range(order):
        if c.shape[-1] == 1:
            return np.zeros_like(c[..., :1])
        c = c[..., 1:] * np.arange(1, c.shape[-1], dtype=float)
    return c


@dataclass(frozen=True)
class QuinticCurve:
    """Degree-5 lateral connection n(t) over a fixed horizon."""

    coefficients: FloatArray
    horizon: float

    def position(self, t) -> FloatArray:
        return polyval(self.coefficients, t)

    def velocity(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients), t)

    def acceleration(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients, 2), t)

    def jerk(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients, 3), t)


@dataclass(frozen=True)
class QuarticCurve:
    """Degree-4 longitudinal connection s(t); end position unconstrained."""

    coefficients: FloatArray
    horizon: float

    def position(self, t) -> FloatArray:
        return polyval(self.coefficients, t)

    def velocity(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients), t)

    def acceleration(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients, 2), t)

    def jerk(self, t) -> FloatArray:
        return polyval(polyder(self.coefficients, 3), t)


def solve_quintic(start, end, horizon: float) -> QuinticCurve:
    """Unique quintic matching [pos, vel, acc] at t=0 and t=horizon."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    n0, v0, a0 = start
    ne, ve, ae = end
    return QuinticCurve(quintic_coefficients(n0, v0, a0, ne, ve, ae, horizon), horizon)


def solve_quartic(start, end, horizon: float) -> QuarticCurve:
    """Unique quartic matching [pos, vel, acc] at t=0 and [vel, acc] at t=horizon."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    s0, v0, a0 = start
    ve, ae = end
    return QuarticCurve(quartic_coefficients(s0, v0, a0, ve, ae, horizon), horizon)


@dataclass(frozen=True)
class SamplerConfig:
    """End-state grid shape and discretization of the candidate set."""

    n_lateral: int = 20
    n_velocity: int = 40
    v_max: float = 85.0
    horizon: float = 2.5
    n_points: int = 51

    def __post_init__(self) -> None:
        if self.n_lateral < 2 or self.n_velocity < 2:
            raise ValueError("grids need at least two samples per axis")
        if self.horizon <= 0.0 or self.n_points < 2:
            raise ValueError("invalid discretization")

    @property
    def n_candidates(self) -> int:
        return self.n_lateral * self.n_velocity

    def time_grid(self) -> FloatArray:
        return np.linspace(0.0, self.horizon, self.n_points)


@dataclass(frozen=True)
class EndStateGrid:
    """Sampled end states: full candidate set is the Cartesian product.

    Lateral targets carry zero end velocity/acceleration, velocity
    targets zero end acceleration. The flat candidate index is
    ``i_velocity * n_lateral + i_lateral``.
    """

    lateral_targets: FloatArray
    velocity_targets: FloatArray

    @property
    def n_candidates(self) -> int:
        return self.lateral_targets.size * self.velocity_targets.size

    def end_state(self, index: int) -> EndState:
        i_vel, i_lat = divmod(index, self.lateral_targets.size)
        return EndState(
            n_end=float(self.lateral_targets[i_lat]),
            n_dot_end=0.0,
            n_ddot_end=0.0,
            s_dot_end=float(self.velocity_targets[i_vel]),
        )


def sample_end_states(
    state: EgoState | None,
    track: TrackModel,
    geometry: VehicleGeometry,
    config: SamplerConfig,
) -> EndStateGrid:
    """Equidistant end-state grids spanning the drivable corridor.

    Lateral positions keep half a vehicle width of margin to each
    boundary; the lateral grid is symmetrized so mirrored scenarios see
    bit-identical mirrored candidates. Velocities span [0, v_max]. The
    grids do not depend on the start state (kept in the signature for
    future curved-frame variants).
    """
    lo, hi = track.lateral_limits(geometry.half_width)
    lat = np.linspace(lo, hi, config.n_lateral)
    if math.isclose(lo, -hi, rel_tol=0.0, abs_tol=1e-12):
        lat = 0.5 * (lat - lat[::-1])
    vel = np.linspace(0.0, config.v_max, config.n_velocity)
    return EndStateGrid(lateral_targets=lat, velocity_targets=vel)


def derive_motion_channels(sdot, sddot, ndot, nddot, eps: float = SPEED_EPS):
    """Speed, curvature and accelerations from curvilinear derivatives.

    Valid for the straight reference line where Cartesian derivatives
    equal the curvilinear ones. Where speed falls below ``eps`` the
    curvature and tangential acceleration are reported as zero.

    Returns
    -------
    (v, curvature, a_lon, a_lat) with the broadcast shape of the inputs.
    """
    v = np.sqrt(sdot * sdot + ndot * ndot)
    safe = v > eps
    num_kappa = sdot * nddot - ndot * sddot
    num_tan = sdot * sddot + ndot * nddot
    curvature = np.where(safe, num_kappa / np.where(safe, v * v * v, 1.0), 0.0)
    a_lon = np.where(safe, num_tan / np.where(safe, v, 1.0), 0.0)
    a_lat = v * v * curvature
    return v, curvature, a_lon, a_lat


@dataclass(frozen=True)
class Trajectory:
    """Planned motion discretized on the fixed time grid.

    Curvilinear channels plus Cartesian pose, curvature, speed and the
    longitudinal/lateral acceleration split consumed by the feasibility
    checks.
    """

    t: FloatArray
    s: FloatArray
    s_dot: FloatArray
    s_ddot: FloatArray
    n: FloatArray
    n_dot: FloatArray
    n_ddot: FloatArray
    x: FloatArray
    y: FloatArray
    heading: FloatArray
    curvature: FloatArray
    v: FloatArray
    a_lon: FloatArray
    a_lat: FloatArray

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    @property
    def n_points(self) -> int:
        return self.t.size

    @property
    def end_lateral(self) -> float:
        return float(self.n[-1])

    @property
    def end_velocity(self) -> float:
        return float(self.s_dot[-1])

    def state_at(self, index: int) -> EgoState:
        """Ego state at grid sample ``index`` (perfect-tracking handoff)."""
        return EgoState(
            s=float(self.s[index]),
            s_dot=float(self.s_dot[index]),
            s_ddot=float(self.s_ddot[index]),
            n=float(self.n[index]),
            n_dot=float(self.n_dot[index]),
            n_ddot=float(self.n_ddot[index]),
        )


def assemble(
    lat: QuinticCurve,
    lon: QuarticCurve,
    track: TrackModel,
    n_points: int = 51,
    eps: float = SPEED_EPS,
) -> Trajectory:
    """Discretize a lateral/longitudinal curve pair into a trajectory."""
    if not math.isclose(lat.horizon, lon.horizon, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError("lateral and longitudinal horizons differ")
    t = np.linspace(0.0, lat.horizon, n_points)
    n = lat.position(t)
    ndot = lat.velocity(t)
    nddot = lat.acceleration(t)
    s = lon.position(t)
    sdot = lon.velocity(t)
    sddot = lon.acceleration(t)
    x, y = track.to_cartesian(s, n)
    heading = track.reference_heading(0.0) + np.arctan2(ndot, sdot)
    v, curvature, a_lon, a_lat = derive_motion_channels(sdot, sddot, ndot, nddot, eps)
    return Trajectory(
        t=t, s=s, s_dot=sdot, s_ddot=sddot, n=n, n_dot=ndot, n_ddot=nddot,
        x=x, y=y, heading=heading, curvature=curvature, v=v,
        a_lon=a_lon, a_lat=a_lat,
    )


@dataclass
class CandidateBatch:
    """All end-state-grid candidates from one start state, vectorized.

    Lateral curves are evaluated once per lateral target (rows over the
    time grid), longitudinal ones per velocity target; combined channels
    broadcast to shape (n_velocity, n_lateral, n_points) on first access.
    Row slices are bit-identical to the equivalent single-candidate
    assembly.
    """

    grid: EndStateGrid
    t: FloatArray
    lat_coeffs: FloatArray
    lon_coeffs: FloatArray
    n: FloatArray
    n_dot: FloatArray
    n_ddot: FloatArray
    s: FloatArray
    s_dot: FloatArray
    s_ddot: FloatArray
    eps: float = SPEED_EPS

    def _derived(self):
        cached = getattr(self, "_channels", None)
        if cached is None:
            cached = derive_motion_channels(
                self.s_dot[:, None, :], self.s_ddot[:, None, :],
                self.n_dot[None, :, :], self.n_ddot[None, :, :], self.eps,
            )
            object.__setattr__(self, "_channels", cached)
        return cached

    @property
    def v(self) -> FloatArray:
        return self._derived()[0]

    @property
    def curvature(self) -> FloatArray:
        return self._derived()[1]

    @property
    def a_lon(self) -> FloatArray:
        return self._derived()[2]

    @property
    def a_lat(self) -> FloatArray:
        return self._derived()[3]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.s.shape[0], self.n.shape[0], self.t.size)

    def trajectory(self, index: int, track: TrackModel) -> Trajectory:
        """Materialize candidate ``index`` as a standalone trajectory."""
        i_vel, i_lat = divmod(index, self.n.shape[0])
        lat = QuinticCurve(self.lat_coeffs[i_lat], float(self.t[-1]))
        lon = QuarticCurve(self.lon_coeffs[i_vel], float(self.t[-1]))
        return assemble(lat, lon, track, n_points=self.t.size, eps=self.eps)


def build_candidates(
    state: EgoState,
    grid: EndStateGrid,
    config: SamplerConfig,
) -> CandidateBatch:
    """Solve and discretize the full candidate set for one start state."""
    t = config.time_grid()
    lat_coeffs = quintic_coefficients(
        state.n, state.n_dot, state.n_ddot,
        grid.lateral_targets, 0.0, 0.0, config.horizon,
    )
    lon_coeffs = quartic_coefficients(
        state.s, state.s_dot, state.s_ddot,
        grid.velocity_targets, 0.0, config.horizon,
    )
    return CandidateBatch(
        grid=grid,
        t=t,
        lat_coeffs=lat_coeffs,
        lon_coeffs=lon_coeffs,
        n=polyval(lat_coeffs, t),
        n_dot=polyval(polyder(lat_coeffs), t),
        n_ddot=polyval(polyder(lat_coeffs, 2), t),
        s=polyval(lon_coeffs, t),
        s_dot=polyval(polyder(lon_coeffs), t),
        s_ddot=polyval(polyder(lon_coeffs, 2), t),
    )


def trajectory_from_end_state(
    state: EgoState,
    end: EndState,
    track: TrackModel,
    config: SamplerConfig,
) -> Trajectory:
    """Single jerk-minimal trajectory from a start state to an end state."""
    lat = solve_quintic(
        (state.n, state.n_dot, state.n_ddot),
        (end.n_end, end.n_dot_end, end.n_ddot_end),
        config.horizon,
    )
    lon = solve_quartic(
        (state.s, state.s_dot, state.s_ddot),
        (end.s_dot_end, 0.0),
        config.horizon,
    )
    return assemble(lat, lon, track, n_points=config.n_points)
