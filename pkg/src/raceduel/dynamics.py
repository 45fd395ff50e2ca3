"""Blocking-vehicle model: kinematic bicycle in curvilinear coordinates.

The vehicle holds constant speed and steers with a PD controller that
chases the lateral position of the overtaking vehicle (blocking). State
propagation is explicit forward Euler with the simulation step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .track import TrackModel


@dataclass(frozen=True)
class CurvilinearState:
    """Bicycle state in track coordinates.

    s, n : rear-axle position along / across the reference line [m].
    chi : orientation relative to the reference line [rad].
    v : absolute velocity [m/s], non-negative.
    delta : steering angle [rad].
    """

    s: float
    n: float
    chi: float = 0.0
    v: float = 0.0
    delta: float = 0.0


@dataclass(frozen=True)
class BlockingParams:
    """Controller gains, lookahead and actuation limits of the blocker.

    ``lookahead`` is the distance parameter shaping how aggressively the
    desired heading reacts to a lateral gap: lower values give larger
    steering-rate commands and a more aggressive block.

    ``derivative_mode`` selects how the D term is formed from the
    heading error sequence:

    * "per_step" (default): k_d multiplies the raw error difference
      between consecutive controller samples. Equivalent to a derivative
      time of k_d * dt; keeps the steering loop well inside the
      forward-Euler stability bound and yields step responses that
      settle within seconds, ordered by lookahead.
    * "per_second": k_d multiplies the backward difference divided by
      dt. With the default gains and step size this leaves the loop
      marginally stable (a standing wobble); kept for sensitivity runs.
    * "analytic": k_d multiplies the exact error rate from the model
      state; stable but an order of magnitude slower at closing
      standing lateral gaps. Kept for sensitivity runs.
    """

    lookahead: float = 80.0
    k_p: float = 0.05
    k_d: float = 0.6
    k_n: float = 1.0
    l_r: float = 1.72
    l_f: float = 1.25
    delta_max: float = 0.43
    omega_max: float = 0.39
    accel: float = 0.0
    derivative_mode: str = "per_step"
    substeps: int = 1

    def __post_init__(self) -> None:
        if self.lookahead <= 0.0:
            raise ValueError("lookahead must be positive")
        if self.l_r <= 0.0 or self.l_f <= 0.0:
            raise ValueError("axle distances must be positive")
        if self.derivative_mode not in ("per_step", "per_second", "analytic"):
            raise ValueError(f"unknown derivative_mode: {self.derivative_mode}")
        if self.substeps < 1:
            raise ValueError("substeps must be at least 1")


def lateral_velocity(state: CurvilinearState) -> float:
    """Lateral rate of the bicycle, ``v * sin(chi)`` [m/s]."""
    return state.v * math.sin(state.chi)


def body_slip(state: CurvilinearState, params: BlockingParams) -> float:
    """Body slip angle from the steering angle [rad]."""
    return math.atan(
        params.l_r / (params.l_r + params.l_f) * math.tan(state.delta)
    )


def heading_rate(state: CurvilinearState, track: TrackModel, params: BlockingParams) -> float:
    """Rate of the relative orientation at the current state [rad/s]."""
    kappa = track.reference_curvature(state.s)
    return (
        state.v / params.l_r * math.sin(body_slip(state, params))
        - state.v * math.cos(state.chi) * kappa / (1.0 - state.n * kappa)
    )


def longitudinal_velocity(state: CurvilinearState, track: TrackModel) -> float:
    """Progress rate along the reference line [m/s].

    Includes the curvature correction 1/(1 - n*kappa_r); on the straight
    track the factor is exactly 1.
    """
    kappa = track.reference_curvature(state.s)
    return state.v * math.cos(state.chi) / (1.0 - state.n * kappa)


def desired_heading(dn: float, dn_dot: float, params: BlockingParams) -> float:
    """Heading target from the lateral gap to the overtaking vehicle.

    dn : lateral offset of the opponent relative to this vehicle [m].
    dn_dot : rate of that offset [m/s]; anticipated via gain ``k_n``.
    """
    return math.atan((dn + params.k_n * dn_dot) / params.lookahead)


def pd_steering_rate(error: float, error_rate: float, params: BlockingParams) -> float:
    """PD steering-rate command, clipped to the actuator limit [rad/s]."""
    omega = params.k_p * error + params.k_d * error_rate
    return min(max(omega, -params.omega_max), params.omega_max)


def steering_rate(
    chi: float,
    error_prev: float | None,
    chi_desired: float,
    dt: float,
    params: BlockingParams,
) -> tuple[float, float]:
    """PD command with a backward-difference error rate.

    On the first call (``error_prev`` is None) the rate is taken as
    zero.

    Returns
    -------
    (omega, error) : command [rad/s] and the error fed back as
    ``error_prev`` on the next call.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    error = chi_desired - chi
    error_rate = 0.0 if error_prev is None else (error - error_prev) / dt
    return pd_steering_rate(error, error_rate, params), error


def step(
    state: CurvilinearState,
    omega: float,
    accel: float,
    dt: float,
    track: TrackModel,
    params: BlockingParams,
) -> CurvilinearState:
    """One forward Euler step of the kinematic bicycle.

    All rates are evaluated at the incoming state; the steering angle is
    clipped to ``delta_max`` after the update. ``omega`` is expected to
    be pre-clipped by the caller (steering_rate does so).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    kappa = track.reference_curvature(state.s)
    denom = 1.0 - state.n * kappa
    beta = math.atan(params.l_r / (params.l_r + params.l_f) * math.tan(state.delta))

    s_dot = state.v * math.cos(state.chi) / denom
    n_dot = state.v * math.sin(state.chi)
    chi_dot = state.v / params.l_r * math.sin(beta) - state.v * math.cos(state.chi) * kappa / denom

    delta = state.delta + dt * omega
    delta = min(max(delta, -params.delta_max), params.delta_max)
    return CurvilinearState(
        s=state.s + dt * s_dot,
        n=state.n + dt * n_dot,
        chi=state.chi + dt * chi_dot,
        v=state.v + dt * accel,
        delta=delta,
    )


class BlockingController:
    """Stateful wrapper tying the PD law to the bicycle for one episode.

    The opponent observation is sampled once per simulation step; the
    bicycle and controller integrate over ``substeps`` internal Euler
    steps of dt/substeps (one by default). The difference-based D modes
    keep the previous heading error between calls. One instance per
    episode; not shared across episodes.
    """

    def __init__(self, params: BlockingParams, track: TrackModel, dt: float):
        self.params = params
        self.track = track
        self.dt = dt
        self._error_prev: float | None = None

    def advance(
        self,
        state: CurvilinearState,
        opponent_n: float,
        opponent_n_dot: float,
        opponent_n_ddot: float = 0.0,
    ) -> CurvilinearState:
        """Step once against the opponent's current lateral motion."""
        p = self.params
        h = self.dt / p.substeps
        for _ in range(p.substeps):
            dn = opponent_n - state.n
            dn_dot = opponent_n_dot - lateral_velocity(state)
            chi_d = desired_heading(dn, dn_dot, p)
            if p.derivative_mode == "per_step":
                error = chi_d - state.chi
                diff = 0.0 if self._error_prev is None else error - self._error_prev
                self._error_prev = error
                omega = pd_steering_rate(error, diff, p)
            elif p.derivative_mode == "per_second":
                omega, self._error_prev = steering_rate(
                    state.chi, self._error_prev, chi_d, h, p
                )
            else:
                chi_rate = heading_rate(state, self.track, p)
                n_ddot_b = (
                    p.accel * math.sin(state.chi)
                    + state.v * math.cos(state.chi) * chi_rate
                )
                offset = (dn + p.k_n * dn_dot) / p.lookahead
                offset_rate = (dn_dot + p.k_n * (opponent_n_ddot - n_ddot_b)) / p.lookahead
                chi_d_rate = offset_rate / (1.0 + offset * offset)
                omega = pd_steering_rate(chi_d - state.chi, chi_d_rate - chi_rate, p)
            state = step(state, omega, p.accel, h, self.track, p)
        return state
