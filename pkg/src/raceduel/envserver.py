"""Reset/step environment protocol for external policy training.

Exposes the duel simulation over newline-delimited JSON messages on a
TCP socket or standard streams. Every request carries the protocol
version; one training session is served at a time. The server owns the
scenario sampling, the curriculum stage geometry and the reward, so a
trainer only ever sees normalized states, actions, rewards and done
flags.

Reward shaping: sparse -1/+10 terminals plus a dense term rewarding
lateral separation while the vehicles overlap longitudinally (vehicle
width scaled by the curriculum factor) and first-time increases of the
longitudinal relative velocity.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass

import numpy as np

from .dynamics import BlockingParams, longitudinal_velocity
from .engine import DuelSim, EpisodeStatus, ScenarioConfig
from .feasibility import FeasibilityLimits, check_all
from .frenet import SamplerConfig, sample_end_states, trajectory_from_end_state
from .planner import NoValidTrajectoryError
from .policy import (
    ACTION_DIM,
    ActionBounds,
    StateNormalization,
    build_state,
    denormalize_action,
)
from .safety import rescue
from .track import TrackModel
from .vehicle import VehicleGeometry

PROTOCOL_VERSION = "v1"

#: Blocking-lookahead pools of the two training configurations; initial
#: positions sample uniformly from the shared ranges below.
TRAINING_PRESETS = {
    "training1": (80.0,),
    "training2": (40.0, 80.0, 120.0),
}
TRAINING_S_RANGE = (20.0, 100.0)
TRAINING_N_RANGE = (-6.0, 6.0)


def stage_scale(stage: int) -> float:
    """Footprint scaling factor of a curriculum stage (stage 1: unused)."""
    if not 1 <= stage <= 6:
        raise ValueError("stage must be in 1..6")
    return 0.0 if stage == 1 else 0.2 * (stage - 1)


@dataclass
class RewardState:
    """Per-episode bookkeeping for the dense reward."""

    ds_max: float = 0.0
    k_scl: float = 1.0
    stage: int = 6


@dataclass(frozen=True)
class Transition:
    """Post-step truth values the reward is evaluated on."""

    s_o: float
    s_dot_o: float
    n_o: float
    s_b: float
    s_dot_b: float
    n_b: float
    status: EpisodeStatus | None


def reward(
    transition: Transition,
    state: RewardState,
    geometry: VehicleGeometry,
) -> float:
    """Scalar reward for one transition; updates the running rate maximum."""
    if transition.status is not None:
        return 10.0 if transition.status is EpisodeStatus.SUCCESS else -1.0
    value = 0.0
    if state.stage >= 2:
        overlap = (
            transition.s_b - geometry.length
            <= transition.s_o
            <= transition.s_b + geometry.length
        )
        if overlap:
            dn = abs(transition.n_o - transition.n_b)
            value += 0.5 * (dn - state.k_scl * geometry.width)
    ds = transition.s_dot_o - transition.s_dot_b
    if ds > state.ds_max:
        value += ds - state.ds_max
        state.ds_max = ds
    return value


class ProtocolError(Exception):
    """Recoverable request fault; the session continues."""


class SessionRefused(Exception):
    """Fatal request fault (version mismatch); the session ends."""


class EnvSession:
    """One training session: an episode lifecycle driven by messages."""

    def __init__(
        self,
        track: TrackModel | None = None,
        limits: FeasibilityLimits | None = None,
        geometry: VehicleGeometry | None = None,
        sampler: SamplerConfig | None = None,
        norms: StateNormalization | None = None,
        action_bounds: ActionBounds | None = None,
        default_stage: int = 6,
    ):
        self.track = track or TrackModel()
        self.limits = limits or FeasibilityLimits()
        self.geometry = geometry or VehicleGeometry()
        self.sampler = sampler or SamplerConfig()
        self.norms = norms or StateNormalization()
        self.action_bounds = action_bounds or ActionBounds.for_track(
            self.track, self.geometry, self.sampler.v_max
        )
        self.default_stage = default_stage
        self.grid = sample_end_states(None, self.track, self.geometry, self.sampler)
        self.sim: DuelSim | None = None
        self.reward_state = RewardState()
        self.safety_on = False
        self.closed = False

    # -- message handling ------------------------------------------------

    def handle(self, message: str) -> dict:
        """Dispatch one request line; returns the reply object."""
        try:
            request = json.loads(message)
        except json.JSONDecodeError:
            raise ProtocolError("request is not valid JSON")
        if not isinstance(request, dict):
            raise ProtocolError("request must be a JSON object")
        if request.get("v") != PROTOCOL_VERSION:
            raise SessionRefused(
                f"unsupported protocol version {request.get('v')!r}, need {PROTOCOL_VERSION!r}"
            )
        cmd = request.get("cmd")
        if cmd == "reset":
            return self._reset(request)
        if cmd == "step":
            return self._step(request)
        if cmd == "close":
            self.closed = True
            return {"ok": True}
        raise ProtocolError(f"unknown command: {cmd!r}")

    def _reset(self, request: dict) -> dict:
        stage = int(request.get("stage", self.default_stage))
        k_scl = stage_scale(stage)
        config = self._scenario_config(request, stage, k_scl)
        self.sim = DuelSim(config, self.track, self.geometry, self.sampler)
        self.reward_state = RewardState(ds_max=0.0, k_scl=k_scl, stage=stage)
        self.safety_on = bool(request.get("safety", False))
        return {
            "state": self._observe(),
            "norms": {k: float(v) for k, v in vars(self.norms).items()},
            "action_bounds": {
                "n_end": list(self.action_bounds.n_end),
                "n_dot_end": list(self.action_bounds.n_dot_end),
                "n_ddot_end": list(self.action_bounds.n_ddot_end),
                "s_dot_end": list(self.action_bounds.s_dot_end),
            },
            "stage": stage,
        }

    def _scenario_config(self, request: dict, stage: int, k_scl: float) -> ScenarioConfig:
        seed = int(request.get("seed", 0))
        preset = request.get("preset")
        scenario = dict(request.get("scenario", {}))
        if preset is not None:
            if preset not in TRAINING_PRESETS:
                raise ProtocolError(f"unknown training preset: {preset!r}")
            lookahead_choices = TRAINING_PRESETS[preset]
            rng = np.random.default_rng(seed)
            scenario.setdefault("s_b_init", float(rng.uniform(*TRAINING_S_RANGE)))
            scenario.setdefault("n_b_init", float(rng.uniform(*TRAINING_N_RANGE)))
            scenario.setdefault("s_d", float(rng.choice(lookahead_choices)))
            scenario.setdefault("max_steps", 400)
        if "s_b_init" not in scenario or "n_b_init" not in scenario:
            raise ProtocolError("reset needs a scenario or a training preset")
        blocking = BlockingParams(
            lookahead=float(scenario.get("s_d", 80.0)),
            k_p=float(scenario.get("k_p", 0.05)),
            k_d=float(scenario.get("k_d", 0.6)),
            k_n=float(scenario.get("k_n", 1.0)),
        )
        try:
            return ScenarioConfig(
                s_b_init=float(scenario["s_b_init"]),
                n_b_init=float(scenario["n_b_init"]),
                v_init=float(scenario.get("v_init", 50.0)),
                blocking=blocking,
                dt=float(scenario.get("dt", 0.1)),
                max_steps=int(scenario.get("max_steps", 2000)),
                noise_mu=float(scenario.get("noise_mu", 0.0)),
                noise_sigma=float(scenario.get("noise_sigma", 0.0)),
                seed=seed,
                collision_enabled=stage >= 2,
                collision_scale=k_scl if stage >= 2 else 1.0,
            )
        except ValueError as exc:
            raise ProtocolError(str(exc))

    def _observe(self) -> list[float]:
        sim = self.sim
        observed = sim.observe_opponent_rate()
        state = build_state(sim.ego, sim.opponent, self.norms, self.track, observed)
        return [float(x) for x in state]

    def _step(self, request: dict) -> dict:
        if self.sim is None:
            raise ProtocolError("step before reset")
        if self.sim.status is not None:
            raise ProtocolError("episode already terminated; reset first")
        action = request.get("action")
        if not isinstance(action, list) or len(action) != ACTION_DIM:
            raise ProtocolError(f"action must be a list of {ACTION_DIM} floats")
        sim = self.sim
        end = denormalize_action(np.asarray(action, dtype=float), self.action_bounds)
        traj = trajectory_from_end_state(sim.ego, end, self.track, self.sampler)
        if not check_all(traj, self.track, self.limits, self.geometry):
            traj = self._try_rescue(traj) if self.safety_on else None
        if traj is None:
            sim.mark_infeasible()
            transition = self._transition()
            value = reward(transition, self.reward_state, self.geometry)
            return self._step_reply(value)
        sim.advance(traj)
        transition = self._transition()
        value = reward(transition, self.reward_state, self.geometry)
        return self._step_reply(value)

    def _try_rescue(self, traj):
        try:
            return rescue(
                traj, self.sim.ego, self.track, self.limits, self.geometry,
                self.grid, self.sampler,
            ).trajectory
        except NoValidTrajectoryError:
            return None

    def _transition(self) -> Transition:
        sim = self.sim
        return Transition(
            s_o=sim.ego.s,
            s_dot_o=sim.ego.s_dot,
            n_o=sim.ego.n,
            s_b=sim.opponent.s,
            s_dot_b=longitudinal_velocity(sim.opponent, self.track),
            n_b=sim.opponent.n,
            status=sim.status,
        )

    def _step_reply(self, value: float) -> dict:
        sim = self.sim
        done = sim.status is not None
        return {
            "state": self._observe(),
            "reward": float(value),
            "done": done,
            "info": {"status": sim.status.value if done else "running"},
        }


def _serve_stream(read_line, write_line, session_factory) -> None:
    """Run sessions over a line transport until the stream ends."""
    session = session_factory()
    while True:
        line = read_line()
        if not line:
            return
        line = line.strip()
        if not line:
            continue
        try:
            reply = session.handle(line)
        except ProtocolError as exc:
            write_line(json.dumps({"error": str(exc)}))
            continue
        except SessionRefused as exc:
            write_line(json.dumps({"error": str(exc), "refused": True}))
            return
        write_line(json.dumps(reply))
        if session.closed:
            return


def serve(endpoint: str, session_factory=EnvSession, once: bool = False) -> None:
    """Serve the environment protocol on ``stdio`` or ``tcp://host:port``.

    TCP accepts one connection at a time; parallel training uses one
    server process per environment instance.
    """
    if endpoint == "stdio":
        _serve_stream(
            sys.stdin.readline,
            lambda s: (sys.stdout.write(s + "\n"), sys.stdout.flush()),
            session_factory,
        )
        return
    address = endpoint
    if address.startswith("tcp://"):
        address = address[len("tcp://"):]
    host, _, port = address.rpartition(":")
    if not host:
        host = "127.0.0.1"
    with socket.create_server((host, int(port))) as server:
        while True:
            conn, _ = server.accept()
            with conn, conn.makefile("rwb") as stream:
                _serve_stream(
                    lambda: stream.readline().decode("utf-8"),
                    lambda s: (stream.write((s + "\n").encode("utf-8")), stream.flush()),
                    session_factory,
                )
            if once:
                return
