"""Learned end-state planner: state encoding, network forward, decoding.

The actor is a fully connected 12-256-256-4 network with tanh activations
throughout, including the output squash, evaluated deterministically at
inference. Weights ship as a self-describing JSON document that also
carries the normalization constants and action bounds, so a policy file
is always consistent with the encoding it was trained under.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import CurvilinearState, lateral_velocity, longitudinal_velocity
from .frenet import EgoState, EndState, FloatArray
from .track import TrackModel
from .vehicle import VehicleGeometry

STATE_DIM = 12
ACTION_DIM = 4


@dataclass(frozen=True)
class StateNormalization:
    """Per-component scales mapping raw values into [-1, 1].

    Scales are the largest magnitudes the scenario family can produce:
    track length and half-width for positions, top speed for rates, the
    gg bound for accelerations, the maximum initial gap and the top
    relative speed for the opponent-relative components.
    """

    s: float = 1500.0
    s_dot: float = 85.0
    s_ddot: float = 25.0
    n: float = 7.5
    n_dot: float = 85.0
    n_ddot: float = 25.0
    chi: float = math.pi / 2.0
    rel_s: float = 100.0
    rel_s_dot: float = 35.0
    rel_n: float = 15.0
    rel_n_dot: float = 35.0
    rel_chi: float = math.pi / 2.0

    def as_vector(self) -> FloatArray:
        return np.array([
            self.s, self.s_dot, self.s_ddot, self.n, self.n_dot, self.n_ddot,
            self.chi, self.rel_s, self.rel_s_dot, self.rel_n, self.rel_n_dot,
            self.rel_chi,
        ])


@dataclass(frozen=True)
class ActionBounds:
    """Affine decoding intervals of the four normalized action channels."""

    n_end: tuple[float, float] = (-6.535, 6.535)
    n_dot_end: tuple[float, float] = (-15.0, 15.0)
    n_ddot_end: tuple[float, float] = (-25.0, 25.0)
    s_dot_end: tuple[float, float] = (0.0, 85.0)

    @classmethod
    def for_track(
        cls,
        track: TrackModel,
        geometry: VehicleGeometry,
        v_max: float = 85.0,
        n_dot_max: float = 15.0,
        n_ddot_max: float = 25.0,
    ) -> "ActionBounds":
        lo, hi = track.lateral_limits(geometry.half_width)
        return cls(
            n_end=(lo, hi),
            n_dot_end=(-n_dot_max, n_dot_max),
            n_ddot_end=(-n_ddot_max, n_ddot_max),
            s_dot_end=(0.0, v_max),
        )

    def intervals(self) -> FloatArray:
        return np.array([self.n_end, self.n_dot_end, self.n_ddot_end, self.s_dot_end])


def build_state(
    ego: EgoState,
    opponent: CurvilinearState,
    norms: StateNormalization,
    track: TrackModel,
    opponent_s_rate: float | None = None,
) -> FloatArray:
    """Normalized 12-component MDP state, clamped to [-1, 1].

    ``opponent_s_rate`` overrides the opponent's true longitudinal rate,
    which is how observation noise on the velocity estimate enters.
    """
    if opponent_s_rate is None:
        opponent_s_rate = longitudinal_velocity(opponent, track)
    raw = np.array([
        ego.s,
        ego.s_dot,
        ego.s_ddot,
        ego.n,
        ego.n_dot,
        ego.n_ddot,
        ego.heading,
        ego.s - opponent.s,
        ego.s_dot - opponent_s_rate,
        ego.n - opponent.n,
        ego.n_dot - lateral_velocity(opponent),
        ego.heading - opponent.chi,
    ])
    return np.clip(raw / norms.as_vector(), -1.0, 1.0)


@dataclass
class PolicyWeights:
    """Loaded actor network plus its encoding constants.

    layers : list of (weight, bias) pairs, weight shaped (out, in).
    """

    layers: list[tuple[FloatArray, FloatArray]]
    norms: StateNormalization = field(default_factory=StateNormalization)
    action_bounds: ActionBounds = field(default_factory=ActionBounds)
    activation: str = "tanh"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation: {self.activation}")
        dims = self.architecture
        if dims[0] != STATE_DIM or dims[-1] != ACTION_DIM:
            raise ValueError(f"network must map {STATE_DIM} -> {ACTION_DIM}")
        for w, b in self.layers:
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError("layer weight/bias shapes do not align")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite values in policy weights")
        for (w_prev, _), (w_next, _) in zip(self.layers, self.layers[1:]):
            if w_next.shape[1] != w_prev.shape[0]:
                raise ValueError("consecutive layer shapes do not chain")

    @property
    def architecture(self) -> list[int]:
        return [self.layers[0][0].shape[1]] + [w.shape[0] for w, _ in self.layers]

    def save(self, path: str | Path) -> None:
        doc = {
            "architecture": self.architecture,
            "activation": self.activation,
            "layers": [
                {"w": w.tolist(), "b": b.tolist()} for w, b in self.layers
            ],
            "norms": asdict(self.norms),
            "action_bounds": {
                "n_end": list(self.action_bounds.n_end),
                "n_dot_end": list(self.action_bounds.n_dot_end),
                "n_ddot_end": list(self.action_bounds.n_ddot_end),
                "s_dot_end": list(self.action_bounds.s_dot_end),
            },
            "metadata": self.metadata,
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PolicyWeights":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"policy file is not valid JSON: {exc}") from exc
        try:
            layers = [
                (np.asarray(layer["w"], dtype=float), np.asarray(layer["b"], dtype=float))
                for layer in doc["layers"]
            ]
            bounds_doc = doc["action_bounds"]
            weights = cls(
                layers=layers,
                norms=StateNormalization(**doc["norms"]),
                action_bounds=ActionBounds(
                    n_end=tuple(bounds_doc["n_end"]),
                    n_dot_end=tuple(bounds_doc["n_dot_end"]),
                    n_ddot_end=tuple(bounds_doc["n_ddot_end"]),
                    s_dot_end=tuple(bounds_doc["s_dot_end"]),
                ),
                activation=doc.get("activation", "tanh"),
                metadata=doc.get("metadata", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"policy file missing required field: {exc}") from exc
        declared = doc.get("architecture")
        if declared is not None and list(declared) != weights.architecture:
            raise ValueError("declared architecture does not match layer shapes")
        return weights


def forward(state: FloatArray, weights: PolicyWeights) -> FloatArray:
    """Deterministic action for one normalized state (tanh MLP)."""
    h = np.asarray(state, dtype=float)
    if h.shape != (STATE_DIM,):
        raise ValueError(f"state must have shape ({STATE_DIM},)")
    for w, b in weights.layers:
        h = np.tanh(w @ h + b)
    return h


def denormalize_action(action: FloatArray, bounds: ActionBounds) -> EndState:
    """Affine map from [-1, 1]^4 to an end state; inputs clamp first."""
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    iv = bounds.intervals()
    values = iv[:, 0] + 0.5 * (a + 1.0) * (iv[:, 1] - iv[:, 0])
    return EndState(
        n_end=float(values[0]),
        n_dot_end=float(values[1]),
        n_ddot_end=float(values[2]),
        s_dot_end=float(values[3]),
    )


def normalize_end_state(end: EndState, bounds: ActionBounds) -> FloatArray:
    """Inverse of denormalize_action for in-bound end states."""
    iv = bounds.intervals()
    values = np.array([end.n_end, end.n_dot_end, end.n_ddot_end, end.s_dot_end])
    return 2.0 * (values - iv[:, 0]) / (iv[:, 1] - iv[:, 0]) - 1.0
