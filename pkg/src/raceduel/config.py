"""TOML configuration loading for the CLI entry points.

A config file can override the track, vehicle geometry, gg table,
planner presets, evaluation grid and noise settings; scenario files for
single simulations reuse the same sections plus ``[scenario]`` and
``[blocking]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import BlockingParams
from .engine import PlannerChoice, ScenarioConfig
from .feasibility import FeasibilityLimits, load_gg_table
from .frenet import SamplerConfig
from .planner import PRESETS, CostWeights, PredictionMode
from .track import TrackModel
from .vehicle import VehicleGeometry


@dataclass
class Environment:
    """World description shared by all episodes of a run."""

    track: TrackModel = field(default_factory=TrackModel)
    geometry: VehicleGeometry = field(default_factory=VehicleGeometry)
    limits: FeasibilityLimits = field(default_factory=FeasibilityLimits)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    presets: dict[str, CostWeights] = field(default_factory=lambda: dict(PRESETS))
    grid_overrides: dict = field(default_factory=dict)
    noise_mu: float = 0.0
    noise_sigma: float = 0.0


def _load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_environment(path: str | Path | None) -> Environment:
    """Environment from a config file; defaults where sections are absent."""
    env = Environment()
    if path is None:
        return env
    doc = _load_toml(path)
    if "track" in doc:
        t = doc["track"]
        env.track = TrackModel(
            length=float(t.get("length", 1500.0)),
            half_width_left=float(t.get("half_width_left", 7.5)),
            half_width_right=float(t.get("half_width_right", 7.5)),
        )
    if "vehicle" in doc:
        v = doc["vehicle"]
        env.geometry = VehicleGeometry(
            width=float(v.get("width", 1.93)), length=float(v.get("length", 4.9))
        )
    if "gg" in doc:
        g = doc["gg"]
        if "rows" in g:
            limits = load_gg_table(g["rows"])
        else:
            limits = FeasibilityLimits()
        env.limits = FeasibilityLimits(
            r_min=float(g.get("r_min", 1.0)),
            gg_speeds=limits.gg_speeds,
            gg_a_lon=limits.gg_a_lon,
            gg_a_lat=limits.gg_a_lat,
            speed_eps=float(g.get("speed_eps", 0.1)),
        )
    if "sampler" in doc:
        s = doc["sampler"]
        env.sampler = SamplerConfig(
            n_lateral=int(s.get("n_lateral", 20)),
            n_velocity=int(s.get("n_velocity", 40)),
            v_max=float(s.get("v_max", 85.0)),
            horizon=float(s.get("horizon", 2.5)),
            n_points=int(s.get("n_points", 51)),
        )
    for name, p in doc.get("planner", {}).items():
        env.presets[name] = CostWeights(
            w_n=float(p["w_n"]),
            w_v=float(p["w_v"]),
            w_pr=float(p["w_pr"]),
            p_s=float(p["p_s"]),
            p_n=float(p["p_n"]),
            prediction_mode=PredictionMode(p.get("prediction", "ch")),
            v_target=float(p.get("v_target", env.sampler.v_max)),
        )
    if "grid" in doc:
        env.grid_overrides = {
            key: np.asarray(val, dtype=float)
            for key, val in doc["grid"].items()
            if key in ("s_b_init", "n_b_init", "s_d")
        }
    if "noise" in doc:
        env.noise_mu = float(doc["noise"].get("mu", 0.0))
        env.noise_sigma = float(doc["noise"].get("sigma", 0.0))
    return env


def load_scenario(path: str | Path) -> tuple[ScenarioConfig, Environment]:
    """Scenario file -> one episode config plus its environment."""
    doc = _load_toml(path)
    env = load_environment(path)
    sc = doc.get("scenario", {})
    if "s_b_init" not in sc or "n_b_init" not in sc:
        raise ValueError("scenario file needs [scenario] s_b_init and n_b_init")
    b = doc.get("blocking", {})
    blocking = BlockingParams(
        lookahead=float(b.get("s_d", 80.0)),
        k_p=float(b.get("k_p", 0.05)),
        k_d=float(b.get("k_d", 0.6)),
        k_n=float(b.get("k_n", 1.0)),
    )
    p = doc.get("planner_choice", {})
    planner = PlannerChoice(
        kind=p.get("kind", "conventional"),
        preset=p.get("preset", "small-ch"),
        weights_path=p.get("weights"),
        safety_on=bool(p.get("safety", True)),
    )
    config = ScenarioConfig(
        s_b_init=float(sc["s_b_init"]),
        n_b_init=float(sc["n_b_init"]),
        v_init=float(sc.get("v_init", 50.0)),
        blocking=blocking,
        planner=planner,
        dt=float(sc.get("dt", 0.1)),
        max_steps=int(sc.get("max_steps", 2000)),
        noise_mu=env.noise_mu,
        noise_sigma=env.noise_sigma,
        seed=int(sc.get("seed", 0)),
        success_margin=float(sc.get("success_margin", 1.0)),
    )
    return config, env
