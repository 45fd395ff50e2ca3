"""Two-vehicle racing-duel simulator and trajectory-planning toolkit."""

from .dynamics import BlockingParams, CurvilinearState
from .engine import (
    EpisodeOutcome,
    EpisodeStatus,
    PlannerChoice,
    ScenarioConfig,
    run_episode,
)
from .feasibility import FeasibilityLimits, FeasibilityVerdict
from .frenet import EgoState, EndState, SamplerConfig, Trajectory
from .planner import PRESETS, ConventionalPlanner, CostWeights, NoValidTrajectoryError
from .policy import PolicyWeights
from .track import TrackModel
from .vehicle import VehicleGeometry

__all__ = [
    "BlockingParams",
    "CurvilinearState",
    "ConventionalPlanner",
    "CostWeights",
    "EgoState",
    "EndState",
    "EpisodeOutcome",
    "EpisodeStatus",
    "FeasibilityLimits",
    "FeasibilityVerdict",
    "NoValidTrajectoryError",
    "PlannerChoice",
    "PolicyWeights",
    "PRESETS",
    "SamplerConfig",
    "ScenarioConfig",
    "Trajectory",
    "TrackModel",
    "VehicleGeometry",
    "run_episode",
]

__version__ = "0.1.0"
