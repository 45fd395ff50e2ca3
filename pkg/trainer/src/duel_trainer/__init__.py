"""Curriculum PPO trainer speaking the duel environment protocol."""

from .client import ProtocolClient, RemoteDuelEnv, free_port, spawn_server
from .export import export_parity_fixture, export_weights, reference_forward
from .train import TrainingConfig, train

__all__ = [
    "ProtocolClient",
    "RemoteDuelEnv",
    "TrainingConfig",
    "export_parity_fixture",
    "export_weights",
    "free_port",
    "reference_forward",
    "spawn_server",
    "train",
]
