"""Policy export into the self-describing weights-file schema.

The file carries the network layers plus the state normalization and
action decoding intervals the policy was trained under, so the consumer
reconstructs the exact same mapping. A parity fixture with the policy's
own deterministic outputs on random states ships alongside for
cross-implementation verification.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch


def actor_layers(policy) -> list[tuple[np.ndarray, np.ndarray]]:
    """(weight, bias) pairs of the deterministic actor path."""
    modules = list(policy.mlp_extractor.policy_net) + list(policy.action_net)
    layers = []
    for module in modules:
        if isinstance(module, torch.nn.Linear):
            layers.append((
                module.weight.detach().double().cpu().numpy(),
                module.bias.detach().double().cpu().numpy(),
            ))
    return layers


def export_weights(
    policy,
    encoding: dict,
    path: str | Path,
    metadata: dict | None = None,
) -> None:
    """Write the actor network and its encoding constants as JSON."""
    layers = actor_layers(policy)
    dims = [layers[0][0].shape[1]] + [w.shape[0] for w, _ in layers]
    doc = {
        "architecture": dims,
        "activation": "tanh",
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in layers],
        "norms": encoding["norms"],
        "action_bounds": encoding["action_bounds"],
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def reference_forward(layers, states: np.ndarray) -> np.ndarray:
    """Plain tanh-MLP forward used to validate exports locally."""
    out = np.asarray(states, dtype=float).T
    for w, b in layers:
        out = np.tanh(w @ out + b[:, None])
    return out.T


def deterministic_actions(policy, states: np.ndarray) -> np.ndarray:
    """The trainer-side policy evaluated deterministically.

    Runs the policy's own actor modules directly (the deterministic
    action of the Gaussian head is its mean), sidestepping the float32
    cast in the observation preprocessing so double-precision weights
    stay double end to end.
    """
    dtype = next(policy.parameters()).dtype
    obs = torch.as_tensor(np.asarray(states)).to(dtype)
    with torch.no_grad():
        latent = policy.mlp_extractor.forward_actor(obs)
        actions = policy.action_net(latent)
    return actions.cpu().numpy()


def export_parity_fixture(policy, path: str | Path, n_states: int = 100, seed: int = 0) -> None:
    """Random states and the policy's deterministic double-precision actions."""
    rng = np.random.default_rng(seed)
    states = rng.uniform(-1.0, 1.0, size=(n_states, 12))
    was_double = next(policy.parameters()).dtype == torch.float64
    policy.double()
    try:
        actions = deterministic_actions(policy, states)
    finally:
        if not was_double:
            policy.float()
    doc = {"states": states.tolist(), "actions": actions.tolist()}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")
