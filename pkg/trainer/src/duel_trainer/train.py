"""Curriculum PPO training against the duel environment protocol.

Stage 1 trains feasible-trajectory generation with collisions disabled;
stages 2..6 enable the opponent with the footprint scale growing to the
true geometry. The actor/critic are 256x256 tanh networks; the actor's
output layer is tanh-squashed so its deterministic action lives in the
normalized action box. The trained actor exports to the weights-file
schema together with the encoding constants announced by the server.
"""

from __future__ import annotations

import argparse
import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from stable_baselines3 import PPO
from stable_baselines3.common.callbacks import BaseCallback
from stable_baselines3.common.monitor import Monitor
from stable_baselines3.common.vec_env import DummyVecEnv

from .client import RemoteDuelEnv, free_port, spawn_server
from .export import export_parity_fixture, export_weights

STAGES = (1, 2, 3, 4, 5, 6)


@dataclass
class TrainingConfig:
    preset: str = "training2"
    out: str = "policy.json"
    seed: int = 0
    n_envs: int = 2
    stage_steps: dict[int, int] = field(default_factory=lambda: {
        1: 120_000, 2: 200_000, 3: 200_000, 4: 200_000, 5: 200_000, 6: 260_000,
    })
    learning_rate: float = 3e-4
    n_steps: int = 1024
    batch_size: int = 256
    n_epochs: int = 10
    gamma: float = 0.995
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    log_std_init: float = -0.7
    max_episode_steps: int = 600
    log_dir: str | None = None


class DivergenceWatchdog(BaseCallback):
    """Aborts a stage when the rolling return collapses from its peak."""

    def __init__(self, check_every: int = 4096, collapse_ratio: float = 0.2,
                 min_peak: float = 5.0, patience: int = 3):
        super().__init__()
        self.check_every = check_every
        self.collapse_ratio = collapse_ratio
        self.min_peak = min_peak
        self.patience = patience
        self.peak = -np.inf
        self.strikes = 0
        self.tripped = False

    def reset_stage(self) -> None:
        self.peak = -np.inf
        self.strikes = 0

    def _on_step(self) -> bool:
        if self.num_timesteps % self.check_every:
            return True
        buffer = self.model.ep_info_buffer
        if not buffer or len(buffer) < 20:
            return True
        mean_return = float(np.mean([info["r"] for info in buffer]))
        self.peak = max(self.peak, mean_return)
        if self.peak > self.min_peak and mean_return < self.collapse_ratio * self.peak:
            self.strikes += 1
        else:
            self.strikes = 0
        if self.strikes >= self.patience:
            self.tripped = True
            return False
        return True


def build_model(venv, config: TrainingConfig) -> PPO:
    policy_kwargs = dict(
        activation_fn=nn.Tanh,
        net_arch=dict(pi=[256, 256], vf=[256, 256]),
        log_std_init=config.log_std_init,
    )
    model = PPO(
        "MlpPolicy",
        venv,
        learning_rate=config.learning_rate,
        n_steps=config.n_steps,
        batch_size=config.batch_size,
        n_epochs=config.n_epochs,
        gamma=config.gamma,
        gae_lambda=config.gae_lambda,
        clip_range=config.clip_range,
        seed=config.seed,
        policy_kwargs=policy_kwargs,
        verbose=0,
    )
    # squash the deterministic action into the normalized box; the linear
    # layer's parameters are already registered with the optimizer
    model.policy.action_net = nn.Sequential(model.policy.action_net, nn.Tanh())
    return model


def set_stage(venv, model: PPO, stage: int) -> None:
    """Point every worker at a curriculum stage and restart episodes."""
    for wrapped in venv.envs:
        wrapped.unwrapped.stage = stage
    obs = venv.reset()
    model._last_obs = obs
    model._last_episode_starts = np.ones((venv.num_envs,), dtype=bool)


def probe_success_rate(env: RemoteDuelEnv, model: PPO, episodes: int = 40,
                       seed0: int = 900_000) -> float:
    """Deterministic rollouts on training scenarios; fraction successful."""
    wins = 0
    for i in range(episodes):
        obs, _ = env.reset(seed=seed0 + i)
        for _ in range(env.scenario.get("max_steps", 600) if env.scenario else 600):
            action, _ = model.predict(obs, deterministic=True)
            obs, _, done, _, info = env.step(action)
            if done:
                wins += info.get("status") == "success"
                break
    return wins / episodes


def train(config: TrainingConfig) -> Path:
    out_path = Path(config.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    log_dir = Path(config.log_dir) if config.log_dir else out_path.parent
    log_rows: list[dict] = []

    ports = [free_port() for _ in range(config.n_envs)]
    servers = [spawn_server(port) for port in ports]
    try:
        def make_env(rank: int):
            def _build():
                env = RemoteDuelEnv(
                    "127.0.0.1", ports[rank],
                    preset=config.preset,
                    stage=1,
                    seed0=config.seed * 1_000_000 + rank * 100_000,
                    scenario={"max_steps": config.max_episode_steps},
                )
                return Monitor(env)
            return _build

        venv = DummyVecEnv([make_env(rank) for rank in range(config.n_envs)])
        model = build_model(venv, config)
        watchdog = DivergenceWatchdog()
        checkpoint = None

        for stage in STAGES:
            budget = config.stage_steps.get(stage, 0)
            if budget <= 0:
                continue
            set_stage(venv, model, stage)
            watchdog.reset_stage()
            t0 = time.time()
            model.learn(total_timesteps=budget, reset_num_timesteps=False,
                        callback=watchdog, progress_bar=False)
            rate = probe_success_rate(venv.envs[0].unwrapped, model)
            set_stage(venv, model, stage)  # probe consumed episodes; restart cleanly
            log_rows.append({
                "stage": stage,
                "steps_total": model.num_timesteps,
                "wall_s": round(time.time() - t0, 1),
                "probe_success": rate,
                "diverged": watchdog.tripped,
            })
            print(f"stage {stage}: steps={model.num_timesteps} "
                  f"probe_success={rate:.2f} wall={log_rows[-1]['wall_s']}s",
                  flush=True)
            if watchdog.tripped:
                print("return collapse detected; keeping last stage checkpoint", flush=True)
                if checkpoint is not None:
                    model.policy.load_state_dict(checkpoint)
                break
            checkpoint = {k: v.clone() for k, v in model.policy.state_dict().items()}

        encoding = venv.envs[0].unwrapped.encoding
        metadata = {
            "preset": config.preset,
            "seed": config.seed,
            "total_steps": int(model.num_timesteps),
            "algorithm": "ppo-clip",
            "hyperparameters": {
                "learning_rate": config.learning_rate,
                "n_steps": config.n_steps,
                "batch_size": config.batch_size,
                "n_epochs": config.n_epochs,
                "gamma": config.gamma,
                "gae_lambda": config.gae_lambda,
                "clip_range": config.clip_range,
                "log_std_init": config.log_std_init,
            },
            "stage_log": log_rows,
        }
        export_weights(model.policy, encoding, out_path, metadata)
        export_parity_fixture(model.policy, out_path.with_suffix(".parity.json"))
        with open(log_dir / (out_path.stem + "_training_log.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["stage", "steps_total", "wall_s",
                                                    "probe_success", "diverged"])
            writer.writeheader()
            writer.writerows(log_rows)
        venv.close()
    finally:
        for server in servers:
            server.terminate()
        for server in servers:
            server.wait(timeout=10)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Train a duel policy over the env protocol")
    parser.add_argument("--preset", default="training2", choices=["training1", "training2"])
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-envs", type=int, default=2)
    parser.add_argument("--stage-steps", default=None,
                        help="comma list of six per-stage budgets, e.g. 120000,200000,...")
    parser.add_argument("--max-episode-steps", type=int, default=600)
    args = parser.parse_args(argv)
    config = TrainingConfig(
        preset=args.preset, out=args.out, seed=args.seed, n_envs=args.n_envs,
        max_episode_steps=args.max_episode_steps,
    )
    if args.stage_steps:
        budgets = [int(x) for x in args.stage_steps.split(",")]
        config.stage_steps = {stage: budgets[i] for i, stage in enumerate(STAGES[:len(budgets)])}
    train(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
