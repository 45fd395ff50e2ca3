"""Line-protocol client for the duel environment server.

The simulator side is a separate process serving newline-delimited JSON
over TCP (one session per connection); this module wraps one connection
as a gymnasium environment and manages server subprocesses.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import time

import gymnasium as gym
import numpy as np

PROTOCOL_VERSION = "v1"
STATE_DIM = 12
ACTION_DIM = 4


class ProtocolClient:
    """One protocol session over a TCP connection."""

    def __init__(self, host: str, port: int, connect_timeout: float = 20.0):
        deadline = time.monotonic() + connect_timeout
        last_error = None
        while time.monotonic() < deadline:
            try:
                self._sock = socket.create_connection((host, port), timeout=60.0)
                break
            except OSError as exc:
                last_error = exc
                time.sleep(0.1)
        else:
            raise ConnectionError(f"environment server not reachable: {last_error}")
        self._stream = self._sock.makefile("rw", encoding="utf-8")

    def request(self, **body) -> dict:
        body["v"] = PROTOCOL_VERSION
        self._stream.write(json.dumps(body) + "\n")
        self._stream.flush()
        line = self._stream.readline()
        if not line:
            raise ConnectionError("environment server closed the connection")
        reply = json.loads(line)
        if "error" in reply:
            raise RuntimeError(f"environment error: {reply['error']}")
        return reply

    def close(self) -> None:
        try:
            self.request(cmd="close")
        except (ConnectionError, RuntimeError, OSError):
            pass
        self._stream.close()
        self._sock.close()


def spawn_server(port: int, host: str = "127.0.0.1") -> subprocess.Popen:
    """Launch one simulator server process on the given port."""
    return subprocess.Popen(
        [sys.executable, "-m", "raceduel.cli", "serve-env",
         "--endpoint", f"tcp://{host}:{port}"],
        stdout=subprocess.DEVNULL,
    )


def free_port() -> int:
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        return probe.getsockname()[1]


class RemoteDuelEnv(gym.Env):
    """Gymnasium adapter over one remote environment session.

    The server owns scenario sampling, curriculum geometry and rewards;
    this side only passes the stage, a per-episode seed and actions.
    Episode seeds advance deterministically from ``seed0``.
    """

    metadata = {"render_modes": []}

    def __init__(
        self,
        host: str,
        port: int,
        preset: str = "training2",
        stage: int = 1,
        seed0: int = 0,
        scenario: dict | None = None,
    ):
        self.observation_space = gym.spaces.Box(-1.0, 1.0, shape=(STATE_DIM,), dtype=np.float64)
        self.action_space = gym.spaces.Box(-1.0, 1.0, shape=(ACTION_DIM,), dtype=np.float32)
        self.client = ProtocolClient(host, port)
        self.preset = preset
        self.stage = stage
        self.scenario = scenario
        self._episode_seed = int(seed0)
        self.encoding: dict | None = None  # norms/action_bounds from the server

    def reset(self, *, seed=None, options=None):
        if seed is not None:
            self._episode_seed = int(seed)
        body = {"cmd": "reset", "stage": self.stage, "seed": self._episode_seed}
        if self.preset is not None:
            body["preset"] = self.preset
        if self.scenario is not None:
            body["scenario"] = self.scenario  # explicit fields win over sampling
        reply = self.client.request(**body)
        self._episode_seed += 1
        self.encoding = {
            "norms": reply["norms"],
            "action_bounds": reply["action_bounds"],
        }
        return np.asarray(reply["state"], dtype=np.float64), {}

    def step(self, action):
        action = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        reply = self.client.request(cmd="step", action=[float(a) for a in action])
        obs = np.asarray(reply["state"], dtype=np.float64)
        info = dict(reply.get("info", {}))
        return obs, float(reply["reward"]), bool(reply["done"]), False, info

    def close(self):
        self.client.close()
