import json

import numpy as np

from duel_trainer.export import reference_forward
from duel_trainer.train import TrainingConfig, train


def test_stage_one_smoke_run(tmp_path):
    """A tiny stage-1-only run produces a loadable, well-formed export."""
    config = TrainingConfig(
        preset="training1",
        out=str(tmp_path / "smoke.json"),
        seed=1,
        n_envs=1,
        stage_steps={1: 1024},
        n_steps=256,
        batch_size=64,
        n_epochs=4,
    )
    out = train(config)
    doc = json.loads(out.read_text())
    assert doc["architecture"] == [12, 256, 256, 4]
    assert doc["activation"] == "tanh"
    assert doc["norms"]["s_dot"] == 85.0
    assert doc["metadata"]["preset"] == "training1"
    assert doc["metadata"]["total_steps"] >= 1024

    layers = [(np.asarray(l["w"]), np.asarray(l["b"])) for l in doc["layers"]]
    parity = json.loads(out.with_suffix(".parity.json").read_text())
    states = np.asarray(parity["states"])
    actions = np.asarray(parity["actions"])
    assert states.shape == (100, 12)
    assert np.allclose(reference_forward(layers, states), actions, atol=1e-6)

    log = (tmp_path / "smoke_training_log.csv").read_text().splitlines()
    assert log[0] == "stage,steps_total,wall_s,probe_success,diverged"
    assert len(log) == 2
