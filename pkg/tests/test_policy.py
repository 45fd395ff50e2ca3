import json
import math

import numpy as np
import pytest

from raceduel.dynamics import CurvilinearState
from raceduel.frenet import EgoState, EndState
from raceduel.policy import (
    ACTION_DIM,
    ActionBounds,
    PolicyWeights,
    StateNormalization,
    build_state,
    denormalize_action,
    forward,
    normalize_end_state,
)
from raceduel.track import TrackModel
from raceduel.vehicle import VehicleGeometry

TRACK = TrackModel()
NORMS = StateNormalization()


def random_weights(rng, hidden=(8, 8)):
    dims = [12, *hidden, 4]
    layers = [
        (rng.normal(scale=0.3, size=(dims[i + 1], dims[i])), rng.normal(scale=0.1, size=dims[i + 1]))
        for i in range(len(dims) - 1)
    ]
    return PolicyWeights(layers=layers)


class TestBuildState:
    def test_all_zero_at_rest(self):
        ego = EgoState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=0.0, n=0.0, chi=0.0, v=0.0)
        state = build_state(ego, opp, NORMS, TRACK)
        assert np.array_equal(state, np.zeros(12))

    def test_velocity_normalization(self):
        ego = EgoState(0.0, 50.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=0.0, n=0.0, chi=0.0, v=50.0)
        state = build_state(ego, opp, NORMS, TRACK)
        assert state[1] == pytest.approx(50.0 / 85.0, abs=1e-9)

    def test_relative_gap_normalization(self):
        ego = EgoState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=50.0, n=0.0, chi=0.0, v=0.0)
        state = build_state(ego, opp, NORMS, TRACK)
        assert state[7] == pytest.approx(-0.5, abs=1e-12)

    def test_clamped_to_unit_interval(self):
        ego = EgoState(5000.0, 200.0, 100.0, 30.0, 40.0, 90.0)
        opp = CurvilinearState(s=0.0, n=-30.0, chi=-2.0, v=0.0)
        state = build_state(ego, opp, NORMS, TRACK)
        assert (np.abs(state) <= 1.0).all()

    def test_observed_rate_override(self):
        ego = EgoState(0.0, 50.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=20.0, n=0.0, chi=0.0, v=50.0)
        clean = build_state(ego, opp, NORMS, TRACK)
        noisy = build_state(ego, opp, NORMS, TRACK, opponent_s_rate=55.0)
        # only the relative longitudinal rate component moves
        diff = np.nonzero(clean != noisy)[0]
        assert diff.tolist() == [8]
        assert noisy[8] == pytest.approx((50.0 - 55.0) / 35.0, abs=1e-12)


class TestForward:
    def test_zero_weights_zero_action(self):
        layers = [
            (np.zeros((256, 12)), np.zeros(256)),
            (np.zeros((256, 256)), np.zeros(256)),
            (np.zeros((4, 256)), np.zeros(4)),
        ]
        weights = PolicyWeights(layers=layers)
        action = forward(np.linspace(-1, 1, 12), weights)
        assert np.array_equal(action, np.zeros(4))

    def test_single_path_matches_scalar_chain(self):
        # route one input through unit weights: output = tanh(tanh(tanh(x)))
        w1 = np.zeros((5, 12)); w1[0, 3] = 1.0
        w2 = np.zeros((5, 5)); w2[2, 0] = 1.0
        w3 = np.zeros((4, 5)); w3[1, 2] = 1.0
        weights = PolicyWeights(layers=[(w1, np.zeros(5)), (w2, np.zeros(5)), (w3, np.zeros(4))])
        x = np.zeros(12); x[3] = 0.7
        action = forward(x, weights)
        expected = math.tanh(math.tanh(math.tanh(0.7)))
        assert action[1] == pytest.approx(expected, abs=1e-15)
        assert action[0] == 0.0

    def test_deterministic(self):
        rng = np.random.default_rng(41)
        weights = random_weights(rng)
        state = rng.uniform(-1, 1, 12)
        assert np.array_equal(forward(state, weights), forward(state, weights))

    def test_output_bounded(self):
        rng = np.random.default_rng(42)
        weights = random_weights(rng, hidden=(32, 32))
        for _ in range(20):
            action = forward(rng.uniform(-1, 1, 12), weights)
            assert action.shape == (ACTION_DIM,)
            assert (np.abs(action) < 1.0).all()

    def test_bad_state_shape_rejected(self):
        rng = np.random.default_rng(43)
        with pytest.raises(ValueError):
            forward(np.zeros(5), random_weights(rng))


class TestActionMapping:
    BOUNDS = ActionBounds()

    def test_midpoint(self):
        end = denormalize_action(np.zeros(4), self.BOUNDS)
        assert end.n_end == 0.0
        assert end.n_dot_end == 0.0
        assert end.n_ddot_end == 0.0
        assert end.s_dot_end == pytest.approx(42.5)

    def test_upper_bounds(self):
        end = denormalize_action(np.array([1.0, 1.0, 1.0, 1.0]), self.BOUNDS)
        assert end.n_end == pytest.approx(6.535)
        assert end.s_dot_end == pytest.approx(85.0)

    def test_lower_bounds(self):
        end = denormalize_action(np.array([-1.0, -1.0, -1.0, -1.0]), self.BOUNDS)
        assert end.n_end == pytest.approx(-6.535)
        assert end.s_dot_end == 0.0

    def test_out_of_range_clamped(self):
        end = denormalize_action(np.array([3.0, 0.0, 0.0, -2.0]), self.BOUNDS)
        assert end.n_end == pytest.approx(6.535)
        assert end.s_dot_end == 0.0

    def test_round_trip(self):
        rng = np.random.default_rng(44)
        for _ in range(50):
            action = rng.uniform(-1, 1, 4)
            end = denormalize_action(action, self.BOUNDS)
            back = normalize_end_state(end, self.BOUNDS)
            assert np.allclose(back, action, atol=1e-12)

    def test_bounds_for_track(self):
        bounds = ActionBounds.for_track(TRACK, VehicleGeometry(), v_max=85.0)
        assert bounds.n_end[1] == pytest.approx(6.535)
        assert bounds.s_dot_end == (0.0, 85.0)


class TestWeightsFile:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(45)
        weights = random_weights(rng)
        path = tmp_path / "policy.json"
        weights.save(path)
        loaded = PolicyWeights.load(path)
        for (w1, b1), (w2, b2) in zip(weights.layers, loaded.layers):
            assert np.array_equal(w1, w2)
            assert np.array_equal(b1, b2)
        assert loaded.norms == weights.norms
        assert loaded.action_bounds == weights.action_bounds
        state = rng.uniform(-1, 1, 12)
        assert np.array_equal(forward(state, weights), forward(state, loaded))

    def test_file_is_self_describing(self, tmp_path):
        rng = np.random.default_rng(46)
        weights = random_weights(rng, hidden=(6, 5))
        path = tmp_path / "policy.json"
        weights.save(path)
        doc = json.loads(path.read_text())
        assert doc["architecture"] == [12, 6, 5, 4]
        assert doc["activation"] == "tanh"
        assert set(doc["norms"]) >= {"s", "s_dot", "n", "chi", "rel_s", "rel_s_dot"}
        assert set(doc["action_bounds"]) == {"n_end", "n_dot_end", "n_ddot_end", "s_dot_end"}

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError):
            PolicyWeights.load(path)
        path.write_text(json.dumps({"layers": []}))
        with pytest.raises((ValueError, IndexError)):
            PolicyWeights.load(path)

    def test_architecture_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(47)
        weights = random_weights(rng)
        path = tmp_path / "policy.json"
        weights.save(path)
        doc = json.loads(path.read_text())
        doc["architecture"] = [12, 999, 4]
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            PolicyWeights.load(path)

    def test_non_finite_rejected(self):
        layers = [
            (np.full((4, 12), np.nan), np.zeros(4)),
        ]
        with pytest.raises(ValueError):
            PolicyWeights(layers=layers)

    def test_wrong_io_dims_rejected(self):
        with pytest.raises(ValueError):
            PolicyWeights(layers=[(np.zeros((4, 11)), np.zeros(4))])
