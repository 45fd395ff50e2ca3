import math

import numpy as np
import pytest

from raceduel.dynamics import CurvilinearState
from raceduel.feasibility import FeasibilityLimits, check_all
from raceduel.frenet import EgoState, SamplerConfig, sample_end_states, trajectory_from_end_state
from raceduel.planner import (
    PRESETS,
    ConventionalPlanner,
    CostWeights,
    NoValidTrajectoryError,
    OpponentPrediction,
    PredictionMode,
    predict,
    prediction_cost,
    trajectory_cost,
)
from raceduel.track import TrackModel
from raceduel.vehicle import VehicleGeometry

TRACK = TrackModel()
GEOMETRY = VehicleGeometry()
LIMITS = FeasibilityLimits()
CONFIG = SamplerConfig()


def random_reachable_state(rng):
    """Random ego state whose inherited accelerations fit the envelope.

    In-simulation start states always come from a previously feasible
    trajectory, so their accelerations respect the gg table.
    """
    s_dot = rng.uniform(20, 80)
    n_dot = rng.uniform(-3, 3)
    v = math.hypot(s_dot, n_dot)
    lim_lon, lim_lat = LIMITS.gg_limits(np.array([v]))
    return EgoState(
        s=rng.uniform(0, 1000), s_dot=s_dot,
        s_ddot=rng.uniform(-0.6, 0.6) * float(lim_lon[0]),
        n=rng.uniform(-5, 5), n_dot=n_dot,
        n_ddot=rng.uniform(-0.6, 0.6) * float(lim_lat[0]),
    )


def exhaustive_plan_oracle(ego, opponent, weights):
    """Brute-force reference: rebuild, check and score every candidate."""
    grid = sample_end_states(None, TRACK, GEOMETRY, CONFIG)
    pred = predict(opponent, weights.prediction_mode, CONFIG.horizon,
                   CONFIG.n_points, TRACK, GEOMETRY.half_width)
    best_index, best_cost = None, math.inf
    for index in range(grid.n_candidates):
        traj = trajectory_from_end_state(ego, grid.end_state(index), TRACK, CONFIG)
        if not check_all(traj, TRACK, LIMITS, GEOMETRY):
            continue
        cost = trajectory_cost(traj, pred, weights)
        if cost < best_cost:
            best_index, best_cost = index, cost
    return best_index, best_cost


class TestPresets:
    def test_all_six_present(self):
        assert set(PRESETS) == {
            "small-ch", "small-clp", "medium-ch", "medium-clp", "large-ch", "large-clp",
        }

    def test_ellipse_parameters(self):
        assert PRESETS["small-ch"].p_s == 0.08 and PRESETS["small-ch"].p_n == 0.5
        assert PRESETS["medium-clp"].p_s == 0.02 and PRESETS["medium-clp"].p_n == 0.18
        assert PRESETS["large-ch"].p_s == 0.01 and PRESETS["large-ch"].p_n == 0.1
        assert all(w.w_pr == 5000.0 for w in PRESETS.values())

    def test_modes(self):
        assert PRESETS["small-ch"].prediction_mode is PredictionMode.CH
        assert PRESETS["large-clp"].prediction_mode is PredictionMode.CLP

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            CostWeights(-0.1, 0.0, 1.0, 0.1, 0.1, PredictionMode.CH)


class TestPredict:
    def test_clp_freezes_lateral(self):
        opp = CurvilinearState(s=100.0, n=2.0, chi=0.1, v=50.0)
        pred = predict(opp, PredictionMode.CLP, 2.5, 51, TRACK, GEOMETRY.half_width)
        assert np.allclose(pred.n, 2.0, atol=1e-12)

    def test_ch_extrapolates_lateral_rate(self):
        opp = CurvilinearState(s=100.0, n=0.0, chi=0.1, v=50.0)
        pred = predict(opp, PredictionMode.CH, 2.5, 51, TRACK, GEOMETRY.half_width)
        k = 20  # t = 1.0 s
        assert pred.n[k] == pytest.approx(50.0 * math.sin(0.1), abs=1e-9)

    def test_ch_clipped_at_corridor(self):
        opp = CurvilinearState(s=100.0, n=0.0, chi=0.5, v=50.0)
        pred = predict(opp, PredictionMode.CH, 2.5, 51, TRACK, GEOMETRY.half_width)
        _, hi = TRACK.lateral_limits(GEOMETRY.half_width)
        assert pred.n.max() == pytest.approx(hi, abs=1e-12)
        assert (pred.n <= hi).all()

    def test_longitudinal_constant_velocity(self):
        opp = CurvilinearState(s=100.0, n=2.0, chi=0.1, v=50.0)
        pred = predict(opp, PredictionMode.CLP, 2.5, 51, TRACK, GEOMETRY.half_width)
        rate = 50.0 * math.cos(0.1)
        assert pred.s[0] == 100.0
        assert pred.s[-1] == pytest.approx(100.0 + rate * 2.5, abs=1e-9)
        assert (np.diff(pred.s) > 0.0).all()


class TestPredictionCost:
    def test_at_predicted_point(self):
        assert prediction_cost(5.0, 1.0, 5.0, 1.0, 0.08, 0.5) == 1.0

    def test_small_ellipse_longitudinal_offset(self):
        got = prediction_cost(0.0, 0.0, 5.0, 0.0, 0.08, 0.5)
        assert got == pytest.approx(math.exp(-2.0), abs=1e-12)

    def test_large_ellipse_lateral_offset(self):
        got = prediction_cost(0.0, 0.0, 0.0, 3.0, 0.01, 0.1)
        assert got == pytest.approx(math.exp(-0.9), abs=1e-12)


class TestTrajectoryCost:
    def _constant_offset_traj(self, n=2.0, v=50.0):
        from raceduel.frenet import assemble, solve_quartic, solve_quintic
        lat = solve_quintic((n, 0, 0), (n, 0, 0), 2.5)
        lon = solve_quartic((0, v, 0), (v, 0), 2.5)
        return assemble(lat, lon, TRACK)

    def test_zero_weights(self):
        traj = self._constant_offset_traj()
        pred = OpponentPrediction(s=np.full(51, 1e9), n=np.zeros(51))
        weights = CostWeights(0.0, 0.0, 0.0, 0.08, 0.5, PredictionMode.CH)
        assert trajectory_cost(traj, pred, weights) == 0.0

    def test_vanishing_terms_at_target_speed(self):
        traj = self._constant_offset_traj(n=0.0, v=85.0)
        pred = OpponentPrediction(s=np.full(51, 1e9), n=np.zeros(51))
        weights = CostWeights(1.0, 1.0, 1.0, 0.08, 0.5, PredictionMode.CH)
        assert trajectory_cost(traj, pred, weights) == pytest.approx(0.0, abs=1e-9)

    def test_rectangle_rule_on_constant_integrand(self):
        traj = self._constant_offset_traj(n=2.0, v=85.0)
        pred = OpponentPrediction(s=np.full(51, 1e9), n=np.zeros(51))
        weights = CostWeights(1.0, 0.0, 0.0, 0.08, 0.5, PredictionMode.CH)
        # 50 left endpoints of n^2 = 4 over dt_grid = 0.05
        assert trajectory_cost(traj, pred, weights) == pytest.approx(10.0, abs=1e-9)

    def test_grid_mismatch_rejected(self):
        traj = self._constant_offset_traj()
        pred = OpponentPrediction(s=np.zeros(11), n=np.zeros(11))
        weights = CostWeights(1.0, 0.0, 0.0, 0.08, 0.5, PredictionMode.CH)
        with pytest.raises(ValueError):
            trajectory_cost(traj, pred, weights)


class TestPlan:
    def _planner(self, preset="small-ch"):
        return ConventionalPlanner(PRESETS[preset], TRACK, LIMITS, GEOMETRY, CONFIG)

    def test_free_road_targets_speed_and_center(self):
        # under a flat permissive envelope the full-speed candidate is
        # feasible and the cost drives straight to it
        flat = FeasibilityLimits(
            gg_speeds=np.array([0.0, 85.0]),
            gg_a_lon=np.array([25.0, 25.0]),
            gg_a_lat=np.array([25.0, 25.0]),
        )
        planner = ConventionalPlanner(PRESETS["small-ch"], TRACK, flat, GEOMETRY, CONFIG)
        ego = EgoState(0.0, 50.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=1e7, n=0.0, chi=0.0, v=50.0)
        result = planner.plan(ego, opp)
        grid = planner.grid
        i_vel, i_lat = divmod(result.candidate_index, 20)
        assert grid.velocity_targets[i_vel] == 85.0
        # nearest-to-centerline lateral targets (tie resolves to the lower index)
        assert abs(grid.lateral_targets[i_lat]) == pytest.approx(
            np.abs(grid.lateral_targets).min())

    def test_free_road_targets_top_feasible_speed_with_default_envelope(self):
        planner = self._planner()
        ego = EgoState(0.0, 50.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=1e7, n=0.0, chi=0.0, v=50.0)
        result = planner.plan(ego, opp)
        # power-limited forward reserve: the winner is the fastest
        # feasible velocity target, above the current speed
        assert result.trajectory.end_velocity > 50.0
        i_vel, _ = divmod(result.candidate_index, 20)
        faster = planner.grid.velocity_targets[i_vel + 1]
        from raceduel.frenet import trajectory_from_end_state, EndState
        probe = trajectory_from_end_state(
            ego, EndState(0.0, 0.0, 0.0, float(faster)), TRACK, CONFIG)
        assert not check_all(probe, TRACK, LIMITS, GEOMETRY).feasible

    def test_all_zero_gg_raises(self):
        limits = FeasibilityLimits(
            gg_speeds=np.array([0.0, 85.0]),
            gg_a_lon=np.array([0.0, 0.0]),
            gg_a_lat=np.array([0.0, 0.0]),
        )
        planner = ConventionalPlanner(PRESETS["small-ch"], TRACK, limits, GEOMETRY, CONFIG)
        ego = EgoState(0.0, 50.0, 0.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=50.0, n=0.0, chi=0.0, v=50.0)
        with pytest.raises(NoValidTrajectoryError):
            planner.plan(ego, opp)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(31)
        planner = self._planner()
        weights = PRESETS["small-ch"]
        for _ in range(6):
            ego = random_reachable_state(rng)
            opp = CurvilinearState(
                s=ego.s + rng.uniform(5, 80), n=rng.uniform(-6, 6),
                chi=rng.uniform(-0.15, 0.15), v=50.0,
            )
            result = planner.plan(ego, opp)
            oracle_index, oracle_cost = exhaustive_plan_oracle(ego, opp, weights)
            assert result.candidate_index == oracle_index
            assert result.cost == oracle_cost

    def test_raises_exactly_when_oracle_set_empty(self):
        # an inherited acceleration far beyond the envelope leaves no options
        ego = EgoState(0.0, 80.0, 10.0, 0.0, 0.0, 0.0)
        opp = CurvilinearState(s=40.0, n=0.0, chi=0.0, v=50.0)
        oracle_index, _ = exhaustive_plan_oracle(ego, opp, PRESETS["small-ch"])
        assert oracle_index is None
        with pytest.raises(NoValidTrajectoryError):
            self._planner().plan(ego, opp)

    def test_selected_trajectory_always_feasible(self):
        rng = np.random.default_rng(32)
        planner = self._planner("medium-clp")
        for _ in range(10):
            ego = random_reachable_state(rng)
            opp = CurvilinearState(s=ego.s + 30.0, n=0.0, chi=0.0, v=50.0)
            result = planner.plan(ego, opp)
            assert check_all(result.trajectory, TRACK, LIMITS, GEOMETRY).feasible

    def test_joint_weight_scaling_keeps_argmin(self):
        ego = EgoState(0.0, 50.0, 0.0, 1.0, 0.0, 0.0)
        opp = CurvilinearState(s=40.0, n=-1.0, chi=0.02, v=50.0)
        base = PRESETS["large-ch"]
        scaled = CostWeights(
            base.w_n * 7.0, base.w_v * 7.0, base.w_pr * 7.0,
            base.p_s, base.p_n, base.prediction_mode,
        )
        r1 = ConventionalPlanner(base, TRACK, LIMITS, GEOMETRY, CONFIG).plan(ego, opp)
        r2 = ConventionalPlanner(scaled, TRACK, LIMITS, GEOMETRY, CONFIG).plan(ego, opp)
        assert r1.candidate_index == r2.candidate_index

    def test_mirrored_scenario_selects_mirrored_candidate(self):
        planner = self._planner()
        ego_p = EgoState(0.0, 50.0, 0.0, 2.0, 1.0, -0.5)
        ego_m = EgoState(0.0, 50.0, 0.0, -2.0, -1.0, 0.5)
        opp_p = CurvilinearState(s=45.0, n=3.0, chi=0.05, v=50.0)
        opp_m = CurvilinearState(s=45.0, n=-3.0, chi=-0.05, v=50.0)
        r_p = planner.plan(ego_p, opp_p)
        r_m = planner.plan(ego_m, opp_m)
        i_vel_p, i_lat_p = divmod(r_p.candidate_index, 20)
        i_vel_m, i_lat_m = divmod(r_m.candidate_index, 20)
        assert i_vel_p == i_vel_m
        assert i_lat_m == 19 - i_lat_p
        assert np.array_equal(r_m.trajectory.n, -r_p.trajectory.n)
