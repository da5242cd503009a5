"""Displacement metrics, optimal assignment and the stability protocol."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpnet.evaluation import (
    EvalReport,
    b_min_fde,
    cv_predictor,
    min_ade,
    min_cost_assignment,
    min_fde,
    min_joint_ade,
    min_joint_fde,
    miss_rate,
    rollout_eval,
    stability_summed_ade,
)
from hpnet.synth import ScenarioSpec, generate


def brute_force_assignment(cost):
    n = cost.shape[0]
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = sum(cost[i, p] for i, p in enumerate(perm))
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


class TestMinAde:
    def test_exact_mode_scores_zero(self, rng):
        gt = rng.standard_normal((5, 2))
        preds = np.stack([gt + 3.0, gt, gt - 1.0])
        assert min_ade(preds, gt) == 0.0

    def test_constant_offset(self, rng):
        gt = rng.standard_normal((8, 2))
        pred = gt + np.array([3.0, 4.0])
        assert abs(min_ade(pred[None], gt) - 5.0) < 1e-12

    def test_extra_mode_never_hurts(self, rng):
        gt = rng.standard_normal((6, 2))
        preds = rng.standard_normal((3, 6, 2))
        base = min_ade(preds, gt)
        more = np.concatenate([preds, (gt + 1e6)[None]], axis=0)
        assert min_ade(more, gt) <= base

    def test_min_ade_bounded_by_every_mode(self, rng):
        gt = rng.standard_normal((6, 2))
        preds = rng.standard_normal((4, 6, 2))
        best = min_ade(preds, gt)
        for k in range(4):
            assert best <= min_ade(preds[k][None], gt) + 1e-12


class TestMinFde:
    def test_exact_endpoint(self, rng):
        gt = rng.standard_normal((5, 2))
        pred = gt + 1.0
        pred[-1] = gt[-1]
        fde, k = min_fde(np.stack([gt + 9.9, pred]), gt)
        assert fde == 0.0 and k == 1

    def test_picks_smaller_endpoint(self):
        gt = np.zeros((4, 2))
        a = np.zeros((4, 2)); a[-1] = (2.5, 0.0)
        b = np.zeros((4, 2)); b[-1] = (1.0, 0.0)
        fde, k = min_fde(np.stack([a, b]), gt)
        assert fde == 1.0 and k == 1

    def test_tie_takes_smaller_index(self):
        gt = np.zeros((3, 2))
        a = np.zeros((3, 2)); a[-1] = (1.0, 0.0)
        b = np.zeros((3, 2)); b[-1] = (0.0, 1.0)
        _, k = min_fde(np.stack([a, b]), gt)
        assert k == 0


class TestMissRate:
    def test_all_hits(self):
        assert miss_rate([0.0, 0.0, 0.0]) == 0.0

    def test_strict_threshold(self):
        assert miss_rate([1.9, 2.0, 2.1]) == pytest.approx(1 / 3)

    def test_all_misses(self):
        assert miss_rate([10.0] * 4) == 1.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            miss_rate([])


class TestBMinFde:
    def test_perfect_with_full_confidence(self, rng):
        gt = rng.standard_normal((5, 2))
        assert b_min_fde(gt[None], np.array([1.0]), gt) == 0.0

    def test_formula(self):
        gt = np.zeros((3, 2))
        pred = np.zeros((3, 2)); pred[-1] = (1.0, 0.0)
        out = b_min_fde(pred[None], np.array([0.5]), gt)
        assert out == pytest.approx(1.25)

    def test_uniform_confidence_six_modes(self, rng):
        gt = rng.standard_normal((4, 2))
        preds = np.stack([gt] + [gt + 50.0] * 5)
        probs = np.full(6, 1 / 6)
        assert b_min_fde(preds, probs, gt) == pytest.approx((5 / 6) ** 2)

    def test_never_below_min_fde(self, rng):
        gt = rng.standard_normal((4, 2))
        preds = rng.standard_normal((3, 4, 2))
        probs = np.array([0.2, 0.5, 0.3])
        fde, _ = min_fde(preds, gt)
        assert b_min_fde(preds, probs, gt) >= fde


class TestJointMetrics:
    def test_single_agent_equals_marginal(self, rng):
        gt = rng.standard_normal((5, 2))
        preds = rng.standard_normal((3, 5, 2))
        assert min_joint_ade(preds[None], gt[None]) == pytest.approx(min_ade(preds, gt))
        fde, _ = min_fde(preds, gt)
        assert min_joint_fde(preds[None], gt[None]) == pytest.approx(fde)

    def test_joint_fde_hand_case(self):
        gts = np.zeros((2, 3, 2))
        preds = np.zeros((2, 2, 3, 2))
        preds[0, 0, -1] = (0.0, 0.0)   # agent 0 mode 0 endpoint error 0
        preds[1, 0, -1] = (4.0, 0.0)   # agent 1 mode 0 endpoint error 4
        preds[0, 1, -1] = (1.0, 0.0)   # mode 1 errors 1 and 1
        preds[1, 1, -1] = (0.0, 1.0)
        assert min_joint_fde(preds, gts) == pytest.approx(1.0)

    def test_perfect_mode_scores_zero(self, rng):
        gts = rng.standard_normal((3, 5, 2))
        preds = np.stack([gts + 9.0, gts], axis=1)
        assert min_joint_ade(preds, gts) == 0.0
        assert min_joint_fde(preds, gts) == 0.0


class TestAssignment:
    def test_identity_when_diagonal_cheapest(self):
        cost = np.full((3, 3), 10.0)
        np.fill_diagonal(cost, 1.0)
        res = min_cost_assignment(cost)
        np.testing.assert_array_equal(res.permutation, [0, 1, 2])
        assert res.total_cost == 3.0

    def test_two_by_two(self):
        res = min_cost_assignment(np.array([[1.0, 10.0], [10.0, 1.0]]))
        np.testing.assert_array_equal(res.permutation, [0, 1])
        assert res.total_cost == 2.0

    def test_hundred_random_6x6_match_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            cost = rng.uniform(0, 10, size=(6, 6))
            res = min_cost_assignment(cost)
            best, _ = brute_force_assignment(cost)
            assert res.total_cost == pytest.approx(best, abs=1e-9)
            assert sorted(res.permutation) == list(range(6))

    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 6))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force_property(self, seed, n):
        r = np.random.default_rng(seed)
        cost = r.uniform(-5, 5, size=(n, n))
        res = min_cost_assignment(cost)
        best, _ = brute_force_assignment(cost)
        assert res.total_cost == pytest.approx(best, abs=1e-9)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            min_cost_assignment(np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestStability:
    def test_consistent_forecasts_score_zero(self, rng):
        # the same underlying path seen one frame apart
        path = np.cumsum(rng.standard_normal((9, 2)), axis=0)
        prev = np.stack([path[:8], path[:8] + 5.0])
        curr = np.stack([path[1:9], path[1:9] + 5.0])
        assert stability_summed_ade(prev, curr) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset_single_mode(self, rng):
        prev = np.zeros((1, 6, 2))
        curr = np.zeros((1, 6, 2))
        curr[0, :, 1] = 0.5          # every overlapping frame off by 0.5
        assert stability_summed_ade(prev, curr) == pytest.approx(0.5)

    def test_invariant_to_mode_order_of_current(self, rng):
        prev = rng.standard_normal((4, 7, 2))
        curr = rng.standard_normal((4, 7, 2))
        base = stability_summed_ade(prev, curr)
        perm = rng.permutation(4)
        assert stability_summed_ade(prev, curr[perm]) == pytest.approx(base)

    def test_short_horizon_rejected(self):
        with pytest.raises(ValueError):
            stability_summed_ade(np.zeros((2, 1, 2)), np.zeros((2, 1, 2)))


class TestRolloutEval:
    def _stream(self, seed=0):
        return generate(
            ScenarioSpec(layout="straight", maneuver_mix={"keep_lane": 1.0},
                         position_noise=0.0, heading_noise=0.0,
                         min_agents=2, max_agents=2,
                         history_frames=20 + 9, future_frames=30, seed=seed)
        )

    def test_cv_on_constant_velocity_stream_is_stable(self):
        res = rollout_eval(cv_predictor(), self._stream(3), 20, 30, steps=10)
        assert len(res["accuracy"]) == 10
        assert len(res["stability"]) == 9
        for row in res["stability"]:
            assert row["stability"] == pytest.approx(0.0, abs=1e-9)
        for row in res["accuracy"]:
            assert row["min_ade"] == pytest.approx(0.0, abs=1e-9)

    def test_single_step_has_no_stability_entries(self):
        stream = generate(
            ScenarioSpec(layout="straight", history_frames=20, future_frames=30,
                         seed=4)
        )
        res = rollout_eval(cv_predictor(), stream, 20, 30, steps=1)
        assert len(res["accuracy"]) == 1 and res["stability"] == []

    def test_insufficient_frames_rejected(self):
        stream = generate(ScenarioSpec(layout="straight", history_frames=20,
                                       future_frames=30, seed=5))
        from hpnet.scene.types import SceneError

        with pytest.raises(SceneError):
            rollout_eval(cv_predictor(), stream, 20, 30, steps=5)


class TestRigidInvariance:
    def test_metrics_invariant_under_shared_transform(self, rng):
        gt = rng.standard_normal((6, 2)) * 5
        preds = rng.standard_normal((4, 6, 2)) * 5
        probs = np.array([0.1, 0.2, 0.3, 0.4])
        angle = rng.uniform(-np.pi, np.pi)
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        shift = rng.uniform(-50, 50, 2)
        gt2 = gt @ rot.T + shift
        preds2 = preds @ rot.T + shift
        assert min_ade(preds2, gt2) == pytest.approx(min_ade(preds, gt))
        assert min_fde(preds2, gt2)[0] == pytest.approx(min_fde(preds, gt)[0])
        assert b_min_fde(preds2, probs, gt2) == pytest.approx(b_min_fde(preds, probs, gt))


class TestEvalReport:
    def test_text_and_csv_forms(self, tmp_path):
        rollout = {
            "accuracy": [
                {"step": 0, "agents": 3, "min_ade": 1.0, "min_fde": 2.0,
                 "miss_rate": 0.5, "b_min_fde": 2.5, "min_joint_ade": 1.1,
                 "min_joint_fde": 2.2},
                {"step": 1, "agents": 3, "min_ade": 1.5, "min_fde": 2.5,
                 "miss_rate": 0.0, "b_min_fde": 3.0, "min_joint_ade": 1.2,
                 "min_joint_fde": 2.1},
            ],
            "stability": [{"step": 1, "agents": 3, "stability": 0.7}],
        }
        report = EvalReport.from_rollout(rollout)
        assert report.aggregate["stability"] == pytest.approx(0.7)
        text = report.to_text()
        assert text.startswith("hpnet eval report v1")
        csv_text = report.to_csv()
        assert csv_text.splitlines()[0].startswith("step,")
        assert len(csv_text.splitlines()) == 3
        report.save(tmp_path / "r")
        assert (tmp_path / "r.txt").exists() and (tmp_path / "r.csv").exists()
