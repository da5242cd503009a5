"""Network behavior: shapes, frame conventions, equivariances, causality,
window extension, empty-key handling and trace inspection."""

import numpy as np
import pytest

from hpnet.autodiff import Tape, Tensor
from hpnet.autodiff import tensor as T
from hpnet.model import HPNet, inspect_hpa_weights
from hpnet.model.network import _SelfAttentionBlock
from hpnet.autodiff.nn import ParamStore
from hpnet.scene import transform_scene
from hpnet.scene.types import AgentTrack, Scene
from tests.conftest import micro_config, micro_scene


def forward_loss_on_inputs(model, scene, frame=None):
    """Scalar of the frame-t outputs as a function of the input feature grid."""
    idx = model.index_scene(scene)
    feats = Tensor(idx.agent_features[:, idx.agent_unorder], requires_grad=True)
    with Tape() as tape:
        bundle = model.forward(idx, agent_features=feats)
        out = bundle.finals
        if frame is not None:
            out = out[frame + idx.T - 1]
        loss = T.tsum(T.mul(out, out))
    return tape.gradients(loss)[feats], bundle


class TestShapesAndDeterminism:
    def test_output_shapes(self, tiny_scene):
        cfg = micro_config(history_frames=20, future_frames=30, num_modes=3,
                           embed_dim=8)
        model = HPNet(cfg, seed=0)
        b = model.forward(tiny_scene)
        n, k, f = tiny_scene.num_agents, 3, 30
        assert b.proposals.shape == (20, n, k, f, 2)
        assert b.finals.shape == (20, n, k, f, 2)
        assert b.refinement.shape == (20, n, k, f, 2)
        assert b.probs.shape == (20, n, k)

    def test_finals_are_proposals_plus_refinement(self, tiny_scene):
        model = HPNet(micro_config(history_frames=20, future_frames=30), seed=0)
        b = model.forward(tiny_scene)
        np.testing.assert_array_equal(
            b.finals.data, b.proposals.data + b.refinement.data
        )

    def test_probability_rows_sum_to_one(self, tiny_scene):
        model = HPNet(micro_config(history_frames=20, future_frames=30), seed=0)
        b = model.forward(tiny_scene)
        np.testing.assert_allclose(b.probs.data.sum(-1), 1.0, atol=1e-9)

    def test_eval_forward_is_bitwise_deterministic(self, tiny_scene):
        model = HPNet(micro_config(history_frames=20, future_frames=30), seed=0)
        b1 = model.forward(tiny_scene)
        b2 = model.forward(tiny_scene)
        assert np.array_equal(b1.finals.data, b2.finals.data)
        assert np.array_equal(b1.probs.data, b2.probs.data)

    def test_agent_encoder_weight_sharing(self):
        scene = micro_scene(seed=3, n_agents=2)
        # make agent 1 an exact copy of agent 0
        a0, a1 = scene.agents
        a1.xy = a0.xy + np.array([30.0, 0.0])   # apart in space
        a1.heading = a0.heading.copy()
        a1.vel = a0.vel.copy()
        model = HPNet(micro_config(), seed=0)
        idx = model.index_scene(scene)
        feats = idx.agent_features[:, idx.agent_unorder]
        np.testing.assert_array_equal(feats[:, 0], feats[:, 1])


class TestSE2Invariance:
    def test_local_outputs_invariant_under_rigid_motion(self, rng):
        scene = micro_scene(seed=4, n_agents=3)
        model = HPNet(micro_config(), seed=1)
        base = model.forward(scene)
        for _ in range(5):
            moved = transform_scene(scene, rng.uniform(-np.pi, np.pi),
                                    rng.uniform(-80, 80, 2))
            out = model.forward(moved)
            np.testing.assert_allclose(out.finals.data, base.finals.data, atol=1e-6)
            np.testing.assert_allclose(out.probs.data, base.probs.data, atol=1e-6)


class TestPermutationEquivariance:
    def test_agent_relabeling_is_exact(self):
        scene = micro_scene(seed=6, n_agents=4)
        model = HPNet(micro_config(), seed=2)
        base = model.forward(scene)
        perm = [2, 0, 3, 1]
        agents = [scene.agents[p] for p in perm]
        relabeled = Scene(scene.history_frames, scene.future_frames,
                          [AgentTrack(i, a.agent_class, a.xy, a.heading, a.vel,
                                      a.valid) for i, a in enumerate(agents)],
                          scene.lanes, focal_agent=perm.index(0))
        out = model.forward(relabeled)
        assert np.array_equal(out.finals.data, base.finals.data[:, perm])
        assert np.array_equal(out.probs.data, base.probs.data[:, perm])

    def test_mode_slot_permutation_is_exact(self):
        scene = micro_scene(seed=7, n_agents=2)
        cfg = micro_config(num_modes=3)
        model = HPNet(cfg, seed=3)
        base = model.forward(scene)
        perm = np.array([2, 0, 1])
        model.mode_queries.data = model.mode_queries.data[perm]
        out = model.forward(scene)
        assert np.array_equal(out.finals.data, base.finals.data[:, :, perm])
        assert np.array_equal(out.probs.data, base.probs.data[:, :, perm])


class TestCausality:
    def test_no_gradient_from_future_frames(self):
        model = HPNet(micro_config(), seed=4)
        for seed in range(3):
            scene = micro_scene(seed=seed, n_agents=2)
            t_probe = -2
            grad, _ = forward_loss_on_inputs(model, scene, frame=t_probe)
            t_idx = t_probe + model.cfg.history_frames - 1
            future = grad[t_idx + 1:]
            assert np.all(future == 0.0)
            assert np.any(grad[: t_idx + 1] != 0.0)

    def test_window_extension_through_prediction_history(self):
        cfg = micro_config(history_frames=12, future_frames=3, history_span=4,
                           prediction_span=4, attn_rounds=1)
        scene = micro_scene(seed=11, n_agents=2, T=12, F=3)
        on = HPNet(cfg, seed=5)
        grad_on, _ = forward_loss_on_inputs(on, scene, frame=0)
        cfg_off = micro_config(history_frames=12, future_frames=3, history_span=4,
                               prediction_span=4, attn_rounds=1, use_hpa=False)
        off = HPNet(cfg_off, seed=5)
        grad_off, _ = forward_loss_on_inputs(off, scene, frame=0)
        probe = 11 - 8          # frame t = -8 with T = 12
        assert np.any(grad_on[probe] != 0.0)
        assert np.all(grad_off[probe] == 0.0)
        # both see the direct window [t - I1, t]
        assert np.any(grad_on[11 - 4] != 0.0)
        assert np.any(grad_off[11 - 4] != 0.0)


class TestConventions:
    def test_out_of_range_lanes_match_laneless_scene(self):
        scene = micro_scene(seed=13, n_agents=2, n_lanes=2)
        for lane in scene.lanes:
            lane.centerline = lane.centerline + np.array([5000.0, 5000.0])
        no_lanes = Scene(scene.history_frames, scene.future_frames,
                         scene.agents, [], focal_agent=scene.focal_agent)
        model = HPNet(micro_config(), seed=6)
        with_far = model.forward(scene)
        without = model.forward(no_lanes)
        np.testing.assert_array_equal(with_far.finals.data, without.finals.data)

    def test_single_agent_scene_runs(self):
        scene = micro_scene(seed=14, n_agents=1)
        model = HPNet(micro_config(), seed=7)
        out = model.forward(scene, trace=True)
        rec = out.trace.records[(0, "agent", 0)]
        assert np.all(rec == 0.0)       # no neighbors -> zero mixture

    def test_zero_decoder_weights_give_zero_trajectories(self):
        scene = micro_scene(seed=15, n_agents=2)
        model = HPNet(micro_config(), seed=8)
        for stage in range(2):
            model.traj_mlp[stage].lin2.w.data[:] = 0.0
            model.traj_mlp[stage].lin2.b.data[:] = 0.0
        out = model.forward(scene)
        np.testing.assert_array_equal(out.finals.data, 0.0)

    def test_equal_score_logits_give_uniform_probs(self):
        scene = micro_scene(seed=16, n_agents=2)
        model = HPNet(micro_config(num_modes=4), seed=9)
        model.score_mlp.lin2.w.data[:] = 0.0
        model.score_mlp.lin2.b.data[:] = 0.0
        out = model.forward(scene)
        np.testing.assert_allclose(out.probs.data, 0.25, atol=1e-12)

    def test_post_norm_flag_runs_and_differs(self):
        scene = micro_scene(seed=29, n_agents=2)
        on = HPNet(micro_config(), seed=12)
        off = HPNet(micro_config(pre_norm=False), seed=12)
        a = on.forward(scene).finals.data
        b = off.forward(scene).finals.data
        assert np.isfinite(b).all()
        assert not np.allclose(a, b)

    def test_zeroed_block_is_identity_under_residuals(self, rng):
        cfg = micro_config()
        store = ParamStore(0)
        block = _SelfAttentionBlock(store, "b", cfg)
        for name, t in store.tensors.items():
            t.data = np.zeros_like(t.data)
        p = Tensor(rng.standard_normal((2, 2, 2, cfg.embed_dim)))
        rows = np.zeros((8, 1), dtype=np.int64)
        mask = np.ones((8, 1), dtype=bool)
        ek = Tensor(np.zeros((8, 1, cfg.embed_dim)))
        out = block(p, rows, mask, (ek, ek), (8, 1), lambda x: x)
        np.testing.assert_array_equal(out.data, p.data)

    def test_identical_proposals_reencode_identically(self, rng):
        model = HPNet(micro_config(), seed=10)
        flat = rng.standard_normal((1, 1, 1, 2 * model.cfg.future_frames))
        pair = np.concatenate([flat, flat], axis=2)
        q = model.reencode_mlp(Tensor(pair))
        np.testing.assert_array_equal(q.data[0, 0, 0], q.data[0, 0, 1])

    def test_round_parameters_are_independent(self):
        scene = micro_scene(seed=17, n_agents=2)
        one = HPNet(micro_config(attn_rounds=1), seed=11)
        two = HPNet(micro_config(attn_rounds=2), seed=11)
        a = one.forward(scene).finals.data
        b = two.forward(scene).finals.data
        assert not np.allclose(a, b)
        assert any(".tfa1." in name for name in two.parameters())
        assert not any(".tfa1." in name for name in one.parameters())


class TestLaneEncoding:
    def _lane_rows(self, model, scene):
        idx = model.index_scene(scene)
        emb = model._encode_lanes(idx, lambda x: x)
        # map canonical rows back to the caller's lane order
        back = np.argsort(idx.lane_order)
        return emb.data[back]

    def test_isolated_lane_matches_solo_scene(self):
        scene = micro_scene(seed=25, n_agents=1, n_lanes=3)
        model = HPNet(micro_config(), seed=18)
        rows_full = self._lane_rows(model, scene)
        solo = Scene(scene.history_frames, scene.future_frames, scene.agents,
                     [scene.lanes[1]], focal_agent=0)
        rows_solo = self._lane_rows(model, solo)
        # equal up to GEMM blocking (matrix shapes differ between the scenes)
        np.testing.assert_allclose(rows_full[1], rows_solo[0], atol=1e-12)

    def test_connected_lanes_interact(self):
        scene = micro_scene(seed=26, n_agents=1, n_lanes=2)
        model = HPNet(micro_config(), seed=19)
        before = self._lane_rows(model, scene)
        scene.lanes[0].successors = [scene.lanes[1].lane_id]
        scene.lanes[1].predecessors = [scene.lanes[0].lane_id]
        after = self._lane_rows(model, scene)
        assert not np.allclose(before, after)

    def test_lane_relabeling_permutes_rows(self):
        scene = micro_scene(seed=27, n_agents=1, n_lanes=3)
        model = HPNet(micro_config(), seed=20)
        rows = self._lane_rows(model, scene)
        perm = [2, 0, 1]
        relabeled = Scene(scene.history_frames, scene.future_frames, scene.agents,
                          [scene.lanes[p] for p in perm], focal_agent=0)
        rows_p = self._lane_rows(model, relabeled)
        np.testing.assert_array_equal(rows_p, rows[perm])


class TestTrace:
    def test_hpa_rows_sum_to_one(self):
        scene = micro_scene(seed=18, n_agents=2)
        model = HPNet(micro_config(), seed=12)
        out = model.forward(scene, trace=True)
        frames, weights = inspect_hpa_weights(out.trace, t=0, n=0, k=0)
        assert abs(weights.sum() - 1.0) < 1e-9
        assert frames.max() == 0 and frames.min() == -model.cfg.prediction_span

    def test_zero_span_attends_to_now_only(self):
        cfg = micro_config(prediction_span=0)
        scene = micro_scene(seed=19, n_agents=2)
        model = HPNet(cfg, seed=13)
        out = model.forward(scene, trace=True)
        frames, weights = inspect_hpa_weights(out.trace, t=-1, n=1, k=0)
        assert list(frames) == [-1]
        np.testing.assert_allclose(weights, [1.0], atol=1e-12)

    def test_trace_disabled_raises(self):
        scene = micro_scene(seed=20, n_agents=1)
        model = HPNet(micro_config(), seed=14)
        out = model.forward(scene)
        with pytest.raises(ValueError):
            inspect_hpa_weights(out.trace, 0, 0, 0)

    def test_temporal_window_single_key_when_span_zero(self):
        cfg = micro_config(history_span=0)
        scene = micro_scene(seed=21, n_agents=2)
        model = HPNet(cfg, seed=15)
        out = model.forward(scene, trace=True)
        probs = out.trace.records[(0, "temporal", 0)]
        live = probs[probs.sum(-1) > 0]
        assert np.allclose(live.max(axis=-1), 1.0)


class TestGradientFlow:
    def test_neighbor_sensitivity_respects_radius(self):
        cfg = micro_config(agent_radius=8.0)
        model = HPNet(cfg, seed=16)

        def grad_between(gap):
            scene = micro_scene(seed=22, n_agents=2)
            for a in scene.agents:
                a.xy = a.xy - a.xy[0]        # both start at origin
                a.heading[:] = 0.0
                a.vel[:] = (1.0, 0.0)
            scene.agents[1].xy = scene.agents[1].xy + np.array([gap, 0.0])
            idx = model.index_scene(scene)
            feats = Tensor(idx.agent_features[:, idx.agent_unorder],
                           requires_grad=True)
            with Tape() as tape:
                bundle = model.forward(idx, agent_features=feats)
                out = bundle.finals[:, 0]
                loss = T.tsum(T.mul(out, out))
            return tape.gradients(loss)[feats][:, 1]

        assert np.any(grad_between(4.0) != 0.0)
        assert np.all(grad_between(50.0) == 0.0)

    def test_full_model_gradient_check_micro(self, rng):
        from hpnet.autodiff import grad_check
        from hpnet.training import total_loss

        scene = micro_scene(seed=23, n_agents=2, T=4, F=3)
        model = HPNet(micro_config(), seed=17)
        idx = model.index_scene(scene)

        def f():
            return total_loss(model.forward(idx)).total_tensor

        leaves = list(model.parameters().values())
        err = grad_check(f, leaves, h=1e-5, samples=60, rng=rng)
        assert err < 1e-4
