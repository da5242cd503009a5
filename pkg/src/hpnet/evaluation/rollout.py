"""Streaming evaluation: slide the observation window forward one frame at
a time, forecast at each step, and measure per-step accuracy plus
consistency between consecutive forecasts."""

from __future__ import annotations

import numpy as np

from hpnet.evaluation import metrics as M
from hpnet.evaluation.stability import stability_summed_ade
from hpnet.scene.types import SceneError
from hpnet.synth.baseline import constant_velocity_rollout


def model_predictor(model):
    """Adapter: trained network -> (trajs [N,K,F,2] global, probs [N,K], valid [N])."""

    def predict(scene):
        idx = model.index_scene(scene)
        bundle = model.forward(idx)
        finals = idx.to_global(bundle.finals.data)[-1]     # frame t=0: [N,K,F,2]
        probs = bundle.probs.data[-1]
        return finals, probs, bundle.valid[-1]

    return predict


def cv_predictor():
    """Single-mode constant-velocity predictor with certain confidence."""

    def predict(scene):
        n = scene.num_agents
        t0 = scene.history_frames - 1
        trajs = np.zeros((n, 1, scene.future_frames, 2))
        valid = np.zeros(n, dtype=bool)
        for i, track in enumerate(scene.agents):
            if track.valid[t0]:
                trajs[i, 0] = constant_velocity_rollout(scene, t=0, agent=i)
                valid[i] = True
        return trajs, np.ones((n, 1)), valid

    return predict


def rollout_eval(predict, scene, history_frames, future_frames, steps=10):
    """Per-step accuracy and step-to-step stability over a scene stream.

    The scene must carry ``history_frames + steps - 1`` observed frames and
    ``future_frames`` labeled future frames. Returns a dict of per-step
    arrays; stability entries pair step i with step i-1 (so there are
    steps-1 of them), summed over matched mode pairs per agent.
    """
    needed = history_frames + steps - 1
    if scene.history_frames < needed:
        raise SceneError(
            f"stream has {scene.history_frames} observed frames, "
            f"need {needed} for {steps} steps"
        )
    if steps < 1:
        raise ValueError("steps must be >= 1")
    xy, _, _, valid_all = scene.stacked()
    base = scene.history_frames - needed
    n = scene.num_agents

    prev = None
    records = []
    stab_records = []
    for i in range(steps):
        window = scene.window(base + i, history_frames, future_frames)
        trajs, probs, valid = predict(window)
        t0 = base + i + history_frames - 1
        gt_ok = valid & valid_all[:, t0 + 1: t0 + 1 + future_frames].all(axis=1)
        row = {"step": i, "agents": int(gt_ok.sum())}
        ades, fdes, bfdes = [], [], []
        joint_pred, joint_gt = [], []
        for a in range(n):
            if not gt_ok[a]:
                continue
            gt = xy[a, t0 + 1: t0 + 1 + future_frames]
            ades.append(M.min_ade(trajs[a], gt))
            fde, _ = M.min_fde(trajs[a], gt)
            fdes.append(fde)
            bfdes.append(M.b_min_fde(trajs[a], probs[a], gt))
            joint_pred.append(trajs[a])
            joint_gt.append(gt)
        if ades:
            row.update(
                min_ade=float(np.mean(ades)),
                min_fde=float(np.mean(fdes)),
                miss_rate=M.miss_rate(fdes),
                b_min_fde=float(np.mean(bfdes)),
                min_joint_ade=M.min_joint_ade(np.array(joint_pred), np.array(joint_gt)),
                min_joint_fde=M.min_joint_fde(np.array(joint_pred), np.array(joint_gt)),
            )
        records.append(row)
        if prev is not None:
            prev_trajs, prev_ok = prev
            both = prev_ok & gt_ok
            vals = [
                stability_summed_ade(prev_trajs[a], trajs[a])
                for a in range(n) if both[a]
            ]
            stab_records.append(
                {"step": i, "agents": int(both.sum()),
                 "stability": float(np.mean(vals)) if vals else float("nan")}
            )
        prev = (trajs, gt_ok)
    return {"accuracy": records, "stability": stab_records}
