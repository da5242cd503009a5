"""Mini-batch training orchestration: shuffling, per-sample augmentation,
gradient accumulation, cosine-annealed optimizer steps, per-epoch
validation, append-only metrics log and resumable checkpoints.

Everything is seeded from TrainConfig.seed; two runs with the same inputs
produce identical logs and checkpoints.
"""

from __future__ import annotations

import math
import os

import numpy as np

from hpnet.autodiff import Tape, load_checkpoint, save_checkpoint
from hpnet.synth.augment import augment
from hpnet.synth.baseline import constant_velocity_rollout
from hpnet.training.losses import total_loss
from hpnet.training.optim import AdamW, CosineSchedule


def _write_model_card(path, model_cfg, train_cfg, extra=None):
    lines = ["hpnet model card v1", ""]
    for section, cfg in (("model", model_cfg.to_dict()), ("train", train_cfg.to_dict())):
        for key, value in sorted(cfg.items()):
            if isinstance(value, dict):
                for k2, v2 in sorted(value.items()):
                    lines.append(f"{section}.{key}.{k2} = {v2}")
            else:
                lines.append(f"{section}.{key} = {value}")
    for key, value in sorted((extra or {}).items()):
        lines.append(f"{key} = {value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def validation_metrics(model, scenes, objective, huber_delta):
    """Mean loss plus minADE/minFDE of the frame-0 forecast against the
    constant-velocity baseline over the validation scenes."""
    from hpnet.evaluation.metrics import min_ade

    losses, ades, cv_ades = [], [], []
    for scene in scenes:
        idx = model.index_scene(scene)
        bundle = model.forward(idx)
        losses.append(total_loss(bundle, objective, huber_delta).total)
        finals = bundle.index.to_global(bundle.finals.data)
        xy, _, _, valid = scene.stacked()
        t0 = scene.history_frames - 1
        for n in range(scene.num_agents):
            if not (valid[n, t0] and valid[n, t0 + 1:].all()):
                continue
            gt = xy[n, t0 + 1: t0 + 1 + scene.future_frames]
            ades.append(min_ade(finals[-1, n], gt))
            cv = constant_velocity_rollout(scene, t=0, agent=n)
            cv_ades.append(min_ade(cv[None], gt))
    return {
        "val_loss": float(np.mean(losses)),
        "val_min_ade": float(np.mean(ades)),
        "val_cv_min_ade": float(np.mean(cv_ades)),
    }


def train(model, train_scenes, train_cfg, val_scenes=(), out_dir=None,
          resume_from=None, log_lines=None):
    """Optimize ``model`` in place; returns the metrics-log lines.

    When ``out_dir`` is set, writes checkpoint.hpnc, model_card.txt and
    metrics.log there (checkpoint refreshed every epoch, log appended).
    """
    cfg = train_cfg.validate()
    if not train_scenes:
        raise ValueError("training corpus is empty")
    model_cfg = model.cfg
    params = model.parameters()
    opt = AdamW(params, weight_decay=cfg.weight_decay)
    steps_per_epoch = math.ceil(len(train_scenes) / cfg.batch_size)
    schedule = CosineSchedule(cfg.learning_rate, max(cfg.epochs * steps_per_epoch, 1))

    start_epoch = 0
    lines = [] if log_lines is None else log_lines
    if resume_from is not None:
        arrays, meta = load_checkpoint(resume_from)
        model_params = {k: v for k, v in arrays.items() if not k.startswith("opt.")}
        model.store.load_arrays(model_params)
        opt.load_state_arrays(arrays, meta["opt_step"])
        start_epoch = int(meta["epoch"]) + 1

    log_path = os.path.join(out_dir, "metrics.log") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_model_card(
            os.path.join(out_dir, "model_card.txt"), model_cfg, cfg,
            extra={"corpus.train_scenes": len(train_scenes),
                   "corpus.val_scenes": len(val_scenes)},
        )

    def emit(line):
        lines.append(line)
        if log_path:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def save(epoch):
        if not out_dir:
            return
        arrays = dict(model.store.arrays())
        arrays.update(opt.state_arrays())
        save_checkpoint(
            os.path.join(out_dir, "checkpoint.hpnc"), arrays,
            meta={
                "epoch": epoch,
                "opt_step": opt.step_count,
                "model_config": model_cfg.to_dict(),
                "train_config": cfg.to_dict(),
            },
        )

    if cfg.epochs == 0 or start_epoch >= cfg.epochs:
        save(start_epoch - 1)
        return lines

    master = np.random.SeedSequence(cfg.seed)
    shuffle_rng = np.random.default_rng(master.spawn(1)[0])
    dropout_rng = np.random.default_rng(master.spawn(2)[1])
    aug_seeds = np.random.SeedSequence(cfg.seed ^ 0x5EED).generate_state(
        max(cfg.epochs, 1) * len(train_scenes), dtype=np.uint64
    )

    step = start_epoch * steps_per_epoch
    for epoch in range(start_epoch, cfg.epochs):
        order = shuffle_rng.permutation(len(train_scenes))
        for b0 in range(0, len(order), cfg.batch_size):
            batch = order[b0: b0 + cfg.batch_size]
            grads = {}
            stats = np.zeros(4)
            for j in batch:
                scene = train_scenes[int(j)]
                scene = augment(scene, cfg.augmentation,
                                int(aug_seeds[epoch * len(train_scenes) + int(j)]))
                idx = model.index_scene(scene)
                with Tape() as tape:
                    bundle = model.forward(idx, train_mode=True, rng=dropout_rng)
                    breakdown = total_loss(bundle, cfg.objective, cfg.huber_delta)
                gmap = tape.gradients(breakdown.total_tensor)
                for name, p in params.items():
                    g = gmap.get(p)
                    if g is None:
                        continue
                    if name in grads:
                        grads[name] += g
                    else:
                        grads[name] = g.copy()
                stats += (breakdown.reg1, breakdown.reg2, breakdown.cls,
                          breakdown.total)
            scale = 1.0 / len(batch)
            for name in grads:
                grads[name] *= scale
            lr = schedule.lr(step)
            opt.step(grads, lr)
            step += 1
            stats *= scale
            emit(
                f"step {step} lr {lr:.6e} reg1 {stats[0]:.6f} reg2 {stats[1]:.6f} "
                f"cls {stats[2]:.6f} total {stats[3]:.6f}"
            )
        if val_scenes:
            metrics = validation_metrics(model, val_scenes, cfg.objective,
                                         cfg.huber_delta)
            emit(
                f"epoch {epoch} val_loss {metrics['val_loss']:.6f} "
                f"val_min_ade {metrics['val_min_ade']:.6f} "
                f"val_cv_min_ade {metrics['val_cv_min_ade']:.6f}"
            )
        else:
            emit(f"epoch {epoch} done")
        save(epoch)
    return lines
