"""Command-line entry point.

    hpnet generate  --out DIR [--config PATH] [--seed N] [--set key=value ...]
    hpnet train     --corpus MANIFEST --out DIR [--ablate-hpa] [--resume CKPT] ...
    hpnet predict   --checkpoint CKPT --scene FILE --out FILE [--all-steps]
    hpnet evaluate  --predictions FILE [FILE ...] --out DIR [--objective marginal|joint]
    hpnet rollout   --checkpoint CKPT [--compare CKPT|cv] --corpus MANIFEST
                    --out DIR [--steps N]
    hpnet plot      curves --report CSV [CSV ...] --column NAME --out FILE.svg
    hpnet plot      scene --scene FILE [--predictions FILE] --out FILE.svg

Every command is deterministic given its configuration and seed, and
writes the effective run configuration into its output directory.
Relative input paths are resolved against $HPNET_DATA_ROOT when set.

Exit codes: 0 success; 2 usage; 3 I/O failure; 4 validation/format error;
5 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_NUMERIC = 5


def _data_path(path):
    root = os.environ.get("HPNET_DATA_ROOT")
    if root and not os.path.isabs(path):
        candidate = os.path.join(root, path)
        if os.path.exists(candidate) or not os.path.exists(path):
            return candidate
    return path


def _load_run_config(args):
    from hpnet.configio import build_run_config

    file_text = None
    if getattr(args, "config", None):
        with open(_data_path(args.config), encoding="utf-8") as fh:
            file_text = fh.read()
    overrides = list(getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return build_run_config(file_text, overrides)


def _echo_config(rc, out_dir):
    from hpnet.configio import run_config_text

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run_config.txt"), "w", encoding="utf-8") as fh:
        fh.write(run_config_text(rc))


def _echo_command(out_dir, command, settings):
    """Record what produced an output directory for config-less commands."""
    os.makedirs(out_dir, exist_ok=True)
    lines = ["# hpnet run config v1", f"command = {command}"]
    lines += [f"{k} = {v}" for k, v in sorted(settings.items())]
    with open(os.path.join(out_dir, "run_config.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _scene_spec(rc, seed, history_frames=None):
    from dataclasses import replace

    return replace(
        rc.scenario,
        seed=int(seed),
        history_frames=history_frames or rc.scenario.history_frames,
    )


# ---------------------------------------------------------------- generate
def cmd_generate(args):
    from hpnet.scene.sceneio import save_manifest, save_scene
    from hpnet.synth.generate import generate, scene_seeds

    rc = _load_run_config(args)
    out_dir = args.out
    _echo_config(rc, out_dir)
    os.makedirs(os.path.join(out_dir, "scenes"), exist_ok=True)
    counts = (
        ("train", rc.corpus.train_count, None),
        ("val", rc.corpus.val_count, None),
        ("stream", rc.corpus.stream_count,
         rc.scenario.history_frames + rc.corpus.stream_steps - 1),
    )
    total = sum(c for _, c, _ in counts)
    seeds = scene_seeds(rc.seed, total)
    entries = []
    i = 0
    for split, count, history in counts:
        for _ in range(count):
            spec = _scene_spec(rc, seeds[i], history_frames=history)
            scene = generate(spec)
            rel = os.path.join("scenes", f"{split}_{i:05d}.json")
            save_scene(os.path.join(out_dir, rel), scene)
            entries.append({"path": rel, "seed": int(seeds[i]), "split": split})
            i += 1
    manifest = os.path.join(out_dir, "manifest.json")
    save_manifest(manifest, entries, rc.seed)
    print(f"wrote {total} scenes and manifest to {out_dir}")
    return 0


# ------------------------------------------------------------------- train
def cmd_train(args):
    from hpnet.model import HPNet
    from hpnet.scene.sceneio import load_scene, manifest_scene_paths
    from hpnet.training import train

    rc = _load_run_config(args)
    if args.ablate_hpa:
        rc.model.use_hpa = False
    manifest = _data_path(args.corpus)
    train_scenes = [load_scene(p) for p in manifest_scene_paths(manifest, "train")]
    val_scenes = [load_scene(p) for p in manifest_scene_paths(manifest, "val")]
    _echo_config(rc, args.out)
    model = HPNet(rc.model, seed=rc.seed)
    train(model, train_scenes, rc.train, val_scenes=val_scenes, out_dir=args.out,
          resume_from=args.resume)
    print(f"trained {rc.train.epochs} epochs; checkpoint in {args.out}")
    return 0


def _load_model(checkpoint_path):
    from hpnet.autodiff import load_checkpoint
    from hpnet.configs import ModelConfig
    from hpnet.model import HPNet

    arrays, meta = load_checkpoint(_data_path(checkpoint_path))
    cfg = ModelConfig.from_dict(meta["model_config"])
    model = HPNet(cfg, seed=0)
    model.store.load_arrays(
        {k: v for k, v in arrays.items() if not k.startswith("opt.")}
    )
    return model


# ----------------------------------------------------------------- predict
def cmd_predict(args):
    from hpnet.predictions import predictions_to_text
    from hpnet.scene.sceneio import load_scene

    model = _load_model(args.checkpoint)
    scene = load_scene(_data_path(args.scene))
    idx = model.index_scene(scene)
    bundle = model.forward(idx)
    trajs = idx.to_global(bundle.finals.data)       # [T,N,K,F,2]
    probs = bundle.probs.data
    t_n = scene.history_frames
    if args.all_steps:
        frames = list(range(-t_n + 1, 1))
        sel = slice(None)
    else:
        frames = [0]
        sel = slice(t_n - 1, t_n)
    text = predictions_to_text(
        args.scene, frames, [a.track_id for a in scene.agents],
        trajs[sel], probs[sel], bundle.valid[sel],
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote predictions to {args.out}")
    return 0


# ---------------------------------------------------------------- evaluate
def cmd_evaluate(args):
    from hpnet.evaluation import metrics as M
    from hpnet.evaluation.report import EvalReport
    from hpnet.predictions import frame_zero_arrays, load_predictions
    from hpnet.scene.sceneio import load_scene

    if not args.predictions:
        raise ValueError("no prediction files given")
    rows = []
    ades, fdes, bfdes, j_ades, j_fdes = [], [], [], [], []
    for path in args.predictions:
        doc = load_predictions(_data_path(path))
        per_agent = frame_zero_arrays(doc)
        if not per_agent:
            continue
        scene = load_scene(_data_path(doc["scene"]))
        xy, _, _, valid = scene.stacked()
        t0 = scene.history_frames - 1
        ids = {a.track_id: i for i, a in enumerate(scene.agents)}
        joint_p, joint_g = [], []
        for track_id, (trajs, scores) in sorted(per_agent.items()):
            n = ids[track_id]
            if not valid[n, t0 + 1:].all():
                continue
            gt = xy[n, t0 + 1: t0 + 1 + scene.future_frames]
            ades.append(M.min_ade(trajs, gt))
            fde, _ = M.min_fde(trajs, gt)
            fdes.append(fde)
            bfdes.append(M.b_min_fde(trajs, scores, gt))
            joint_p.append(trajs)
            joint_g.append(gt)
        if joint_p:
            j_ades.append(M.min_joint_ade(np.array(joint_p), np.array(joint_g)))
            j_fdes.append(M.min_joint_fde(np.array(joint_p), np.array(joint_g)))
    if not ades:
        raise ValueError("prediction set is empty (no scored agents)")
    _echo_command(args.out, "evaluate",
                  {"objective": args.objective,
                   "predictions": " ".join(args.predictions)})
    agg = {
        "min_ade": float(np.mean(ades)),
        "min_fde": float(np.mean(fdes)),
        "miss_rate": M.miss_rate(fdes),
        "b_min_fde": float(np.mean(bfdes)),
        "min_joint_ade": float(np.mean(j_ades)),
        "min_joint_fde": float(np.mean(j_fdes)),
        "samples": len(ades),
    }
    report = EvalReport(rows=rows, aggregate=agg)
    os.makedirs(args.out, exist_ok=True)
    report.save(os.path.join(args.out, "eval_report"))
    for key in sorted(agg):
        print(f"{key} = {agg[key]}")
    return 0


# ----------------------------------------------------------------- rollout
def cmd_rollout(args):
    from hpnet.evaluation.report import EvalReport
    from hpnet.evaluation.rollout import cv_predictor, model_predictor, rollout_eval
    from hpnet.scene.sceneio import load_scene, manifest_scene_paths

    model = _load_model(args.checkpoint)
    cfg = model.cfg
    predictors = [("model", model_predictor(model))]
    if args.compare == "cv":
        predictors.append(("cv", cv_predictor()))
    elif args.compare:
        predictors.append(("compare", model_predictor(_load_model(args.compare))))
    streams = [
        load_scene(p)
        for p in manifest_scene_paths(_data_path(args.corpus), "stream")
    ]
    if not streams:
        raise ValueError("corpus has no stream scenes")
    _echo_command(args.out, "rollout",
                  {"checkpoint": args.checkpoint, "compare": args.compare or "",
                   "corpus": args.corpus, "steps": args.steps})

    merged = {}
    for label, predict in predictors:
        acc, stab = [], []
        for scene in streams:
            res = rollout_eval(predict, scene, cfg.history_frames,
                               cfg.future_frames, steps=args.steps)
            acc.append(res["accuracy"])
            stab.append(res["stability"])
        rows = []
        for i in range(args.steps):
            row = {"step": i}
            for key in ("min_ade", "min_fde", "miss_rate", "b_min_fde",
                        "min_joint_ade", "min_joint_fde"):
                vals = [a[i][key] for a in acc if key in a[i]]
                if vals:
                    row[key] = float(np.mean(vals))
            if i > 0:
                vals = [s[i - 1]["stability"] for s in stab
                        if len(s) >= i and np.isfinite(s[i - 1]["stability"])]
                if vals:
                    row["stability"] = float(np.mean(vals))
            rows.append(row)
        report = EvalReport.from_rollout(
            {"accuracy": rows,
             "stability": [{"step": r["step"], "stability": r["stability"]}
                           for r in rows if "stability" in r]}
        )
        report.rows = rows
        report.save(os.path.join(args.out, f"rollout_{label}"))
        merged[label] = rows
        print(f"{label}: mean stability "
              f"{report.aggregate.get('stability', float('nan')):.4f} "
              f"mean b_min_fde {report.aggregate.get('b_min_fde', float('nan')):.4f}")

    with open(os.path.join(args.out, "rollout_compare.csv"), "w",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        keys = ("min_ade", "min_fde", "miss_rate", "b_min_fde", "stability")
        header = ["step"]
        for label in merged:
            header.extend(f"{label}_{k}" for k in keys)
        writer.writerow(header)
        for i in range(args.steps):
            row = [i]
            for label in merged:
                row.extend(merged[label][i].get(k, "") for k in keys)
            writer.writerow(row)
    return 0


# -------------------------------------------------------------------- plot
def cmd_plot(args):
    from hpnet.plotting import line_chart, scene_overlay

    if args.kind == "curves":
        series = []
        for path in args.report:
            with open(_data_path(path), encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
            xs, ys = [], []
            for row in rows:
                cell = row.get(args.column, "")
                if cell:
                    xs.append(float(row["step"]))
                    ys.append(float(cell))
            if not xs:
                raise ValueError(f"{path}: column {args.column!r} is empty")
            series.append((os.path.basename(path), xs, ys))
        svg = line_chart(series, title=args.column, ylabel=args.column)
    else:
        from hpnet.predictions import frame_zero_arrays, load_predictions
        from hpnet.scene.sceneio import load_scene

        scene = load_scene(_data_path(args.scene))
        predictions = None
        if args.predictions:
            doc = load_predictions(_data_path(args.predictions))
            ids = {a.track_id: i for i, a in enumerate(scene.agents)}
            predictions = {
                ids[tid]: trajs
                for tid, (trajs, _) in frame_zero_arrays(doc).items()
            }
            if args.focal_only:
                predictions = {
                    n: t for n, t in predictions.items() if n == scene.focal_agent
                }
        svg = scene_overlay(scene, predictions)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return 0


# ----------------------------------------------------------------- parsing
def build_parser():
    parser = argparse.ArgumentParser(
        prog="hpnet",
        description="synthetic-scene trajectory forecasting workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override (repeatable)")

    p = sub.add_parser("generate", help="write a scene corpus + manifest")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train a model on a corpus")
    common(p)
    p.add_argument("--corpus", required=True, help="manifest.json path")
    p.add_argument("--out", required=True)
    p.add_argument("--ablate-hpa", action="store_true",
                   help="train the historical-prediction-attention-free twin")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="forecast one scene")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--all-steps", action="store_true",
                   help="emit forecasts for every history frame")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="score prediction files against ground truth")
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--objective", choices=("marginal", "joint"), default="marginal")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("rollout", help="streaming accuracy + stability evaluation")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--compare", help="second checkpoint path, or 'cv'")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=10)
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("plot", help="emit SVG charts and scene overlays")
    psub = p.add_subparsers(dest="kind", required=True)
    pc = psub.add_parser("curves")
    pc.add_argument("--report", nargs="+", required=True, help="rollout CSV file(s)")
    pc.add_argument("--column", default="stability")
    pc.add_argument("--out", required=True)
    pc.set_defaults(fn=cmd_plot, kind="curves")
    ps = psub.add_parser("scene")
    ps.add_argument("--scene", required=True)
    ps.add_argument("--predictions")
    ps.add_argument("--focal-only", action="store_true")
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=cmd_plot, kind="scene")

    return parser


def main(argv=None):
    from hpnet.autodiff.checkpoint import CheckpointError
    from hpnet.autodiff.tensor import MaskingError, ShapeError
    from hpnet.configs import ConfigError
    from hpnet.scene.types import SceneError
    from hpnet.training.losses import EmptyBatchError
    from hpnet.training.optim import TrainingError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (TrainingError, MaskingError, FloatingPointError) as exc:
        print(f"hpnet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, SceneError, CheckpointError, EmptyBatchError,
            ShapeError, ValueError) as exc:
        print(f"hpnet: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"hpnet: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
