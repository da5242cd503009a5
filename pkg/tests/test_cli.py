"""End-to-end command-line behavior on small corpora."""

import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hpnet.cli import main
from hpnet.plotting import PRED_COLOR
from hpnet.predictions import frame_zero_arrays, load_predictions
from hpnet.scene.sceneio import load_manifest, load_scene, manifest_scene_paths
from hpnet.synth.baseline import constant_velocity_rollout
from hpnet.predictions import predictions_to_text


TOY = [
    "--set", "profile=toy",
    "--set", "corpus.train_count=4",
    "--set", "corpus.val_count=2",
    "--set", "corpus.stream_count=2",
]


def make_corpus(tmp_path, name="corpus", seed=7, extra=()):
    out = str(tmp_path / name)
    rc = main(["generate", "--out", out, "--seed", str(seed), *TOY, *extra])
    assert rc == 0
    return out


def quick_train(tmp_path, corpus, name="run", epochs=1, extra=()):
    out = str(tmp_path / name)
    rc = main([
        "train", "--corpus", os.path.join(corpus, "manifest.json"),
        "--out", out, "--seed", "3", *TOY,
        "--set", f"train.epochs={epochs}",
        "--set", "train.batch_size=2",
        *extra,
    ])
    assert rc == 0
    return out


class TestGenerate:
    def test_single_scene_corpus(self, tmp_path):
        out = str(tmp_path / "one")
        rc = main(["generate", "--out", out, "--seed", "1",
                   "--set", "corpus.train_count=1", "--set", "corpus.val_count=0",
                   "--set", "corpus.stream_count=0"])
        assert rc == 0
        manifest = load_manifest(os.path.join(out, "manifest.json"))
        assert len(manifest["scenes"]) == 1
        scene_path = manifest_scene_paths(os.path.join(out, "manifest.json"))[0]
        load_scene(scene_path)  # re-parses cleanly

    def test_same_seed_byte_identical_corpus(self, tmp_path):
        a = make_corpus(tmp_path, "a", seed=9)
        b = make_corpus(tmp_path, "b", seed=9)
        for rel in sorted(os.listdir(os.path.join(a, "scenes"))):
            pa = open(os.path.join(a, "scenes", rel), "rb").read()
            pb = open(os.path.join(b, "scenes", rel), "rb").read()
            assert pa == pb
        assert (open(os.path.join(a, "manifest.json"), "rb").read()
                == open(os.path.join(b, "manifest.json"), "rb").read())

    def test_run_config_echoed(self, tmp_path):
        out = make_corpus(tmp_path)
        text = open(os.path.join(out, "run_config.txt")).read()
        assert "seed = 7" in text and "profile = toy" in text

    def test_all_scenes_reparse(self, tmp_path):
        out = make_corpus(tmp_path)
        for p in manifest_scene_paths(os.path.join(out, "manifest.json")):
            load_scene(p)


class TestTrain:
    def test_loss_decreases_on_smoke_run(self, tmp_path):
        corpus = make_corpus(tmp_path)
        run = quick_train(tmp_path, corpus, epochs=6)
        lines = open(os.path.join(run, "metrics.log")).read().splitlines()
        steps = [l for l in lines if l.startswith("step ")]
        first = float(steps[0].split("total ")[1])
        last = float(steps[-1].split("total ")[1])
        assert last < first
        assert os.path.exists(os.path.join(run, "checkpoint.hpnc"))
        assert os.path.exists(os.path.join(run, "model_card.txt"))

    def test_resume_continues_epochs(self, tmp_path):
        corpus = make_corpus(tmp_path)
        run = quick_train(tmp_path, corpus, "resumable", epochs=1)
        rc = main([
            "train", "--corpus", os.path.join(corpus, "manifest.json"),
            "--out", str(tmp_path / "resumed"), "--seed", "3", *TOY,
            "--set", "train.epochs=2", "--set", "train.batch_size=2",
            "--resume", os.path.join(run, "checkpoint.hpnc"),
        ])
        assert rc == 0
        log = open(tmp_path / "resumed" / "metrics.log").read()
        assert "epoch 1 " in log and "epoch 0 " not in log

    def test_ablate_flag_recorded(self, tmp_path):
        corpus = make_corpus(tmp_path)
        run = quick_train(tmp_path, corpus, "ablated", epochs=1,
                          extra=("--ablate-hpa",))
        card = open(os.path.join(run, "model_card.txt")).read()
        assert "model.use_hpa = False" in card


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_shared")
    corpus = make_corpus(tmp)
    run = quick_train(tmp, corpus, epochs=1)
    return tmp, corpus, run


class TestPredict:
    def test_scores_sum_to_one_per_agent(self, trained):
        tmp, corpus, run = trained
        scene_path = manifest_scene_paths(
            os.path.join(corpus, "manifest.json"), "val")[0]
        out = str(tmp / "pred.json")
        rc = main(["predict", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                   "--scene", scene_path, "--out", out])
        assert rc == 0
        doc = load_predictions(out)
        for tid, (trajs, scores) in frame_zero_arrays(doc).items():
            assert trajs.shape[0] == 6 and trajs.shape[2] == 2
            assert abs(scores.sum() - 1.0) < 1e-9

    def test_all_steps_emits_every_frame(self, trained):
        tmp, corpus, run = trained
        scene_path = manifest_scene_paths(
            os.path.join(corpus, "manifest.json"), "val")[0]
        out = str(tmp / "pred_all.json")
        rc = main(["predict", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                   "--scene", scene_path, "--out", out, "--all-steps"])
        assert rc == 0
        doc = load_predictions(out)
        scene = load_scene(scene_path)
        assert doc["frames"] == list(range(-scene.history_frames + 1, 1))
        for agent in doc["agents"]:
            assert len(agent["steps"]) == scene.history_frames
            for step in agent["steps"]:
                assert len(step["modes"]) == 6

    def test_rerun_is_byte_identical(self, trained):
        tmp, corpus, run = trained
        scene_path = manifest_scene_paths(
            os.path.join(corpus, "manifest.json"), "val")[0]
        a, b = str(tmp / "p1.json"), str(tmp / "p2.json")
        for out in (a, b):
            main(["predict", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                  "--scene", scene_path, "--out", out])
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_mismatched_scene_shape_fails(self, trained, tmp_path):
        tmp, corpus, run = trained
        bad_corpus = make_corpus(tmp_path, "bad", extra=(
            "--set", "model.history_frames=10", "--set", "model.future_frames=5"))
        scene_path = manifest_scene_paths(
            os.path.join(bad_corpus, "manifest.json"), "val")[0]
        rc = main(["predict", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                   "--scene", scene_path, "--out", str(tmp_path / "x.json")])
        assert rc == 4


def write_cv_predictions(corpus, split, out_dir):
    """Constant-velocity single-mode prediction files for a corpus split."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, scene_path in enumerate(
            manifest_scene_paths(os.path.join(corpus, "manifest.json"), split)):
        scene = load_scene(scene_path)
        n = scene.num_agents
        trajs = np.zeros((1, n, 1, scene.future_frames, 2))
        probs = np.ones((1, n, 1))
        valid = np.ones((1, n), dtype=bool)
        for a in range(n):
            trajs[0, a, 0] = constant_velocity_rollout(scene, t=0, agent=a)
        text = predictions_to_text(scene_path, [0],
                                   [a.track_id for a in scene.agents],
                                   trajs, probs, valid)
        path = os.path.join(out_dir, f"cv_{i}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(path)
    return paths


class TestEvaluate:
    def test_cv_on_clean_keep_lane_corpus_scores_zero(self, tmp_path):
        corpus = make_corpus(tmp_path, "clean", extra=(
            "--set", "scenario.layout=straight",
            "--set", "scenario.mix.keep_lane=1",
            "--set", "scenario.mix.stop_and_go=0",
            "--set", "scenario.mix.turn_left=0",
            "--set", "scenario.mix.turn_right=0",
            "--set", "scenario.mix.sudden_turn=0",
            "--set", "scenario.position_noise=0",
            "--set", "scenario.heading_noise=0",
        ))
        preds = write_cv_predictions(corpus, "val", str(tmp_path / "cv_preds"))
        out = str(tmp_path / "eval")
        rc = main(["evaluate", "--predictions", *preds, "--out", out])
        assert rc == 0
        text = open(os.path.join(out, "eval_report.txt")).read()
        ade = float([l for l in text.splitlines()
                     if l.startswith("aggregate.min_ade")][0].split("=")[1])
        assert ade < 1e-6

    def test_joint_equals_marginal_single_agent(self, tmp_path):
        corpus = make_corpus(tmp_path, "solo", extra=(
            "--set", "scenario.min_agents=1", "--set", "scenario.max_agents=1"))
        preds = write_cv_predictions(corpus, "val", str(tmp_path / "solo_preds"))
        out = str(tmp_path / "eval_solo")
        rc = main(["evaluate", "--predictions", *preds, "--out", out])
        assert rc == 0
        text = open(os.path.join(out, "eval_report.txt")).read()
        vals = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=")
                vals[k.strip()] = v.strip()
        assert vals["aggregate.min_ade"] == vals["aggregate.min_joint_ade"]

    def test_empty_prediction_set_is_validation_error(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text(json.dumps({
            "format": "hpnet-predictions", "version": 1, "scene": "missing.json",
            "frames": [0], "agents": [],
        }))
        rc = main(["evaluate", "--predictions", str(empty),
                   "--out", str(tmp_path / "ev")])
        assert rc == 4


class TestRollout:
    def test_row_counts_and_compare_columns(self, trained):
        tmp, corpus, run = trained
        out = str(tmp / "roll")
        rc = main(["rollout", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                   "--compare", "cv",
                   "--corpus", os.path.join(corpus, "manifest.json"),
                   "--out", out, "--steps", "10"])
        assert rc == 0
        rows = open(os.path.join(out, "rollout_compare.csv")).read().splitlines()
        assert len(rows) == 11              # header + 10 steps
        header = rows[0].split(",")
        assert "model_stability" in header and "cv_stability" in header
        first = rows[1].split(",")
        assert first[header.index("model_stability")] == ""   # no pair yet
        assert rows[2].split(",")[header.index("model_stability")] != ""

    def test_cv_stability_zero_on_straight_streams(self, tmp_path):
        corpus = make_corpus(tmp_path, "cvroll", extra=(
            "--set", "scenario.layout=straight",
            "--set", "scenario.mix.keep_lane=1",
            "--set", "scenario.mix.stop_and_go=0",
            "--set", "scenario.position_noise=0",
            "--set", "scenario.heading_noise=0",
        ))
        run = quick_train(tmp_path, corpus, "cvrun", epochs=1)
        out = str(tmp_path / "cvout")
        rc = main(["rollout", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
                   "--compare", "cv",
                   "--corpus", os.path.join(corpus, "manifest.json"),
                   "--out", out, "--steps", "5"])
        assert rc == 0
        rows = open(os.path.join(out, "rollout_compare.csv")).read().splitlines()
        header = rows[0].split(",")
        col = header.index("cv_stability")
        for row in rows[2:]:
            assert abs(float(row.split(",")[col])) < 1e-9


class TestPlot:
    def test_curves_svg_well_formed(self, trained):
        tmp, corpus, run = trained
        roll = str(tmp / "roll_for_plot")
        main(["rollout", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
              "--corpus", os.path.join(corpus, "manifest.json"),
              "--out", roll, "--steps", "3"])
        out = str(tmp / "curves.svg")
        rc = main(["plot", "curves", "--report",
                   os.path.join(roll, "rollout_model.csv"),
                   "--column", "min_ade", "--out", out])
        assert rc == 0
        ET.parse(out)

    def test_scene_overlay_has_k_blue_polylines(self, trained):
        tmp, corpus, run = trained
        scene_path = manifest_scene_paths(
            os.path.join(corpus, "manifest.json"), "val")[0]
        pred = str(tmp / "overlay_pred.json")
        main(["predict", "--checkpoint", os.path.join(run, "checkpoint.hpnc"),
              "--scene", scene_path, "--out", pred])
        out = str(tmp / "scene.svg")
        rc = main(["plot", "scene", "--scene", scene_path, "--predictions", pred,
                   "--focal-only", "--out", out])
        assert rc == 0
        tree = ET.parse(out)
        ns = "{http://www.w3.org/2000/svg}"
        blues = [e for e in tree.iter(f"{ns}polyline")
                 if e.get("stroke") == PRED_COLOR]
        assert len(blues) == 6

    def test_missing_input_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["plot", "curves", "--out", "x.svg"])
        assert exc.value.code == 2

    def test_unreadable_report_is_io_error(self, tmp_path):
        rc = main(["plot", "curves", "--report", str(tmp_path / "nope.csv"),
                   "--column", "stability", "--out", str(tmp_path / "o.svg")])
        assert rc == 3


class TestDataRoot:
    def test_relative_paths_resolve_against_env(self, tmp_path, monkeypatch):
        corpus = make_corpus(tmp_path, "rooted")
        monkeypatch.setenv("HPNET_DATA_ROOT", str(tmp_path))
        run = str(tmp_path / "rooted_run")
        rc = main(["train", "--corpus", "rooted/manifest.json", "--out", run,
                   "--seed", "3", *TOY, "--set", "train.epochs=0"])
        assert rc == 0
