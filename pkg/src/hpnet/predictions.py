"""Prediction file format (UTF-8 JSON, canonical key order):

    {
      "format": "hpnet-predictions",
      "version": 1,
      "scene": "<scene file path as given>",
      "frames": [0] or all history frames,
      "agents": [
        {"id": int,
         "steps": [{"frame": t,
                    "modes": [{"score": float,
                               "trajectory": [[x, y], ...]}  # F global points
                              ...]}]}
      ]
    }

Scores per step sum to 1 over modes.
"""

from __future__ import annotations

import json

import numpy as np

from hpnet.scene.types import SceneFormatError

FORMAT = "hpnet-predictions"
VERSION = 1


def predictions_to_text(scene_path, frames, agent_ids, trajs, probs, valid):
    """trajs [T',N,K,F,2] global, probs [T',N,K], valid [T',N]; T' = len(frames)."""
    agents = []
    for n, track_id in enumerate(agent_ids):
        steps = []
        for i, t in enumerate(frames):
            if not valid[i, n]:
                continue
            modes = [
                {"score": float(probs[i, n, k]),
                 "trajectory": [[float(x), float(y)] for x, y in trajs[i, n, k]]}
                for k in range(trajs.shape[2])
            ]
            steps.append({"frame": int(t), "modes": modes})
        agents.append({"id": int(track_id), "steps": steps})
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "scene": scene_path,
        "frames": [int(t) for t in frames],
        "agents": agents,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def load_predictions(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise SceneFormatError(f"{path}: not a prediction file")
    return doc


def frame_zero_arrays(doc):
    """Per-agent [K,F,2] trajectories and [K] scores at frame 0."""
    out = {}
    for agent in doc["agents"]:
        for step in agent["steps"]:
            if step["frame"] != 0:
                continue
            trajs = np.array([m["trajectory"] for m in step["modes"]], dtype=np.float64)
            scores = np.array([m["score"] for m in step["modes"]], dtype=np.float64)
            out[agent["id"]] = (trajs, scores)
    return out
