"""Scene and corpus-manifest text files.

Scene schema (UTF-8 JSON, one document per scene):

    {
      "format": "hpnet-scene",
      "version": 1,
      "history_frames": T,
      "future_frames": F,
      "sample_rate_hz": 10.0,
      "focal_agent": 0,
      "agents": [
        {"id": int, "class": "vehicle|pedestrian|cyclist",
         "states": [{"frame": t, "x":, "y":, "heading":, "vx":, "vy":,
                     "valid": bool}, ...]}           # frames -T+1 .. F in order
      ],
      "lanes": [
        {"id": int, "class": "normal|connector|boundary",
         "centerline": [[x, y], ...],
         "predecessors": [ids], "successors": [ids], "adjacent": [ids]}
      ]
    }

Writing is canonical (sorted keys, fixed separators, shortest round-trip
float repr), so write -> read -> write reproduces the file byte for byte.

Corpus manifest schema:

    {"format": "hpnet-corpus", "version": 1, "generator_seed": int,
     "scenes": [{"path": str, "seed": int, "split": "train|val|stream"}]}
"""

from __future__ import annotations

import json
import os

import numpy as np

from hpnet.scene.types import AgentTrack, LaneSegment, Scene, SceneFormatError

SCENE_FORMAT = "hpnet-scene"
CORPUS_FORMAT = "hpnet-corpus"
VERSION = 1


def _dump(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def scene_to_text(scene):
    agents = []
    for a in scene.agents:
        states = []
        for i in range(scene.total_frames):
            states.append(
                {
                    "frame": i - scene.history_frames + 1,
                    "x": float(a.xy[i, 0]),
                    "y": float(a.xy[i, 1]),
                    "heading": float(a.heading[i]),
                    "vx": float(a.vel[i, 0]),
                    "vy": float(a.vel[i, 1]),
                    "valid": bool(a.valid[i]),
                }
            )
        agents.append({"id": a.track_id, "class": a.agent_class, "states": states})
    lanes = []
    for l in scene.lanes:
        lanes.append(
            {
                "id": l.lane_id,
                "class": l.lane_class,
                "centerline": [[float(x), float(y)] for x, y in l.centerline],
                "predecessors": sorted(l.predecessors),
                "successors": sorted(l.successors),
                "adjacent": sorted(l.adjacent),
            }
        )
    doc = {
        "format": SCENE_FORMAT,
        "version": VERSION,
        "history_frames": scene.history_frames,
        "future_frames": scene.future_frames,
        "sample_rate_hz": scene.sample_rate_hz,
        "focal_agent": scene.focal_agent,
        "agents": agents,
        "lanes": lanes,
    }
    return _dump(doc)


def scene_from_text(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"not valid JSON: {exc}") from None
    if doc.get("format") != SCENE_FORMAT:
        raise SceneFormatError(f"unexpected format field {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise SceneFormatError(f"unsupported scene version {doc.get('version')!r}")
    t, f = doc["history_frames"], doc["future_frames"]
    n = t + f
    agents = []
    for a in doc["agents"]:
        states = a["states"]
        if len(states) != n:
            raise SceneFormatError(
                f"agent {a['id']}: expected {n} states, found {len(states)}"
            )
        xy = np.array([[s["x"], s["y"]] for s in states])
        heading = np.array([s["heading"] for s in states])
        vel = np.array([[s["vx"], s["vy"]] for s in states])
        valid = np.array([s["valid"] for s in states], dtype=bool)
        frames = [s["frame"] for s in states]
        if frames != list(range(-t + 1, f + 1)):
            raise SceneFormatError(f"agent {a['id']}: frames out of order")
        agents.append(AgentTrack(a["id"], a["class"], xy, heading, vel, valid))
    lanes = [
        LaneSegment(
            l["id"],
            l["class"],
            np.array(l["centerline"], dtype=np.float64),
            list(l["predecessors"]),
            list(l["successors"]),
            list(l["adjacent"]),
        )
        for l in doc["lanes"]
    ]
    return Scene(
        t,
        f,
        agents,
        lanes,
        focal_agent=doc.get("focal_agent", 0),
        sample_rate_hz=doc.get("sample_rate_hz", 10.0),
    )


def save_scene(path, scene):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scene_to_text(scene))


def load_scene(path):
    with open(path, encoding="utf-8") as fh:
        return scene_from_text(fh.read())


def save_manifest(path, entries, generator_seed):
    doc = {
        "format": CORPUS_FORMAT,
        "version": VERSION,
        "generator_seed": int(generator_seed),
        "scenes": [
            {"path": e["path"], "seed": int(e["seed"]), "split": e["split"]}
            for e in entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(doc))


def load_manifest(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.loads(fh.read())
    if doc.get("format") != CORPUS_FORMAT or doc.get("version") != VERSION:
        raise SceneFormatError(f"{path}: not a corpus manifest")
    return doc


def manifest_scene_paths(manifest_path, split=None):
    doc = load_manifest(manifest_path)
    root = os.path.dirname(os.path.abspath(manifest_path))
    out = []
    for entry in doc["scenes"]:
        if split is None or entry["split"] == split:
            out.append(os.path.join(root, entry["path"]))
    return out
