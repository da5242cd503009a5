"""Constant-velocity extrapolation, the reference predictor every trained
model is measured against."""

from __future__ import annotations

import numpy as np

from hpnet.scene.types import FRAME_DT, ValidityError


def constant_velocity_rollout(scene, t=0, agent=None):
    """Extrapolate the agent's frame-t velocity for F future steps (global frame)."""
    n = scene.focal_agent if agent is None else agent
    track = scene.agents[n]
    idx = scene.frame_index(t)
    if not track.valid[idx]:
        raise ValidityError(f"agent {track.track_id} is not observed at frame {t}")
    steps = np.arange(1, scene.future_frames + 1)[:, None] * FRAME_DT
    return track.xy[idx] + steps * track.vel[idx]
