"""Procedural labeled driving scenes.

Agents follow lane-graph routes under a unicycle motion model with
maneuver-specific speed profiles; the future continuation is the ground
truth. A scenario seed fully determines the scene, byte for byte.

Maneuvers:
    keep_lane    constant speed along a straight/curved route
    stop_and_go  decelerate to rest, dwell, accelerate back
    turn_left    junction left turn (heading change about +pi/2)
    turn_right   junction right turn (about -pi/2)
    sudden_turn  straight through all history frames, then a quarter turn
                 completed within ~5 frames right after t=0

Turn maneuvers need a junction layout; on straight/curve layouts the mix
falls back to the supported subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hpnet.scene.geometry import wrap_angle
from hpnet.scene.types import FRAME_DT, AgentTrack, Scene, SceneError
from hpnet.synth.maps import BUILDERS, LAYOUTS, RoutePath, chain, arc_polyline, straight_polyline

MAX_ACCEL = 3.0  # m/s^2 cap respected by every speed profile
NOISE_CLIP_SIGMAS = 3.0

DEFAULT_MANEUVER_MIX = {
    "keep_lane": 0.35,
    "stop_and_go": 0.20,
    "turn_left": 0.15,
    "turn_right": 0.15,
    "sudden_turn": 0.15,
}

_LAYOUT_SUPPORT = {
    "straight": ("keep_lane", "stop_and_go"),
    "curve": ("keep_lane", "stop_and_go"),
    "t_intersection": ("keep_lane", "stop_and_go", "turn_left", "turn_right", "sudden_turn"),
    "fourway": ("keep_lane", "stop_and_go", "turn_left", "turn_right", "sudden_turn"),
}


@dataclass
class ScenarioSpec:
    layout: str = "mixed"                    # straight|curve|t_intersection|fourway|mixed
    min_agents: int = 2
    max_agents: int = 6
    maneuver_mix: dict = field(default_factory=lambda: dict(DEFAULT_MANEUVER_MIX))
    position_noise: float = 0.05             # std (meters), history frames only
    heading_noise: float = 0.01              # std (radians), history frames only
    history_frames: int = 20
    future_frames: int = 30
    seed: int = 0

    def validate(self):
        if self.layout != "mixed" and self.layout not in LAYOUTS:
            raise SceneError(f"unknown layout {self.layout!r}")
        if not (1 <= self.min_agents <= self.max_agents):
            raise SceneError("agent count range must satisfy 1 <= min <= max")
        if self.history_frames < 1 or self.future_frames < 1:
            raise SceneError("need at least one history and one future frame")
        if not self.maneuver_mix or any(w < 0 for w in self.maneuver_mix.values()):
            raise SceneError("maneuver mix must be nonnegative and nonempty")
        bad = set(self.maneuver_mix) - set(DEFAULT_MANEUVER_MIX)
        if bad:
            raise SceneError(f"unknown maneuvers in mix: {sorted(bad)}")
        if self.position_noise < 0 or self.heading_noise < 0:
            raise SceneError("noise stds must be nonnegative")


def _speed_profile(maneuver, base_speed, total_frames, rng):
    """Per-frame speeds honoring the MAX_ACCEL cap."""
    speeds = np.full(total_frames, base_speed)
    if maneuver != "stop_and_go":
        return speeds
    dv = MAX_ACCEL * FRAME_DT * 0.9
    ramp = int(np.ceil(base_speed / dv))
    dwell = int(rng.integers(5, 16))
    start = int(rng.integers(4, max(total_frames - (2 * ramp + dwell) - 2, 5)))
    k = start
    v = base_speed
    while v > 0 and k < total_frames:
        v = max(v - dv, 0.0)
        speeds[k] = v
        k += 1
    k_end = min(k + dwell, total_frames)
    speeds[k:k_end] = 0.0
    v = 0.0
    for k in range(k_end, total_frames):
        v = min(v + dv, base_speed)
        speeds[k] = v
    return speeds


def _sudden_route(route, s_turn, speed, rng):
    """Graft a tight quarter turn onto a straight route at arc length s_turn."""
    xy, heading = route.sample(np.array([s_turn]))
    start = xy[0]
    h = float(heading[0])
    radius = max(speed * 5.0 * FRAME_DT / (np.pi / 2), 0.8)
    side = -1.0 if rng.random() < 0.5 else 1.0
    pre = route.sample(np.linspace(0.0, s_turn, max(int(s_turn), 2)))[0]
    arc = arc_polyline(start, h, radius, side * np.pi / 2)
    exit_heading = wrap_angle(h + side * np.pi / 2)
    tail = straight_polyline(arc[-1], exit_heading, 70.0)
    pts = chain(pre, arc, tail)
    return RoutePath(pts, kind="sudden", corner=(s_turn, s_turn + np.pi / 2 * radius))


def _place_on_route(route, maneuver, T, F, rng):
    """Start arc length and speed so the route covers all frames.

    For turning maneuvers the corner entry lands a few frames after t=0;
    a sudden turn starts its corner exactly at the first future frame.
    """
    total = T + F
    speed = float(rng.uniform(5.0, 11.0))
    travel = speed * (total - 1) * FRAME_DT
    if maneuver in ("turn_left", "turn_right"):
        entry_frame = T - 1 + int(rng.integers(3, 9))
        s0 = route.corner[0] - speed * entry_frame * FRAME_DT
    elif maneuver == "sudden_turn":
        s0 = route.corner[0] - speed * (T - 1) * FRAME_DT - 1e-9
    else:
        lo = 1.0
        hi = max(route.length - travel - 1.0, lo + 1.0)
        s0 = float(rng.uniform(lo, hi))
    return s0, speed


def _roll_track(route, s0, speeds):
    ds = np.concatenate([[0.0], speeds[1:] * FRAME_DT])
    s = s0 + np.cumsum(ds)
    xy, heading = route.sample(s)
    vel = speeds[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    return xy, wrap_angle(heading), vel


def _pick_maneuver(mix, supported, rng):
    names = [m for m in sorted(mix) if m in supported and mix[m] > 0]
    if not names:
        names = ["keep_lane"]
    weights = np.array([mix[m] for m in names])
    weights = weights / weights.sum()
    return str(rng.choice(names, p=weights))


def generate(spec: ScenarioSpec) -> Scene:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    layout_name = spec.layout
    if layout_name == "mixed":
        layout_name = str(rng.choice(LAYOUTS))
    layout = BUILDERS[layout_name](rng)
    if not layout.lanes:
        raise SceneError(f"layout {layout_name} produced no lanes")
    T, F = spec.history_frames, spec.future_frames
    total = T + F
    n_agents = int(rng.integers(spec.min_agents, spec.max_agents + 1))
    supported = _LAYOUT_SUPPORT[layout_name]

    tracks = []
    straight_routes = layout.routes_of_kind("straight")
    for idx in range(n_agents):
        # the focal agent draws from the full mix; others follow lanes
        maneuver = _pick_maneuver(
            spec.maneuver_mix,
            supported if idx == 0 else ("keep_lane", "stop_and_go"),
            rng,
        )
        if maneuver in ("turn_left", "turn_right"):
            pool = layout.routes_of_kind(maneuver.removeprefix("turn_"))
            route = pool[int(rng.integers(len(pool)))]
        else:
            route = straight_routes[int(rng.integers(len(straight_routes)))]
        if maneuver == "sudden_turn":
            speed_peek = float(rng.uniform(5.0, 11.0))
            s_turn = max(speed_peek * (T - 1) * FRAME_DT + 2.0, 4.0)
            route = _sudden_route(route, s_turn, speed_peek, rng)
            s0, speed = route.corner[0] - speed_peek * (T - 1) * FRAME_DT, speed_peek
        else:
            s0, speed = _place_on_route(route, maneuver, T, F, rng)
        speeds = _speed_profile(maneuver, speed, total, rng)
        xy, heading, vel = _roll_track(route, s0, speeds)
        if spec.position_noise > 0 or spec.heading_noise > 0:
            clip = NOISE_CLIP_SIGMAS
            jit_xy = np.clip(
                rng.normal(0.0, spec.position_noise or 1e-12, size=(T, 2)),
                -clip * spec.position_noise, clip * spec.position_noise,
            )
            jit_h = np.clip(
                rng.normal(0.0, spec.heading_noise or 1e-12, size=T),
                -clip * spec.heading_noise, clip * spec.heading_noise,
            )
            xy[:T] += jit_xy
            heading[:T] = wrap_angle(heading[:T] + jit_h)
        tracks.append(
            AgentTrack(idx, "vehicle", xy, heading, vel, np.ones(total, dtype=bool))
        )
    return Scene(T, F, tracks, layout.lanes, focal_agent=0)


def scene_seeds(master_seed, count):
    """Per-scene seeds derived deterministically from one master seed."""
    return np.random.SeedSequence(master_seed).generate_state(count, dtype=np.uint64)
