"""Procedural lane-graph layouts and arc-length route paths.

Layouts are built from fine polylines (~0.5-1 m resolution) that are cut
into ~5 m lane segments for the graph, while routes keep the fine polyline
for smooth kinematic sampling. Intersections use right-hand traffic with
approach lanes ending 6 m from the junction center and quarter-arc
connectors joining them to exit lanes.
"""

from __future__ import annotations

import numpy as np

from hpnet.scene.types import LaneSegment

LANE_HALF_OFFSET = 1.75     # lane center offset from road axis, meters
JUNCTION_CLEARANCE = 6.0    # approach lanes stop this far from the center
SEGMENT_LENGTH = 5.0        # lane-graph granularity, meters


class RoutePath:
    """Arc-length parameterized polyline an agent can follow."""

    def __init__(self, points, kind="straight", corner=None):
        self.points = np.asarray(points, dtype=np.float64)
        deltas = np.diff(self.points, axis=0)
        seg = np.hypot(deltas[:, 0], deltas[:, 1])
        keep = seg > 1e-12
        if not keep.all():
            self.points = np.concatenate(
                [self.points[:1], self.points[1:][keep]], axis=0
            )
            deltas = np.diff(self.points, axis=0)
            seg = np.hypot(deltas[:, 0], deltas[:, 1])
        self._deltas = deltas
        self._seg = seg
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._heading = np.arctan2(deltas[:, 1], deltas[:, 0])
        self.kind = kind          # straight | left | right
        self.corner = corner      # (s_begin, s_end) of the turning arc

    @property
    def length(self):
        return float(self._cum[-1])

    def sample(self, s):
        """Positions and headings at arc lengths ``s`` (clamped to the path)."""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._seg) - 1)
        frac = (s - self._cum[idx]) / self._seg[idx]
        xy = self.points[idx] + frac[..., None] * self._deltas[idx]
        heading = self._heading[idx]
        return xy, heading


def straight_polyline(start, heading, length, step=1.0):
    n = max(int(np.ceil(length / step)), 1)
    s = np.linspace(0.0, length, n + 1)
    direction = np.array([np.cos(heading), np.sin(heading)])
    return np.asarray(start, dtype=np.float64) + s[:, None] * direction


def arc_polyline(start, heading, radius, sweep, step=0.5):
    """Arc from ``start`` tangent to ``heading``; sweep > 0 bends left."""
    n = max(int(np.ceil(abs(sweep) * radius / step)), 4)
    angles = np.linspace(0.0, sweep, n + 1)
    side = 1.0 if sweep >= 0 else -1.0
    center = np.asarray(start) + radius * np.array(
        [np.cos(heading + side * np.pi / 2), np.sin(heading + side * np.pi / 2)]
    )
    start_angle = np.arctan2(start[1] - center[1], start[0] - center[0])
    pts = center + radius * np.stack(
        [np.cos(start_angle + angles), np.sin(start_angle + angles)], axis=1
    )
    return pts


def chain(*polylines):
    """Concatenate polylines, dropping duplicated junction points."""
    parts = [np.asarray(polylines[0], dtype=np.float64)]
    for p in polylines[1:]:
        p = np.asarray(p, dtype=np.float64)
        if np.allclose(parts[-1][-1], p[0], atol=1e-9):
            p = p[1:]
        parts.append(p)
    return np.concatenate(parts, axis=0)


def cut_segments(points, lane_class, first_id, seg_len=SEGMENT_LENGTH):
    """Cut a centerline into ~seg_len lane segments chained by succession."""
    path = RoutePath(points)
    n_seg = max(int(round(path.length / seg_len)), 1)
    bounds = np.linspace(0.0, path.length, n_seg + 1)
    lanes = []
    for i in range(n_seg):
        s = np.linspace(bounds[i], bounds[i + 1], 6)
        xy, _ = path.sample(s)
        lane = LaneSegment(first_id + i, lane_class, xy)
        lanes.append(lane)
    for a, b in zip(lanes, lanes[1:]):
        a.successors.append(b.lane_id)
        b.predecessors.append(a.lane_id)
    return lanes


def stitch_successions(lanes, tol=0.5):
    """Declare succession wherever one segment's end meets another's start."""
    for a in lanes:
        for b in lanes:
            if a.lane_id == b.lane_id:
                continue
            if np.hypot(*(a.centerline[-1] - b.centerline[0])) <= tol:
                if b.lane_id not in a.successors:
                    a.successors.append(b.lane_id)
                if a.lane_id not in b.predecessors:
                    b.predecessors.append(a.lane_id)


def mark_adjacent(lanes_a, lanes_b, max_gap=6.0):
    """Declare adjacency between side-by-side segments of two parallel lanes."""
    for a in lanes_a:
        pa = a.midpoint_pose
        for b in lanes_b:
            pb = b.midpoint_pose
            if np.hypot(pa.x - pb.x, pa.y - pb.y) <= max_gap:
                if b.lane_id not in a.adjacent:
                    a.adjacent.append(b.lane_id)
                if a.lane_id not in b.adjacent:
                    b.adjacent.append(a.lane_id)


class MapLayout:
    def __init__(self, lanes, routes):
        self.lanes = lanes
        self.routes = routes

    def routes_of_kind(self, kind):
        return [r for r in self.routes if r.kind == kind]


def _rot90(points, quarters):
    """Rotate points by quarters * 90 degrees about the origin, exactly."""
    pts = np.asarray(points, dtype=np.float64)
    for _ in range(quarters % 4):
        pts = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
    return pts


def build_straight(rng):
    n_lanes = int(rng.integers(2, 4))
    length = 140.0
    x0 = -62.0
    lanes, routes, all_rows = [], [], []
    next_id = 0
    for i in range(n_lanes):
        y = (i - (n_lanes - 1) / 2.0) * 2 * LANE_HALF_OFFSET
        pts = straight_polyline((x0, y), 0.0, length)
        rows = cut_segments(pts, "normal", next_id)
        next_id += len(rows)
        lanes.extend(rows)
        all_rows.append(rows)
        routes.append(RoutePath(pts))
    for a, b in zip(all_rows, all_rows[1:]):
        mark_adjacent(a, b)
    return MapLayout(lanes, routes)


def build_curve(rng):
    radius = float(rng.uniform(40.0, 60.0))
    sweep = float(rng.uniform(1.4, 2.0))  # radians of total bend
    lanes, routes = [], []
    next_id = 0
    rows_per_lane = []
    for i in range(2):
        r_i = radius + i * 2 * LANE_HALF_OFFSET
        start = (0.0, -(r_i - radius))
        pts = arc_polyline(start, 0.0, r_i, sweep)
        rows = cut_segments(pts, "normal", next_id)
        next_id += len(rows)
        lanes.extend(rows)
        rows_per_lane.append(rows)
        routes.append(RoutePath(pts))
    mark_adjacent(rows_per_lane[0], rows_per_lane[1])
    return MapLayout(lanes, routes)


def _approach_and_exits(arm_len):
    """East-approach geometry shared by the intersection builders.

    Returns fine polylines in the canonical orientation (approach heading
    +x on the south side of the road axis); other arms come from _rot90.
    """
    c = JUNCTION_CLEARANCE
    off = LANE_HALF_OFFSET
    approach = straight_polyline((-arm_len, -off), 0.0, arm_len - c)
    through = straight_polyline((c, -off), 0.0, arm_len - c)
    right_arc = arc_polyline((-c, -off), 0.0, c - off, -np.pi / 2)
    right_exit = straight_polyline((-off, -c), -np.pi / 2, arm_len - c)
    left_arc = arc_polyline((-c, -off), 0.0, c + off, np.pi / 2)
    left_exit = straight_polyline((off, c), np.pi / 2, arm_len - c)
    return approach, through, right_arc, right_exit, left_arc, left_exit


def _intersection(rng, arms):
    """Assemble an intersection from the listed flow directions (0=E,1=N,2=W,3=S).

    Each arm contributes an approach lane and a continuation (exit) lane;
    turn connectors are added whenever the turn's exit direction is served.
    """
    arm_len = 60.0
    lanes, routes = [], []
    next_id = 0
    approach, through, right_arc, right_exit, left_arc, left_exit = _approach_and_exits(arm_len)
    crossing = straight_polyline((-JUNCTION_CLEARANCE, -LANE_HALF_OFFSET), 0.0,
                                 2 * JUNCTION_CLEARANCE)
    for quarter in arms:
        in_pts = _rot90(approach, quarter)
        rows = cut_segments(in_pts, "normal", next_id)
        next_id += len(rows)
        lanes.extend(rows)
        out_rows = cut_segments(_rot90(through, quarter), "normal", next_id)
        next_id += len(out_rows)
        lanes.extend(out_rows)
        if (quarter + 2) % 4 in arms:
            pts = chain(in_pts, _rot90(crossing, quarter)[1:-1], _rot90(through, quarter))
            routes.append(RoutePath(pts, kind="straight"))
            cross_rows = cut_segments(_rot90(crossing, quarter), "connector", next_id)
            next_id += len(cross_rows)
            lanes.extend(cross_rows)
        for kind, arc, exit_pts, exit_quarter in (
            ("right", right_arc, right_exit, (quarter - 1) % 4),
            ("left", left_arc, left_exit, (quarter + 1) % 4),
        ):
            if exit_quarter not in arms:
                continue
            arc_r = _rot90(arc, quarter)
            full = chain(in_pts, arc_r, _rot90(exit_pts, quarter))
            s_begin = RoutePath(in_pts).length
            s_end = s_begin + RoutePath(arc_r).length
            routes.append(RoutePath(full, kind=kind, corner=(s_begin, s_end)))
            conn_rows = cut_segments(arc_r, "connector", next_id)
            next_id += len(conn_rows)
            lanes.extend(conn_rows)
    stitch_successions(lanes)
    return MapLayout(lanes, routes)


def build_t_intersection(rng):
    return _intersection(rng, arms=[0, 2, 3])


def build_fourway(rng):
    return _intersection(rng, arms=[0, 1, 2, 3])


BUILDERS = {
    "straight": build_straight,
    "curve": build_curve,
    "t_intersection": build_t_intersection,
    "fourway": build_fourway,
}

LAYOUTS = tuple(BUILDERS)
