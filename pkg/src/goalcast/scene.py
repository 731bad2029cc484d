"""Vectorized driving scenes: polylines, target-frame normalization, JSON io,
and a synthetic scene generator used in place of real driving logs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

LANE = "lane"
AGENT = "agent"

# Vector feature row layout (see README schema notes):
#   [start_x, start_y, end_x, end_y, kind_flag, attr_start, attr_end, width_hint]
# kind_flag: 0 = lane, 1 = agent. attr_start/attr_end: point index within the
# lane, or timestamp (step index) for agents.
VECTOR_WIDTH = 8
TARGET_ID = -1  # synthesized polyline row for the target agent's history

JSON_VERSION = 1


class SceneError(ValueError):
    pass


class DegenerateHeadingError(SceneError):
    """Last two history points coincide; heading is undefined."""


class MalformedPolylineError(SceneError):
    """Polyline has too few points to vectorize."""


class SceneParseError(SceneError):
    """Scene JSON violates the schema; message names the offending field."""


def _as_points(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SceneError(f"{name}: expected an (n, 2) array of points")
    if not np.all(np.isfinite(arr)):
        raise SceneError(f"{name}: non-finite coordinate")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PolyVector:
    start: np.ndarray
    end: np.ndarray
    attributes: np.ndarray  # [kind_flag, attr_start, attr_end, width_hint]

    def feature_row(self) -> np.ndarray:
        return np.concatenate([self.start, self.end, self.attributes])


@dataclass(frozen=True)
class Polyline:
    id: int
    kind: str
    points: np.ndarray
    width: float = 0.0
    vectors: Optional[tuple[PolyVector, ...]] = None

    def __post_init__(self):
        if self.kind not in (LANE, AGENT):
            raise SceneError(f"polyline {self.id}: unknown kind {self.kind!r}")
        object.__setattr__(self, "points", _as_points(self.points, f"polyline {self.id}"))
        if self.kind == LANE and len(self.points) < 2:
            raise SceneError(f"polyline {self.id}: lanes need >= 2 points")


@dataclass(frozen=True)
class Scene:
    polylines: tuple[Polyline, ...]
    target_history: np.ndarray
    target_future: Optional[np.ndarray] = None
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "polylines", tuple(self.polylines))
        object.__setattr__(
            self, "target_history", _as_points(self.target_history, "target_history")
        )
        if self.target_future is not None:
            object.__setattr__(
                self, "target_future", _as_points(self.target_future, "target_future")
            )

    def lanes(self) -> list[Polyline]:
        return [p for p in self.polylines if p.kind == LANE]

    def target_polyline(self) -> Polyline:
        """The target agent's history as an agent polyline (id TARGET_ID)."""
        return Polyline(id=TARGET_ID, kind=AGENT, points=self.target_history)


@dataclass(frozen=True)
class SceneGenSpec:
    """Knobs for the synthetic scene generator. The seed fully determines
    the output scene."""

    seed: int = 0
    lane_count: tuple[int, int] = (2, 4)
    family: str = "mixed"  # straight | arc | fork | mixed
    lane_length: tuple[float, float] = (40.0, 70.0)
    curvature: tuple[float, float] = (0.005, 0.02)
    agent_count: int = 2
    history_len: int = 10
    horizon: int = 30
    speed: tuple[float, float] = (4.0, 9.0)
    jitter_sigma: float = 0.4
    lane_spacing: float = 2.0  # centerline point pitch, meters
    dt: float = 0.1

    def __post_init__(self):
        for name in ("lane_count", "lane_length", "curvature", "speed"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise SceneError(f"scene gen spec: empty range for {name}")
        if self.family not in ("straight", "arc", "fork", "mixed"):
            raise SceneError(f"scene gen spec: unknown family {self.family!r}")
        if self.history_len < 2 or self.horizon < 1:
            raise SceneError("scene gen spec: history_len >= 2 and horizon >= 1 required")


# ---------------------------------------------------------------------------
# rigid normalization


def normalize_scene(scene: Scene) -> Scene:
    """Translate/rotate the scene so the target's last history point sits at
    the origin and its last-step heading points along +y."""
    if scene.normalized:
        raise SceneError("scene is already normalized")
    hist = scene.target_history
    if len(hist) < 2:
        raise SceneError("normalization needs >= 2 history points")
    heading = hist[-1] - hist[-2]
    if math.hypot(*heading) < 1e-12:
        raise DegenerateHeadingError("last two history points coincide")
    origin = hist[-1]
    phi = math.atan2(heading[0], heading[1])  # rotate by phi to map heading -> +y
    c, s = math.cos(phi), math.sin(phi)
    rot_t = np.array([[c, s], [-s, c]])  # transpose of the rotation matrix

    def xform(points: np.ndarray) -> np.ndarray:
        return (points - origin) @ rot_t

    polylines = tuple(
        replace(p, points=xform(p.points), vectors=None) for p in scene.polylines
    )
    future = None if scene.target_future is None else xform(scene.target_future)
    return Scene(
        polylines=polylines,
        target_history=xform(hist),
        target_future=future,
        normalized=True,
    )


def vectorize_polyline(poly: Polyline) -> Polyline:
    """Chain consecutive points into vectors carrying lane indices or
    timestamps in the attribute slots."""
    pts = poly.points
    if len(pts) < 2:
        raise MalformedPolylineError(f"polyline {poly.id}: needs >= 2 points")
    kind_flag = 0.0 if poly.kind == LANE else 1.0
    vectors = tuple(
        PolyVector(
            start=pts[i],
            end=pts[i + 1],
            attributes=np.array([kind_flag, float(i), float(i + 1), poly.width]),
        )
        for i in range(len(pts) - 1)
    )
    return replace(poly, vectors=vectors)


def vectorize_scene(scene: Scene) -> list[Polyline]:
    """All scene elements as vector chains, target agent first."""
    if not scene.normalized:
        raise SceneError("vectorize requires a normalized scene")
    elements = [scene.target_polyline(), *scene.polylines]
    return [vectorize_polyline(p) for p in elements]


# ---------------------------------------------------------------------------
# synthetic scenes


def _arc_lengths(points: np.ndarray) -> np.ndarray:
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def _walk(points: np.ndarray, cum: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Point and unit tangent at arc length s along a piecewise-linear line."""
    s = min(max(s, 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(i, len(points) - 2)
    seg = points[i + 1] - points[i]
    seg_len = float(np.linalg.norm(seg))
    t = 0.0 if seg_len == 0 else (s - cum[i]) / seg_len
    tangent = seg / seg_len if seg_len > 0 else np.array([0.0, 1.0])
    return points[i] + t * seg, tangent


def _centerline(rng, start, heading, length, spacing, kind, curvature):
    """Straight or constant-curvature centerline as discrete points."""
    n = max(2, int(round(length / spacing)) + 1)
    pts = [np.asarray(start, dtype=float)]
    theta = float(heading)
    for _ in range(n - 1):
        step = np.array([math.sin(theta), math.cos(theta)]) * spacing
        pts.append(pts[-1] + step)
        if kind == "arc":
            theta += curvature * spacing
    return np.array(pts)


def generate_scene(spec: SceneGenSpec) -> Scene:
    """Build a normalized synthetic scene.

    The target drives along a main corridor (straight, arc, or fork); its
    future continues down a branch of that corridor with clamped lateral
    jitter, so the endpoint always lies on a lane. Extra lanes and agent
    histories fill out the scene.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    family = spec.family
    if family == "mixed":
        family = ("straight", "arc", "fork")[rng.integers(0, 3)]

    world_origin = rng.uniform(-100.0, 100.0, size=2)
    world_heading = rng.uniform(0.0, 2 * math.pi)
    length = rng.uniform(*spec.lane_length)
    curv = rng.uniform(*spec.curvature) * (1 if rng.random() < 0.5 else -1)

    branches: list[np.ndarray] = []
    if family == "fork":
        prefix_len = 0.45 * length
        prefix = _centerline(
            rng, world_origin, world_heading, prefix_len, spec.lane_spacing, "straight", 0.0
        )
        split_angle = math.radians(rng.uniform(18.0, 35.0))
        for sign in (1.0, -1.0):
            branch = _centerline(
                rng,
                prefix[-1],
                world_heading + sign * split_angle,
                length - prefix_len,
                spec.lane_spacing,
                "straight",
                0.0,
            )
            branches.append(np.vstack([prefix, branch[1:]]))
    else:
        line = _centerline(
            rng, world_origin, world_heading, length, spec.lane_spacing, family, curv
        )
        branches.append(line)

    polylines: list[Polyline] = []
    next_id = 0
    for branch in branches:
        polylines.append(Polyline(id=next_id, kind=LANE, points=branch, width=3.0))
        next_id += 1

    # parallel side lanes until lane_count is met
    n_lanes = int(rng.integers(spec.lane_count[0], spec.lane_count[1] + 1))
    base = branches[0]
    base_cum = _arc_lengths(base)
    while next_id < n_lanes:
        offset = rng.uniform(3.5, 8.0) * (1 if rng.random() < 0.5 else -1)
        shifted = []
        for s in np.linspace(0.0, base_cum[-1], len(base)):
            p, tan = _walk(base, base_cum, float(s))
            normal = np.array([tan[1], -tan[0]])
            shifted.append(p + offset * normal)
        polylines.append(Polyline(id=next_id, kind=LANE, points=np.array(shifted), width=3.0))
        next_id += 1

    # target motion along the main corridor
    main = branches[int(rng.integers(0, len(branches)))]
    main_cum = _arc_lengths(main)
    speed = rng.uniform(*spec.speed)
    step = speed * spec.dt
    future_span = step * spec.horizon
    anchor_max = max(step * (spec.history_len - 1), main_cum[-1] - future_span - 2.0)
    anchor = rng.uniform(step * (spec.history_len - 1), max(anchor_max, step * spec.history_len))

    history = []
    for k in range(spec.history_len):
        s = anchor - step * (spec.history_len - 1 - k)
        p, _ = _walk(main, main_cum, s)
        history.append(p)

    future = []
    clamp = 2.5  # keep jittered points within the lane band
    for k in range(1, spec.horizon + 1):
        p, tan = _walk(main, main_cum, anchor + step * k)
        normal = np.array([tan[1], -tan[0]])
        lateral = float(np.clip(rng.normal(0.0, spec.jitter_sigma), -clamp, clamp))
        future.append(p + lateral * normal)

    # background agents: short histories along random lanes
    lane_polys = [p for p in polylines if p.kind == LANE]
    for _ in range(spec.agent_count):
        lane = lane_polys[int(rng.integers(0, len(lane_polys)))]
        cum = _arc_lengths(lane.points)
        a_speed = rng.uniform(*spec.speed)
        a_anchor = rng.uniform(a_speed * spec.dt * (spec.history_len - 1), max(cum[-1], 1.0))
        pts = []
        for k in range(spec.history_len):
            s = a_anchor - a_speed * spec.dt * (spec.history_len - 1 - k)
            p, _ = _walk(lane.points, cum, s)
            pts.append(p)
        polylines.append(Polyline(id=next_id, kind=AGENT, points=np.array(pts)))
        next_id += 1

    scene = Scene(
        polylines=tuple(polylines),
        target_history=np.array(history),
        target_future=np.array(future),
        normalized=False,
    )
    return normalize_scene(scene)


# ---------------------------------------------------------------------------
# JSON round trip
#
# Schema (version 1):
#   {"version": 1, "normalized": bool,
#    "polylines": [{"id": int, "kind": "lane"|"agent",
#                   "points": [[x, y], ...], "width": float}],
#    "target_history": [[x, y], ...],
#    "target_future": [[x, y], ...]}          # optional
# Coordinates are serialized with shortest round-trip repr (exact to the bit,
# which exceeds the 12-significant-digit floor).


def _require(doc: dict, key: str, ctx: str = ""):
    if key not in doc:
        raise SceneParseError(f"missing field {ctx}{key!r}")
    return doc[key]


def _parse_points(obj, name: str) -> np.ndarray:
    if not isinstance(obj, list) or not all(
        isinstance(p, list) and len(p) == 2 for p in obj
    ):
        raise SceneParseError(f"{name}: expected [[x, y], ...]")
    try:
        return _as_points(obj, name)
    except SceneError as exc:
        raise SceneParseError(str(exc)) from exc


def save_scene_json(scene: Scene) -> bytes:
    doc = {
        "version": JSON_VERSION,
        "normalized": scene.normalized,
        "polylines": [
            {
                "id": p.id,
                "kind": p.kind,
                "points": p.points.tolist(),
                "width": p.width,
            }
            for p in scene.polylines
        ],
        "target_history": scene.target_history.tolist(),
    }
    if scene.target_future is not None:
        doc["target_future"] = scene.target_future.tolist()
    return json.dumps(doc).encode()


def load_scene_json(data: bytes) -> Scene:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SceneParseError("top level: expected an object")
    version = _require(doc, "version")
    if version != JSON_VERSION:
        raise SceneParseError(f"version: unsupported value {version!r}")
    raw_polys = _require(doc, "polylines")
    if not isinstance(raw_polys, list):
        raise SceneParseError("polylines: expected an array")
    polylines = []
    for i, rp in enumerate(raw_polys):
        ctx = f"polylines[{i}]."
        if not isinstance(rp, dict):
            raise SceneParseError(f"polylines[{i}]: expected an object")
        pid = _require(rp, "id", ctx)
        kind = _require(rp, "kind", ctx)
        if kind not in (LANE, AGENT):
            raise SceneParseError(f"{ctx}kind: expected 'lane' or 'agent'")
        points = _parse_points(_require(rp, "points", ctx), f"{ctx}points")
        width = float(rp.get("width", 0.0))
        try:
            polylines.append(Polyline(id=int(pid), kind=kind, points=points, width=width))
        except SceneError as exc:
            raise SceneParseError(str(exc)) from exc
    history = _parse_points(_require(doc, "target_history"), "target_history")
    future = None
    if "target_future" in doc:
        future = _parse_points(doc["target_future"], "target_future")
    return Scene(
        polylines=tuple(polylines),
        target_history=history,
        target_future=future,
        normalized=bool(_require(doc, "normalized")),
    )
