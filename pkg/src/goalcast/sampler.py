"""Dense goal candidate sampling: a grid laid over the lanes near the target,
plus the nearest-candidate / nearest-lane labeling used for training targets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import LANE, Polyline, Scene
from .util import write_csv


class SamplerError(ValueError):
    pass


class EmptyRegionError(SamplerError):
    """No lanes (or no candidates) within reach; prediction is impossible."""


@dataclass(frozen=True)
class SamplerConfig:
    radius: float = 50.0  # Manhattan distance from the origin
    density: float = 1.0  # grid pitch, meters between adjacent candidates
    centerline_halfwidth: float = 3.0

    def __post_init__(self):
        if self.density <= 0 or self.radius <= 0 or self.centerline_halfwidth < 0:
            raise SamplerError("sampler config: density/radius > 0, halfwidth >= 0")


@dataclass(frozen=True)
class CandidateSet:
    points: np.ndarray  # (m, 2)
    source_lane: np.ndarray  # (m,) lane id per candidate

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "source_lane", np.asarray(self.source_lane, dtype=int))
        self.points.flags.writeable = False
        self.source_lane.flags.writeable = False

    def __len__(self) -> int:
        return len(self.points)


def select_lanes(scene: Scene, cfg: SamplerConfig) -> list[int]:
    """Ids of lanes with at least one point inside the Manhattan radius."""
    if not scene.normalized:
        raise SamplerError("lane selection requires a normalized scene")
    ids = [
        lane.id
        for lane in scene.lanes()
        if np.min(np.abs(lane.points).sum(axis=1)) <= cfg.radius
    ]
    if not ids:
        raise EmptyRegionError(f"no lanes within Manhattan radius {cfg.radius}")
    return ids


def _segment_distance(points: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment of a polyline."""
    a, b = line[:-1], line[1:]
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-18)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - proj, axis=2)
    return d.min(axis=1)


def sample_candidates(scene: Scene, cfg: SamplerConfig) -> CandidateSet:
    """Grid candidates (pitch = density, anchored at the origin) within the
    halfwidth band of any in-range lane and inside the Manhattan radius.
    Cells claimed by several lanes keep the nearest lane's id."""
    lane_ids = select_lanes(scene, cfg)
    lanes = {p.id: p for p in scene.lanes()}
    pitch = cfg.density
    hw = cfg.centerline_halfwidth

    kept: dict[tuple[int, int], tuple[float, int]] = {}
    for lid in lane_ids:
        pts = lanes[lid].points
        lo = pts.min(axis=0) - hw
        hi = pts.max(axis=0) + hw
        ix = np.arange(math.ceil(lo[0] / pitch - 1e-9), math.floor(hi[0] / pitch + 1e-9) + 1)
        iy = np.arange(math.ceil(lo[1] / pitch - 1e-9), math.floor(hi[1] / pitch + 1e-9) + 1)
        if len(ix) == 0 or len(iy) == 0:
            continue
        gx, gy = np.meshgrid(ix, iy, indexing="ij")
        cells = np.stack([gx.ravel(), gy.ravel()], axis=1)
        grid = cells * pitch
        in_radius = np.abs(grid).sum(axis=1) <= cfg.radius
        cells, grid = cells[in_radius], grid[in_radius]
        if len(grid) == 0:
            continue
        dist = _segment_distance(grid, pts)
        ok = dist <= hw
        for (cx, cy), d in zip(cells[ok], dist[ok]):
            key = (int(cx), int(cy))
            prev = kept.get(key)
            if prev is None or d < prev[0] or (d == prev[0] and lid < prev[1]):
                kept[key] = (float(d), lid)

    if not kept:
        raise EmptyRegionError("no grid candidates within the lane bands")
    keys = sorted(kept)
    points = np.array([(kx * pitch, ky * pitch) for kx, ky in keys])
    source = np.array([kept[k][1] for k in keys])
    return CandidateSet(points=points, source_lane=source)


def nearest_candidate(cands: CandidateSet, p) -> int:
    """Index of the closest candidate; ties go to the lowest index."""
    if len(cands) == 0:
        raise SamplerError("empty candidate set")
    d = np.linalg.norm(cands.points - np.asarray(p, dtype=float), axis=1)
    return int(np.argmin(d))


def lane_distance(lane: Polyline, p) -> float:
    """Min squared distance from p to the lane's point sequence (points,
    not segments)."""
    if len(lane.points) < 1:
        raise SamplerError("lane has no points")
    diff = lane.points - np.asarray(p, dtype=float)
    return float(np.min((diff * diff).sum(axis=1)))


def save_candidates_csv(path, cands: CandidateSet, seed=None) -> None:
    rows = [(x, y, lid) for (x, y), lid in zip(cands.points, cands.source_lane)]
    write_csv(path, ["x", "y", "lane_id"], rows, seed=seed)
