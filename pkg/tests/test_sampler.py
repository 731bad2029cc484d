import math

import numpy as np
import pytest

from goalcast.sampler import (
    CandidateSet,
    EmptyRegionError,
    SamplerConfig,
    lane_distance,
    nearest_candidate,
    sample_candidates,
    select_lanes,
)
from goalcast.scene import LANE, Polyline, Scene


def scene_with_lanes(lanes):
    polys = tuple(
        Polyline(id=i, kind=LANE, points=np.array(p, dtype=float))
        for i, p in enumerate(lanes)
    )
    return Scene(
        polylines=polys,
        target_history=np.array([(0.0, -1.0), (0.0, 0.0)]),
        normalized=True,
    )


def band_oracle(lanes, cfg):
    """Independent enumeration: scan every grid point in a bounding box and
    re-evaluate the two keep predicates directly."""

    def seg_dist(p, pts):
        best = math.inf
        for a, b in zip(pts[:-1], pts[1:]):
            ab = (b[0] - a[0], b[1] - a[1])
            den = ab[0] ** 2 + ab[1] ** 2
            t = 0.0 if den == 0 else max(
                0.0, min(1.0, ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / den)
            )
            q = (a[0] + t * ab[0], a[1] + t * ab[1])
            best = min(best, math.hypot(p[0] - q[0], p[1] - q[1]))
        return best

    pitch = cfg.density
    span = int(cfg.radius / pitch) + 2
    out = set()
    for i in range(-span, span + 1):
        for j in range(-span, span + 1):
            p = (i * pitch, j * pitch)
            if abs(p[0]) + abs(p[1]) > cfg.radius:
                continue
            if any(seg_dist(p, lane) <= cfg.centerline_halfwidth for lane in lanes):
                out.add((i, j))
    return out


class TestSelectLanes:
    def test_far_lane_excluded(self):
        scene = scene_with_lanes([[(60.0, 0.0), (70.0, 0.0)], [(0.0, 0.0), (0.0, 5.0)]])
        assert select_lanes(scene, SamplerConfig()) == [1]

    def test_lane_through_origin_included(self):
        scene = scene_with_lanes([[(0.0, -5.0), (0.0, 5.0)]])
        assert select_lanes(scene, SamplerConfig()) == [0]

    def test_boundary_inclusive(self):
        scene = scene_with_lanes([[(25.0, 25.0), (30.0, 30.0)]])
        assert select_lanes(scene, SamplerConfig(radius=50.0)) == [0]

    def test_empty_errors(self):
        scene = scene_with_lanes([[(80.0, 0.0), (90.0, 0.0)]])
        with pytest.raises(EmptyRegionError):
            select_lanes(scene, SamplerConfig())


class TestSampleCandidates:
    def test_band_count_matches_enumeration(self):
        lane = [(0.0, 0.0), (0.0, 10.0)]
        cfg = SamplerConfig(radius=50.0, density=1.0, centerline_halfwidth=3.0)
        cands = sample_candidates(scene_with_lanes([lane]), cfg)
        expect = band_oracle([lane], cfg)
        got = {(round(x), round(y)) for x, y in cands.points}
        assert got == expect

    def test_refinement_adds_candidates(self):
        lane = [(0.0, 0.0), (0.0, 10.0)]
        coarse = sample_candidates(scene_with_lanes([lane]), SamplerConfig(density=1.0))
        fine = sample_candidates(scene_with_lanes([lane]), SamplerConfig(density=0.5))
        assert len(fine) > len(coarse)

    def test_refinement_keeps_coverage(self):
        lane = [(1.3, -2.0), (4.0, 9.0)]
        coarse = sample_candidates(scene_with_lanes([lane]), SamplerConfig(density=1.0))
        fine = sample_candidates(scene_with_lanes([lane]), SamplerConfig(density=0.5))
        for p in coarse.points:
            d = np.linalg.norm(fine.points - p, axis=1).min()
            assert d <= 0.5

    def test_shared_band_deduplicated(self):
        lane = [(0.0, 0.0), (0.0, 10.0)]
        cands = sample_candidates(scene_with_lanes([lane, lane]), SamplerConfig())
        uniq = {tuple(p) for p in cands.points}
        assert len(uniq) == len(cands)

    def test_predicates_hold_for_every_candidate(self):
        cfg = SamplerConfig(radius=12.0, density=1.0, centerline_halfwidth=2.0)
        lanes = [[(-3.0, -8.0), (2.0, 6.0)], [(0.0, 0.0), (8.0, 4.0)]]
        cands = sample_candidates(scene_with_lanes(lanes), cfg)
        expect = band_oracle(lanes, cfg)
        got = {(round(x / cfg.density), round(y / cfg.density)) for x, y in cands.points}
        assert got == expect


class TestNearestCandidate:
    def test_exact_hit(self):
        cands = CandidateSet(points=[(0, 0), (1, 0), (2, 0)], source_lane=[0, 0, 0])
        assert nearest_candidate(cands, (1.0, 0.0)) == 1

    def test_tie_lowest_index(self):
        pts = [(5, 5), (6, 6), (7, 7), (2, 0), (8, 8), (9, 9), (10, 10), (0, 2)]
        cands = CandidateSet(points=pts, source_lane=[0] * len(pts))
        # (1, 1) is equidistant from index 3 and index 7; lowest index wins
        assert nearest_candidate(cands, (1.0, 1.0)) == 3

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-10, 10, size=(40, 2))
        cands = CandidateSet(points=pts, source_lane=np.zeros(40, dtype=int))
        for _ in range(50):
            p = rng.uniform(-12, 12, size=2)
            best = min(range(40), key=lambda i: (np.linalg.norm(pts[i] - p), i))
            assert nearest_candidate(cands, p) == best


class TestLaneDistance:
    def test_on_lane_point(self):
        lane = Polyline(id=0, kind=LANE, points=np.array([(0.0, 0.0), (0.0, 2.0)]))
        assert lane_distance(lane, (0.0, 2.0)) == 0.0

    def test_min_of_squared_point_distances(self):
        lane = Polyline(id=0, kind=LANE, points=np.array([(0.0, 0.0), (0.0, 2.0)]))
        # squared distances are (2, 2); points (not segments) define the min
        assert lane_distance(lane, (1.0, 1.0)) == pytest.approx(2.0)

    def test_adding_far_points_monotone(self):
        near = Polyline(id=0, kind=LANE, points=np.array([(0.0, 0.0), (0.0, 2.0)]))
        far = Polyline(
            id=0, kind=LANE, points=np.array([(0.0, 0.0), (0.0, 2.0), (50.0, 50.0)])
        )
        p = (3.0, 0.5)
        assert lane_distance(far, p) == lane_distance(near, p)
