"""Discrete probability mass over goal candidates, with the truncation and
3x3 cell-subdivision transforms used before set optimization, and a synthetic
Gaussian-mixture generator for optimizer-only experiments."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .sampler import CandidateSet
from .util import write_csv


class HeatmapError(ValueError):
    pass


class EmptyHeatmapError(HeatmapError):
    """Every cell was removed; nothing left to select goals from."""


@dataclass(frozen=True)
class Heatmap:
    points: np.ndarray  # (m, 2) cell centers
    mass: np.ndarray  # (m,) probabilities (sum 1 unless truncated)
    cell_pitch: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) != len(mass):
            raise HeatmapError("heatmap: points (m, 2) and mass (m,) must align")
        if len(pts) == 0:
            raise EmptyHeatmapError("heatmap has no cells")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(mass))):
            raise HeatmapError("heatmap: non-finite cell or mass")
        if np.any(mass < 0):
            raise HeatmapError("heatmap: negative mass")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise HeatmapError("heatmap: duplicate cell positions")
        pts.flags.writeable = False
        mass.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def argmax_cell(self) -> int:
        """Index of the highest-mass cell; ties go to the lowest index."""
        return int(np.argmax(self.mass))


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian mixture projected onto a candidate set."""

    components: tuple  # ((mean_xy, sigma, weight), ...)
    seed: int = 0

    def __post_init__(self):
        if not self.components:
            raise HeatmapError("mixture: no components")
        for _, sigma, weight in self.components:
            if sigma <= 0 or weight <= 0:
                raise HeatmapError("mixture: sigma and weight must be > 0")


def from_scores(scores, cands: Union[CandidateSet, np.ndarray], pitch: float = 1.0) -> Heatmap:
    """Softmax of per-candidate scores (max-shifted for stability)."""
    scores = np.asarray(scores, dtype=float)
    points = cands.points if isinstance(cands, CandidateSet) else np.asarray(cands, dtype=float)
    if scores.ndim != 1 or len(scores) != len(points) or len(scores) == 0:
        raise HeatmapError("scores must be a non-empty vector aligned with candidates")
    if not np.all(np.isfinite(scores)):
        raise HeatmapError("non-finite score")
    z = np.exp(scores - scores.max())
    return Heatmap(points=points, mass=z / z.sum(), cell_pitch=pitch)


def truncate(h: Heatmap, threshold: float, renormalize: bool = False) -> Heatmap:
    """Drop cells with mass below threshold. Retained masses stay as-is
    (expected-error evaluation uses the raw retained mass); renormalize only
    for shape-sensitive consumers like the set predictor's input."""
    keep = h.mass >= threshold
    if not np.any(keep):
        raise EmptyHeatmapError(f"truncation at {threshold} removed every cell")
    mass = h.mass[keep]
    if renormalize:
        mass = mass / mass.sum()
    return Heatmap(points=h.points[keep], mass=mass, cell_pitch=h.cell_pitch)


_SUB_OFFSETS = np.array([(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)], dtype=float)


def subdivide(h: Heatmap) -> Heatmap:
    """Split each cell into a centered 3x3 lattice of subcells, each with a
    ninth of the parent's mass and a third of the pitch."""
    if h.cell_pitch <= 0:
        raise HeatmapError("subdivide needs a positive cell pitch")
    step = h.cell_pitch / 3.0
    points = (h.points[:, None, :] + _SUB_OFFSETS[None, :, :] * step).reshape(-1, 2)
    mass = np.repeat(h.mass / 9.0, 9)
    return Heatmap(points=points, mass=mass, cell_pitch=step)


def synth_mixture(spec: MixtureSpec, cands: Union[CandidateSet, np.ndarray], pitch: float = 1.0) -> Heatmap:
    """Mixture density evaluated at each candidate, normalized to a pmf."""
    points = cands.points if isinstance(cands, CandidateSet) else np.asarray(cands, dtype=float)
    dens = np.zeros(len(points))
    for mean, sigma, weight in spec.components:
        d2 = ((points - np.asarray(mean, dtype=float)) ** 2).sum(axis=1)
        dens += weight * np.exp(-d2 / (2.0 * sigma * sigma))
    total = dens.sum()
    if total <= 0:
        raise HeatmapError("mixture density is zero over the candidate set")
    return Heatmap(points=points, mass=dens / total, cell_pitch=pitch)


def save_heatmap_csv(path, h: Heatmap, seed=None) -> None:
    rows = [(x, y, m, h.cell_pitch) for (x, y), m in zip(h.points, h.mass)]
    write_csv(path, ["x", "y", "mass", "pitch"], rows, seed=seed)


def load_heatmap_csv(path) -> Heatmap:
    lines = [
        ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")
    ]
    if not lines or lines[0].split(",") != ["x", "y", "mass", "pitch"]:
        raise HeatmapError("heatmap csv: expected header x,y,mass,pitch")
    if len(lines) == 1:
        raise EmptyHeatmapError("heatmap csv has no cells")
    rows = [ln.split(",") for ln in lines[1:]]
    points = np.array([[float(r[0]), float(r[1])] for r in rows])
    mass = np.array([float(r[2]) for r in rows])
    pitches = {r[3] for r in rows}
    if len(pitches) != 1:
        raise HeatmapError("heatmap csv: inconsistent pitch column")
    return Heatmap(points=points, mass=mass, cell_pitch=float(rows[0][3]))
