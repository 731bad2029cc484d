"""Goal set selection by stochastic hill climbing over a goal heatmap.

The objective is the heatmap-weighted set distance (expected error) of a
K-goal set; the climber perturbs all goals each step, accepts improvements
(plus a 1% random override), runs several independently seeded restarts in
parallel, and reports the best set seen anywhere. A brute-force oracle over
cell subsets provides exact optima for small instances, and a bounded
perturbation search refines externally supplied goal sets into pseudo-labels.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .heatmap import Heatmap, subdivide, truncate
from .util import rng_for


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class GoalSet:
    goals: np.ndarray  # (K, 2)

    def __post_init__(self):
        g = np.asarray(self.goals, dtype=float)
        if g.ndim != 2 or g.shape[1] != 2 or len(g) < 1:
            raise OptimizerError("goal set: expected (K, 2) with K >= 1")
        if not np.all(np.isfinite(g)):
            raise OptimizerError("goal set: non-finite coordinate")
        g.flags.writeable = False
        object.__setattr__(self, "goals", g)

    def __len__(self) -> int:
        return len(self.goals)


@dataclass(frozen=True)
class Objective:
    """Blend of final-displacement and miss-indicator set distances.
    A goal exactly at the miss threshold counts as a hit."""

    w_fde: float = 1.0
    w_mr: float = 0.0
    mr_threshold: float = 2.0

    def __post_init__(self):
        if not (0.0 <= self.w_fde <= 1.0 and 0.0 <= self.w_mr <= 1.0):
            raise OptimizerError("objective weights must lie in [0, 1]")
        if abs(self.w_fde + self.w_mr - 1.0) > 1e-9:
            raise OptimizerError("objective weights must sum to 1")

    @staticmethod
    def fde() -> "Objective":
        return Objective(1.0, 0.0)

    @staticmethod
    def mr() -> "Objective":
        return Objective(0.0, 1.0)

    @staticmethod
    def blend(w_fde: float, w_mr: float) -> "Objective":
        return Objective(w_fde, w_mr)


@dataclass(frozen=True)
class OptimConfig:
    K: int = 6
    time_budget_ms: float = 100.0
    iteration_budget: Optional[int] = None  # overrides wall clock; deterministic
    restarts: int = 8
    perturb_sigma: Optional[float] = None  # default: heatmap cell pitch
    resample_prob: float = 0.05
    accept_worse_prob: float = 0.01
    truncation: float = 1e-3
    subdivide: bool = True
    snap_to_cells: bool = False
    literal_acceptance: bool = False  # accept only worse proposals (for comparison)
    seed: int = 0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.restarts < 1:
            raise OptimizerError("restarts >= 1 required")
        if self.K < 1:
            raise OptimizerError("K >= 1 required")
        if self.iteration_budget is None and self.time_budget_ms <= 0:
            raise OptimizerError("time budget must be positive")
        if self.iteration_budget is not None and self.iteration_budget < 1:
            raise OptimizerError("iteration budget must be positive")
        if self.perturb_sigma is not None and self.perturb_sigma <= 0:
            raise OptimizerError("perturb sigma must be positive")


@dataclass(frozen=True)
class PseudoLabelConfig:
    perturbation_count: int = 100
    perturb_sigma: Optional[float] = None  # default: heatmap cell pitch

    def __post_init__(self):
        if self.perturbation_count < 1:
            raise OptimizerError("perturbation count >= 1 required")


# ---------------------------------------------------------------------------
# objectives


def set_distance(ys: GoalSet, target, obj: Objective) -> float:
    """w_fde * min_i ||y_i - target|| + w_mr * [min distance > threshold]."""
    d = float(np.min(np.linalg.norm(ys.goals - np.asarray(target, dtype=float), axis=1)))
    return obj.w_fde * d + obj.w_mr * (1.0 if d > obj.mr_threshold else 0.0)


def _min_sq_dists(goals: np.ndarray, points: np.ndarray) -> np.ndarray:
    d2 = ((goals[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    return d2.min(axis=0)


def _eval_goals(goals: np.ndarray, points: np.ndarray, mass: np.ndarray, obj: Objective) -> float:
    d2min = _min_sq_dists(goals, points)
    val = 0.0
    if obj.w_fde:
        val = obj.w_fde * np.sqrt(d2min)
    if obj.w_mr:
        val = val + obj.w_mr * (d2min > obj.mr_threshold**2)
    return float(mass @ val)


def expected_error(ys: GoalSet, h: Heatmap, obj: Objective) -> float:
    """Sum over cells of mass * set_distance; the climbing objective."""
    return _eval_goals(ys.goals, h.points, h.mass, obj)


def prepare_heatmap(h: Heatmap, cfg: OptimConfig) -> Heatmap:
    """Truncate low-mass cells, then optionally subdivide 3x3."""
    out = truncate(h, cfg.truncation)
    if cfg.subdivide:
        out = subdivide(out)
    return out


# ---------------------------------------------------------------------------
# hill climbing

_BLOCK = 256  # RNG is drawn in fixed-size blocks so a longer budget replays
# the same prefix of proposals (anytime runs are nested)


def _climb_restart(points, mass, obj: Objective, cfg: OptimConfig, restart: int, sigma: float):
    rng = rng_for(cfg.seed, restart)
    m = len(points)
    k = cfg.K
    w = mass / mass.sum() if mass.sum() > 0 else np.full(m, 1.0 / m)

    idx = rng.choice(m, size=k, replace=m < k)
    cur = points[idx].copy()
    cur_e = _eval_goals(cur, points, mass, obj)
    best, best_e = cur.copy(), cur_e

    use_iters = cfg.iteration_budget is not None
    deadline = None if use_iters else time.perf_counter() + cfg.time_budget_ms / 1000.0
    thr2 = obj.mr_threshold**2
    t = 0
    while True:
        if use_iters:
            if t >= cfg.iteration_budget:
                break
        elif time.perf_counter() >= deadline:
            break
        if t % _BLOCK == 0:
            jitter = rng.standard_normal((_BLOCK, k, 2)) * sigma
            resample_u = rng.random((_BLOCK, k))
            resample_cells = rng.choice(m, size=(_BLOCK, k), p=w)
            accept_u = rng.random(_BLOCK)
        j = t % _BLOCK

        prop = cur + jitter[j]
        mask = resample_u[j] < cfg.resample_prob
        if mask.any():
            prop[mask] = points[resample_cells[j][mask]]
        if cfg.snap_to_cells:
            d2 = ((prop[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
            prop = points[d2.argmin(axis=1)]

        d2min = _min_sq_dists(prop, points)
        val = 0.0
        if obj.w_fde:
            val = obj.w_fde * np.sqrt(d2min)
        if obj.w_mr:
            val = val + obj.w_mr * (d2min > thr2)
        e2 = float(mass @ val)

        improved = (e2 > cur_e) if cfg.literal_acceptance else (e2 < cur_e)
        if improved or accept_u[j] < cfg.accept_worse_prob:
            cur, cur_e = prop, e2
        if e2 < best_e:
            best, best_e = prop.copy(), e2
        t += 1
    return best_e, best


def hill_climb(h: Heatmap, obj: Objective, cfg: OptimConfig) -> tuple[GoalSet, float]:
    """Best goal set across parallel restarts; anytime under the time budget.

    Each restart draws from its own (seed, restart index) stream, so results
    are independent of scheduling; restarts are merged by (error, index).
    """
    prepared = prepare_heatmap(h, cfg)
    sigma = cfg.perturb_sigma if cfg.perturb_sigma is not None else prepared.cell_pitch
    if sigma <= 0:
        sigma = 1.0
    points, mass = prepared.points, prepared.mass

    if cfg.restarts == 1:
        results = [_climb_restart(points, mass, obj, cfg, 0, sigma)]
    else:
        workers = cfg.workers or min(cfg.restarts, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_climb_restart, points, mass, obj, cfg, r, sigma)
                for r in range(cfg.restarts)
            ]
            results = [f.result() for f in futures]

    best_r = 0
    for r in range(1, cfg.restarts):
        if results[r][0] < results[best_r][0]:
            best_r = r
    err, goals = results[best_r]
    return GoalSet(goals=goals), err


def brute_force_oracle(h: Heatmap, obj: Objective, K: int, max_combos: int = 1_000_000) -> tuple[GoalSet, float]:
    """Exact minimum of the expected error over all K-subsets of cells."""
    m = len(h)
    if K < 1 or K > m:
        raise OptimizerError(f"oracle needs 1 <= K <= {m}")
    n_combos = math.comb(m, K)
    if n_combos > max_combos:
        raise OptimizerError(f"{n_combos} combinations exceed the {max_combos} bound")

    points, mass = h.points, h.mass
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    thr2 = obj.mr_threshold**2

    best_e = math.inf
    best_combo = None
    combo_iter = combinations(range(m), K)
    chunk_size = 4096
    offset = 0
    while True:
        chunk = list(
            c for _, c in zip(range(chunk_size), combo_iter)
        )
        if not chunk:
            break
        idx = np.array(chunk)
        d2min = d2[idx].min(axis=1)  # (chunk, m)
        vals = np.zeros_like(d2min)
        if obj.w_fde:
            vals += obj.w_fde * np.sqrt(d2min)
        if obj.w_mr:
            vals += obj.w_mr * (d2min > thr2)
        errs = vals @ mass
        j = int(np.argmin(errs))
        if errs[j] < best_e:
            best_e = float(errs[j])
            best_combo = chunk[j]
        offset += len(chunk)
    return GoalSet(goals=points[list(best_combo)]), best_e


def refine_pseudo_labels(
    init: GoalSet, h: Heatmap, obj: Objective, cfg: PseudoLabelConfig, seed: int
) -> GoalSet:
    """Best of init plus L per-goal Gaussian perturbations of it.

    Goal order is preserved: output goal i is a perturbed image of input
    goal i, so it can directly supervise the i-th predicted goal.
    """
    sigma = cfg.perturb_sigma if cfg.perturb_sigma is not None else h.cell_pitch
    rng = rng_for(seed)
    L = cfg.perturbation_count
    k = len(init)
    samples = np.empty((L + 1, k, 2))
    samples[0] = init.goals
    samples[1:] = init.goals[None, :, :] + rng.standard_normal((L, k, 2)) * sigma

    d2 = ((samples[:, :, None, :] - h.points[None, None, :, :]) ** 2).sum(axis=3)
    d2min = d2.min(axis=1)  # (L+1, m)
    vals = np.zeros_like(d2min)
    if obj.w_fde:
        vals += obj.w_fde * np.sqrt(d2min)
    if obj.w_mr:
        vals += obj.w_mr * (d2min > obj.mr_threshold**2)
    errs = vals @ h.mass
    return GoalSet(goals=samples[int(np.argmin(errs))])
