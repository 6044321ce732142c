"""Grid-projection density and stem sample selection.

For a sphere around a candidate point, the points inside are projected on
the XOY plane and binned on a square grid anchored at the lower-left corner
of the square circumscribing the projected circle. The density is the
number of points divided by the number of occupied cells. Vertical stems
project onto a thin ring and score high; spread-out leaves score near 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import STEM, PointCloud, SpatialIndex, bounding_box
from .hull import SampleSet


class StemSelectionError(RuntimeError):
    """Stem samples could not be selected or failed validation too often."""


@dataclass(frozen=True)
class DensityParams:
    p: int = 500
    r: float = 5.0
    grid_spacing: float = 0.1
    n: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.p >= self.n:
            raise ValueError(f"p must be >= n, got p={self.p}, n={self.n}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.grid_spacing > 0:
            raise ValueError(f"grid_spacing must be positive, got {self.grid_spacing}")
        if not self.grid_spacing < 2 * self.r:
            raise ValueError("grid_spacing must be smaller than the sphere diameter 2r")


@dataclass(frozen=True)
class DensityReport:
    candidate_index: int
    l: int
    num: int
    m: float


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    reason: str = ""
    xy_spread: float = 0.0
    z_spread: float = 0.0


def _occupied_cells(xy: np.ndarray, origin: np.ndarray, grid_spacing: float) -> int:
    if len(xy) == 0:
        return 0
    cells = np.floor((xy - origin) / grid_spacing).astype(np.int64)
    return len(np.unique(cells, axis=0))


def grid_density(
    cloud: PointCloud, index: SpatialIndex, center, r: float, grid_spacing: float, candidate_index: int = -1
) -> DensityReport:
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not grid_spacing > 0:
        raise ValueError(f"grid_spacing must be positive, got {grid_spacing}")
    center = np.asarray(center, dtype=np.float64)
    inside = index.query(center, r)
    l = len(inside)
    if l == 0:
        return DensityReport(candidate_index, 0, 0, 0.0)
    num = _occupied_cells(cloud.points[inside, :2], center[:2] - r, grid_spacing)
    return DensityReport(candidate_index, l, num, l / num)


def draw_candidates(n_points: int, p: int, seed: int) -> np.ndarray:
    if p > n_points:
        raise StemSelectionError(f"cloud has {n_points} points, fewer than p={p}")
    return np.random.default_rng(seed).choice(n_points, size=p, replace=False)


def rank_reports(reports: list[DensityReport]) -> list[DensityReport]:
    # highest density first; ties -> larger l, then smaller index
    return sorted(reports, key=lambda d: (-d.m, -d.l, d.candidate_index))


def select_stem_samples(
    cloud: PointCloud, index: SpatialIndex, params: DensityParams
) -> tuple[SampleSet, list[DensityReport]]:
    cand = draw_candidates(len(cloud), params.p, params.seed)
    reports = []
    centers = cloud.points[cand]
    hits = index.query_many(centers, params.r)
    for ci, c, inside in zip(cand.tolist(), centers, hits):
        if len(inside) == 0:
            reports.append(DensityReport(ci, 0, 0, 0.0))
            continue
        num = _occupied_cells(cloud.points[inside, :2], c[:2] - params.r, params.grid_spacing)
        reports.append(DensityReport(ci, len(inside), num, len(inside) / num))
    # every candidate is a cloud point, so its own sphere holds at least itself
    assert all(rep.l >= 1 for rep in reports)
    top = rank_reports(reports)[: params.n]
    return SampleSet(np.array([d.candidate_index for d in top]), STEM), reports


def validate_stem_samples(
    cloud: PointCloud,
    samples: SampleSet,
    compactness_factor: float = 0.25,
    spread_factor: float = 0.3,
) -> ValidationResult:
    """Accept samples that are horizontally compact and vertically extended."""
    if len(samples) == 0:
        raise ValueError("empty stem sample set")
    ext = bounding_box(cloud).extents
    pts = cloud.points[samples.indices]
    xy = pts[:, :2]
    xy_spread = float(np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2).max()))
    z_spread = float(pts[:, 2].max() - pts[:, 2].min())
    if xy_spread > compactness_factor * max(ext[0], ext[1]):
        return ValidationResult(False, "compactness", xy_spread, z_spread)
    if z_spread < spread_factor * ext[2]:
        return ValidationResult(False, "spread", xy_spread, z_spread)
    return ValidationResult(True, "", xy_spread, z_spread)


def write_density_csv(path, reports: list[DensityReport]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "l", "num", "m"])
        for d in reports:
            w.writerow([d.candidate_index, d.l, d.num, repr(d.m)])


def select_validated_stem_samples(
    cloud: PointCloud,
    index: SpatialIndex,
    params: DensityParams,
    validate: bool = True,
    max_retries: int = 10,
    compactness_factor: float = 0.25,
    spread_factor: float = 0.3,
) -> tuple[SampleSet, list[DensityReport], int]:
    """Select stem samples, redrawing with seed+1 until validation accepts.

    Returns the samples, their density reports and the seed that produced them.
    """
    seed = params.seed
    reasons = []
    for _ in range(max_retries if validate else 1):
        trial = DensityParams(params.p, params.r, params.grid_spacing, params.n, seed)
        samples, reports = select_stem_samples(cloud, index, trial)
        if not validate:
            return samples, reports, seed
        verdict = validate_stem_samples(cloud, samples, compactness_factor, spread_factor)
        if verdict.accepted:
            return samples, reports, seed
        reasons.append(f"seed {seed}: {verdict.reason}")
        seed += 1
    raise StemSelectionError(
        f"stem samples rejected {max_retries} times ({'; '.join(reasons)})"
    )
