"""Synthetic potted-plant clouds with per-point ground truth.

A plant is an open vertical cylinder (the stem, axis on the z axis, base at
z = 0) with flat elliptical leaves attached to its surface. Each leaf's
midrib leaves the stem at ``leaf_droop_angle`` degrees from vertical, so 0
is upright and 90 is horizontal. The optional slender leaf is a narrow
vertical blade standing next to the stem, the shape that gets mistaken for
stem by the density criterion.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cloud import LEAF, STEM, PointCloud

# leaf attachment heights as fractions of stem height
ATTACH_RANGE = (0.45, 0.95)


@dataclass(frozen=True)
class PlantSpec:
    stem_height: float = 180.0
    stem_radius: float = 2.5
    leaf_count: int = 8
    leaf_length: float = 70.0
    leaf_width: float = 30.0
    leaf_droop_angle: float = 55.0
    points_total: int = 100_000
    noise_sigma: float = 0.02
    slender_leaf: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("stem_height", "stem_radius", "leaf_length", "leaf_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.leaf_count < 0:
            raise ValueError(f"leaf_count must be >= 0, got {self.leaf_count}")
        if self.points_total < 1000:
            raise ValueError(f"points_total must be >= 1000, got {self.points_total}")
        if not 0 <= self.leaf_droop_angle <= 90:
            raise ValueError(f"leaf_droop_angle must lie in [0, 90], got {self.leaf_droop_angle}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def with_seed(self, seed: int) -> "PlantSpec":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class _Leaf:
    base: np.ndarray
    axis: np.ndarray  # unit midrib direction
    across: np.ndarray  # unit width direction
    length: float
    width: float

    @property
    def area(self) -> float:
        return np.pi * self.length * self.width / 4.0

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        rho = np.sqrt(rng.random(k))
        phi = rng.random(k) * 2.0 * np.pi
        s = 0.5 * self.length * (1.0 + rho * np.cos(phi))
        t = 0.5 * self.width * rho * np.sin(phi)
        return self.base + s[:, None] * self.axis + t[:, None] * self.across


def _layout(spec: PlantSpec, rng: np.random.Generator) -> tuple[list[_Leaf], _Leaf]:
    leaves = []
    golden = np.pi * (3.0 - np.sqrt(5.0))
    start = rng.random() * 2 * np.pi
    for k in range(spec.leaf_count):
        theta = start + k * golden + rng.normal(0.0, 0.2)
        h = spec.stem_height * rng.uniform(*ATTACH_RANGE)
        droop = np.deg2rad(np.clip(spec.leaf_droop_angle + rng.normal(0.0, 5.0), 0.0, 90.0))
        radial = np.array([np.cos(theta), np.sin(theta), 0.0])
        across = np.array([-np.sin(theta), np.cos(theta), 0.0])
        axis = np.sin(droop) * radial + np.array([0.0, 0.0, np.cos(droop)])
        leaves.append(
            _Leaf(
                base=spec.stem_radius * radial + np.array([0.0, 0.0, h]),
                axis=axis,
                across=across,
                length=spec.leaf_length * rng.uniform(0.85, 1.15),
                width=spec.leaf_width * rng.uniform(0.85, 1.15),
            )
        )
    # drawn unconditionally so the other leaves do not depend on slender_leaf
    theta = rng.random() * 2 * np.pi
    dist = spec.stem_radius + spec.leaf_length * rng.uniform(0.2, 0.3)
    radial = np.array([np.cos(theta), np.sin(theta), 0.0])
    slender = _Leaf(
        base=dist * radial + np.array([0.0, 0.0, 0.1 * spec.stem_height]),
        axis=np.array([0.0, 0.0, 1.0]),
        across=np.array([-np.sin(theta), np.cos(theta), 0.0]),
        length=0.7 * spec.stem_height,
        width=max(2.0 * spec.stem_radius, 0.12 * spec.leaf_width),
    )
    return leaves, slender


def _split_budget(total: int, areas: list[float]) -> list[int]:
    areas = np.asarray(areas, dtype=np.float64)
    exact = total * areas / areas.sum()
    counts = np.floor(exact).astype(int)
    short = total - counts.sum()
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:short]] += 1
    return counts.tolist()


def generate_plant(spec: PlantSpec) -> tuple[PointCloud, np.ndarray]:
    """Return the cloud and its ground-truth labels (LEAF / STEM per point)."""
    layout_seq, sample_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(3)
    leaves, slender = _layout(spec, np.random.default_rng(layout_seq))
    if spec.slender_leaf:
        leaves = leaves + [slender]
    rng = np.random.default_rng(sample_seq)

    stem_area = 2.0 * np.pi * spec.stem_radius * spec.stem_height
    counts = _split_budget(spec.points_total, [stem_area] + [lf.area for lf in leaves])

    k = counts[0]
    theta = rng.random(k) * 2.0 * np.pi
    z = rng.random(k) * spec.stem_height
    parts = [np.column_stack([spec.stem_radius * np.cos(theta), spec.stem_radius * np.sin(theta), z])]
    labels = [np.full(k, STEM, dtype=np.int8)]
    for leaf, k in zip(leaves, counts[1:]):
        parts.append(leaf.sample(k, rng))
        labels.append(np.full(k, LEAF, dtype=np.int8))

    pts = np.vstack(parts)
    if spec.noise_sigma > 0:
        pts = pts + np.random.default_rng(noise_seq).normal(0.0, spec.noise_sigma, pts.shape)
    return PointCloud(pts), np.concatenate(labels)
