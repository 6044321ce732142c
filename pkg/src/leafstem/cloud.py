"""Point-cloud container, ASCII I/O and exact radius-neighbourhood queries.

Coordinates are float64 millimetres. Labels are small integers:
``LEAF = 1`` and ``STEM = 2``, the same codes written to disk.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

LEAF = 1
STEM = 2
LABEL_NAMES = {LEAF: "leaf", STEM: "stem"}

PLY_COLORS = {LEAF: (0, 255, 0), STEM: (255, 0, 0)}

# tree radius is padded so rounding inside the tree never drops a true member
_PAD = 1.0 + 1e-9


class CloudFormatError(ValueError):
    """Malformed point or label file."""


@dataclass(frozen=True)
class PointCloud:
    """Ordered, immutable set of 3D points; index ``i`` is row ``i``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, indices) -> "PointCloud":
        return PointCloud(self.points[np.asarray(indices, dtype=np.intp)])


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.min) & (points <= self.max), axis=1)


def as_labels(labels: Iterable) -> np.ndarray:
    """Coerce labels (1/2 codes or 'leaf'/'stem' strings) to an int8 array."""
    out = []
    for lab in labels:
        if isinstance(lab, str):
            key = lab.strip().lower()
            if key in ("leaf", "1"):
                out.append(LEAF)
            elif key in ("stem", "2"):
                out.append(STEM)
            else:
                raise ValueError(f"unknown label {lab!r}")
        else:
            val = int(lab)
            if val not in (LEAF, STEM) or val != lab:
                raise ValueError(f"unknown label {lab!r}")
            out.append(val)
    return np.asarray(out, dtype=np.int8)


def _read_rows(path) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CloudFormatError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            rows.append((lineno, stripped.split()))
    return rows


def load_xyz(path) -> PointCloud:
    """Read an ASCII ``x y z [extra...]`` file; ``#`` lines and blanks are skipped."""
    coords = []
    for lineno, fields in _read_rows(path):
        if len(fields) < 3:
            raise CloudFormatError(
                f"{path}:{lineno}: expected at least 3 numeric fields, got {len(fields)}"
            )
        try:
            xyz = [float(f) for f in fields[:3]]
        except ValueError as exc:
            raise CloudFormatError(f"{path}:{lineno}: {exc}") from exc
        if not all(np.isfinite(xyz)):
            raise CloudFormatError(f"{path}:{lineno}: non-finite coordinate")
        coords.append(xyz)
    return PointCloud(np.array(coords, dtype=np.float64).reshape(-1, 3))


def load_labels(path) -> np.ndarray:
    """Read labels from a labeled XYZ file (4th column) or a one-label-per-line file."""
    rows = _read_rows(path)
    if not rows:
        raise CloudFormatError(f"{path}: no labels found")
    col = 3 if len(rows[0][1]) >= 4 else 0
    labels = []
    for lineno, fields in rows:
        if len(fields) <= col or (col == 0 and len(fields) != 1):
            raise CloudFormatError(f"{path}:{lineno}: cannot locate label column")
        try:
            labels.append(as_labels([_label_token(fields[col])])[0])
        except ValueError as exc:
            raise CloudFormatError(f"{path}:{lineno}: {exc}") from exc
    return np.asarray(labels, dtype=np.int8)


def _label_token(tok: str):
    try:
        return float(tok)
    except ValueError:
        return tok


def _fmt(v: float) -> str:
    # repr() is the shortest round-tripping decimal; drop the ".0" on integers
    v = float(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def save_labeled(path, cloud: PointCloud, labels: Sequence) -> None:
    labels = as_labels(labels)
    if len(labels) != len(cloud):
        raise ValueError(f"{len(labels)} labels for {len(cloud)} points")
    lines = [
        f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {lab}\n"
        for (x, y, z), lab in zip(cloud.points.tolist(), labels.tolist())
    ]
    Path(path).write_text("".join(lines))


def save_xyz(path, cloud: PointCloud) -> None:
    Path(path).write_text(
        "".join(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in cloud.points.tolist())
    )


def save_ply(path, cloud: PointCloud, labels: Sequence) -> None:
    """ASCII PLY with leaf points green and stem points red."""
    labels = as_labels(labels)
    if len(labels) != len(cloud):
        raise ValueError(f"{len(labels)} labels for {len(cloud)} points")
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    body = []
    for (x, y, z), lab in zip(cloud.points.tolist(), labels.tolist()):
        r, g, b = PLY_COLORS[lab]
        body.append(f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {r} {g} {b}\n")
    Path(path).write_text(header + "".join(body))


def bounding_box(cloud: PointCloud) -> Aabb:
    if len(cloud) == 0:
        raise ValueError("bounding box of an empty cloud")
    return Aabb(cloud.points.min(axis=0), cloud.points.max(axis=0))


class SpatialIndex:
    """k-d tree over a cloud answering open-ball queries exactly.

    The tree returns the closed ball; points at distance exactly ``r`` are
    filtered out afterwards so membership is ``|p - c|^2 < r^2``.
    """

    def __init__(self, cloud: PointCloud, leafsize: int = 16, workers: int = 1):
        if len(cloud) == 0:
            raise ValueError("cannot index an empty cloud")
        self.cloud = cloud
        self.workers = workers
        self._tree = cKDTree(cloud.points, leafsize=leafsize)

    def _strict(self, center: np.ndarray, r: float, cand) -> np.ndarray:
        cand = np.asarray(cand, dtype=np.intp)
        if cand.size == 0:
            return cand
        d2 = ((self.cloud.points[cand] - center) ** 2).sum(axis=1)
        return np.sort(cand[d2 < r * r])

    def query(self, center, r: float) -> np.ndarray:
        """Sorted indices strictly inside the ball of radius ``r`` around ``center``."""
        if not r > 0:
            raise ValueError(f"query radius must be positive, got {r}")
        center = np.asarray(center, dtype=np.float64)
        return self._strict(center, r, self._tree.query_ball_point(center, r * _PAD))

    def query_many(self, centers: np.ndarray, r: float) -> list[np.ndarray]:
        if not r > 0:
            raise ValueError(f"query radius must be positive, got {r}")
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        hits = self._tree.query_ball_point(centers, r * _PAD, workers=self.workers)
        return [self._strict(c, r, h) for c, h in zip(centers, hits)]


def build_index(cloud: PointCloud, workers: int = 1) -> SpatialIndex:
    return SpatialIndex(cloud, workers=workers)


def radius_query(index: SpatialIndex, center, r: float) -> set[int]:
    return set(index.query(center, r).tolist())
