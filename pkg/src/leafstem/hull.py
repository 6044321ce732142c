"""3D convex hull (quickhull) and hull-vertex leaf sampling.

The hull vertices ("turning points") are the extreme points of the cloud.
Points lying on a hull face or edge within the plane tolerance are not
vertices, even if the triangulation happens to pass through them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import LEAF, STEM, PointCloud, SpatialIndex, bounding_box

HULL_EPS_FACTOR = 1e-7


class HullError(ValueError):
    """Input has too few points or is degenerate (coplanar/collinear)."""


@dataclass(frozen=True)
class HullMesh:
    vertices: frozenset
    faces: np.ndarray  # (F, 3) point indices, counter-clockwise seen from outside
    eps: float

    def face_planes(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unit outward normals and offsets, so signed distance is ``n @ x - d``."""
        a, b, c = (points[self.faces[:, k]] for k in range(3))
        normals = np.cross(b - a, c - a)
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        return normals, np.einsum("ij,ij->i", normals, a)


@dataclass(frozen=True)
class SampleSet:
    indices: np.ndarray
    kind: int  # LEAF or STEM

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.intp))
        object.__setattr__(self, "indices", idx)
        if self.kind not in (LEAF, STEM):
            raise ValueError(f"unknown sample kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class TrainingSet:
    leaf_indices: np.ndarray
    stem_indices: np.ndarray
    dropped: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))


class _Face:
    __slots__ = ("verts", "normal", "offset", "outside", "alive")

    def __init__(self, verts, normal, offset):
        self.verts = verts
        self.normal = normal
        self.offset = offset
        self.outside = None
        self.alive = True


def _plane(pts, a, b, c):
    n = np.cross(pts[b] - pts[a], pts[c] - pts[a])
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return None, None
    n = n / norm
    return n, float(n @ pts[a])


def _initial_simplex(pts: np.ndarray, eps: float) -> list[int]:
    extremes = np.unique(np.concatenate([pts.argmin(axis=0), pts.argmax(axis=0)]))
    ext = pts[extremes]
    d = ((ext[:, None, :] - ext[None, :, :]) ** 2).sum(axis=2)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    p0, p1 = int(extremes[i]), int(extremes[j])
    axis = pts[p1] - pts[p0]
    length = np.linalg.norm(axis)
    if length <= eps:
        raise HullError("all points coincide")
    axis /= length
    rel = pts - pts[p0]
    off_line = np.linalg.norm(rel - np.outer(rel @ axis, axis), axis=1)
    p2 = int(np.argmax(off_line))
    if off_line[p2] <= eps:
        raise HullError("points are collinear")
    n, off = _plane(pts, p0, p1, p2)
    height = pts @ n - off
    p3 = int(np.argmax(np.abs(height)))
    if abs(height[p3]) <= eps:
        raise HullError("points are coplanar")
    return [p0, p1, p2, p3]


def convex_hull_3d(cloud: PointCloud | np.ndarray, eps: float | None = None) -> HullMesh:
    """Quickhull over the cloud; returns the strict extreme points and a closed triangulation."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n = len(pts)
    if n < 4:
        raise HullError(f"need at least 4 points for a 3D hull, got {n}")
    if eps is None:
        eps = HULL_EPS_FACTOR * float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    simplex = _initial_simplex(pts, eps)
    centroid = pts[simplex].mean(axis=0)

    faces: list[_Face] = []
    edges: dict[tuple[int, int], int] = {}

    def add_face(a, b, c) -> int | None:
        normal, offset = _plane(pts, a, b, c)
        if normal is None:
            return None
        fid = len(faces)
        faces.append(_Face((a, b, c), normal, offset))
        edges[(a, b)] = fid
        edges[(b, c)] = fid
        edges[(c, a)] = fid
        return fid

    p0, p1, p2, p3 = simplex
    for a, b, c in ((p0, p1, p2), (p0, p3, p1), (p1, p3, p2), (p0, p2, p3)):
        normal, offset = _plane(pts, a, b, c)
        if normal @ centroid - offset > 0:
            a, b = b, a
        add_face(a, b, c)

    def assign(cand: np.ndarray, fids: list[int]) -> list[int]:
        if cand.size == 0:
            return []
        normals = np.array([faces[f].normal for f in fids])
        offsets = np.array([faces[f].offset for f in fids])
        dist = pts[cand] @ normals.T - offsets
        best = dist.argmax(axis=1)
        keep = dist[np.arange(len(cand)), best] > eps
        cand, best = cand[keep], best[keep]
        pending = []
        for k, f in enumerate(fids):
            members = cand[best == k]
            if members.size:
                faces[f].outside = members
                pending.append(f)
        return pending

    mask = np.ones(n, dtype=bool)
    mask[simplex] = False
    stack = assign(np.flatnonzero(mask), list(range(4)))

    while stack:
        fid = stack.pop()
        face = faces[fid]
        if not face.alive or face.outside is None:
            continue
        out = face.outside
        dist = pts[out] @ face.normal - face.offset
        eye = int(out[np.argmax(dist)])
        eye_pt = pts[eye]

        visible = {fid}
        frontier = [fid]
        horizon = []
        while frontier:
            f = frontier.pop()
            a, b, c = faces[f].verts
            for e in ((a, b), (b, c), (c, a)):
                nb = edges[(e[1], e[0])]
                if nb in visible:
                    continue
                nbf = faces[nb]
                if nbf.normal @ eye_pt - nbf.offset > eps:
                    visible.add(nb)
                    frontier.append(nb)
                else:
                    horizon.append(e)

        orphans = []
        for f in visible:
            vf = faces[f]
            vf.alive = False
            if vf.outside is not None:
                orphans.append(vf.outside)
                vf.outside = None
            a, b, c = vf.verts
            for e in ((a, b), (b, c), (c, a)):
                if edges.get(e) == f:
                    del edges[e]

        new_fids = []
        for a, b in horizon:
            nf = add_face(a, b, eye)
            if nf is None:
                raise HullError("degenerate face during hull construction")
            new_fids.append(nf)

        if orphans:
            cand = np.concatenate(orphans)
            cand = cand[cand != eye]
            stack.extend(assign(cand, new_fids))

    tris = np.array([f.verts for f in faces if f.alive], dtype=np.intp)
    vertices = _strict_vertices(pts, tris, eps)
    return HullMesh(frozenset(vertices), tris, eps)


def _strict_vertices(pts: np.ndarray, tris: np.ndarray, eps: float) -> list[int]:
    # A vertex is extreme iff the mean of its incident face normals strictly
    # separates it from every neighbour by more than eps.
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    normals = np.cross(b - a, c - a)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    incident: dict[int, list[int]] = {}
    for t, tri in enumerate(tris.tolist()):
        for v in tri:
            incident.setdefault(v, []).append(t)
    keep = []
    for v, ts in incident.items():
        d = normals[ts].sum(axis=0)
        norm = np.linalg.norm(d)
        if norm == 0.0:
            continue
        d /= norm
        nbrs = np.unique(tris[ts].ravel())
        nbrs = nbrs[nbrs != v]
        if np.max((pts[nbrs] - pts[v]) @ d) < -eps:
            keep.append(v)
    return sorted(keep)


def leaf_samples(hull: HullMesh) -> SampleSet:
    return SampleSet(np.array(sorted(hull.vertices), dtype=np.intp), LEAF)


def expand_training(cloud: PointCloud, index: SpatialIndex, samples: SampleSet, r: float) -> np.ndarray:
    """Sorted union of the open balls of radius ``r`` around every sample point."""
    if not r > 0:
        raise ValueError(f"expansion radius must be positive, got {r}")
    if len(samples) == 0:
        raise ValueError("cannot expand an empty sample set")
    hits = index.query_many(cloud.points[samples.indices], r)
    return np.unique(np.concatenate(hits)) if hits else np.empty(0, dtype=np.intp)


def save_off(path, cloud: PointCloud, hull: HullMesh) -> None:
    """ASCII OFF of the hull triangulation (vertices renumbered compactly)."""
    used = np.unique(hull.faces)
    remap = {int(v): k for k, v in enumerate(used)}
    lines = ["OFF", f"{len(used)} {len(hull.faces)} 0"]
    lines += [" ".join(repr(float(c)) for c in cloud.points[v]) for v in used]
    lines += ["3 " + " ".join(str(remap[int(v)]) for v in tri) for tri in hull.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def hull_eps(cloud: PointCloud) -> float:
    return HULL_EPS_FACTOR * bounding_box(cloud).diagonal
