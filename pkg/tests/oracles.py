"""Brute-force reference implementations used only by the tests."""
import numpy as np
from scipy.optimize import linprog


def extreme_points(pts):
    """Indices of points that are not a convex combination of the others (one LP each)."""
    pts = np.asarray(pts, dtype=np.float64)
    out = set()
    for v in range(len(pts)):
        others = np.delete(pts, v, axis=0)
        A = np.vstack([others.T, np.ones(len(others))])
        b = np.append(pts[v], 1.0)
        res = linprog(np.zeros(len(others)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if res.status == 2:  # infeasible
            out.add(v)
        elif res.status != 0:
            raise RuntimeError(f"LP failed for point {v}: {res.message}")
    return out


def ball(pts, center, r):
    d2 = ((np.asarray(pts) - np.asarray(center)) ** 2).sum(axis=1)
    return set(np.flatnonzero(d2 < r * r).tolist())


def density(pts, center, r, g):
    """Linear scan plus a set of cell tuples."""
    inside = [p for p in pts if sum((p[k] - center[k]) ** 2 for k in range(3)) < r * r]
    cells = {
        (int(np.floor((p[0] - (center[0] - r)) / g)), int(np.floor((p[1] - (center[1] - r)) / g)))
        for p in inside
    }
    l = len(inside)
    return l, len(cells), (l / len(cells) if cells else 0.0)


def kappa_from_marginals(tp, tn, fp, fn):
    """Cohen's kappa written out from the 2x2 table, independent of the library code."""
    table = np.array([[tp, fn], [fp, tn]], dtype=float)  # rows: truth, cols: prediction
    n = table.sum()
    observed = np.trace(table) / n
    expected = float((table.sum(axis=1) / n) @ (table.sum(axis=0) / n))
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)
