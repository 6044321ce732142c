"""Binary soft-margin SVM trained by SMO.

Labels are +1 for leaf (class1) and -1 for stem (class2). The solver follows
the usual LIBSVM scheme: maintain the gradient of the dual, pick the
maximal-violating ``i`` and a second-order ``j``, update the pair
analytically, stop when the KKT gap ``m - M`` drops below ``tol``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import LEAF, STEM

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_TAU = 1e-12
# above this many training points kernel rows are computed on demand
GRAM_LIMIT = 20_000
_CHUNK = 4096


class SvmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SvmParams:
    C: float = 10.0
    gamma: float | str = "auto"
    tol: float = 1e-3
    max_passes: int = 100
    scaling: bool = True
    kernel: str = "rbf"

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.max_passes >= 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError(f"gamma must be positive or 'auto', got {self.gamma}")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclass
class TrainingDiagnostics:
    alpha: np.ndarray
    y: np.ndarray
    X: np.ndarray  # scaled training features
    objective: list[float] = field(default_factory=list)
    tol: float = 1e-3
    iterations: int = 0
    converged: bool = True
    gap: float = 0.0


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # in scaled feature space
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    mean: np.ndarray
    scale: np.ndarray
    kernel: str = "rbf"
    C: float = float("nan")
    diagnostics: TrainingDiagnostics | None = field(default=None, repr=False, compare=False)

    def transform(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.mean) / self.scale

    def decision_function(self, points) -> np.ndarray:
        X = self.transform(points)
        out = np.empty(len(X))
        for s in range(0, len(X), _CHUNK):
            K = _kernel(X[s:s + _CHUNK], self.support_vectors, self.gamma, self.kernel)
            out[s:s + _CHUNK] = K @ self.dual_coefs + self.bias
        return out


def rbf_kernel(a, b, gamma: float) -> float:
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.exp(-gamma * (d @ d)))


def _kernel(A: np.ndarray, B: np.ndarray, gamma: float, kind: str) -> np.ndarray:
    dot = A @ B.T
    if kind == "linear":
        return dot
    d2 = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * dot
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class _KernelRows:
    """Kernel matrix access: full Gram for small sets, cached rows otherwise."""

    def __init__(self, X, gamma, kind, cache_rows=2048):
        self.X, self.gamma, self.kind = X, gamma, kind
        self.full = _kernel(X, X, gamma, kind) if len(X) <= GRAM_LIMIT // 4 else None
        self.cache: dict[int, np.ndarray] = {}
        self.cache_rows = cache_rows
        if kind == "linear":
            self.diag = (X * X).sum(axis=1)
        else:
            self.diag = np.ones(len(X))

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            if len(self.cache) >= self.cache_rows:
                self.cache.pop(next(iter(self.cache)))
            r = _kernel(self.X[i:i + 1], self.X, self.gamma, self.kind)[0]
            self.cache[i] = r
        return r


def resolve_gamma(params: SvmParams, X: np.ndarray) -> float:
    if params.gamma != "auto":
        return float(params.gamma)
    var = float(X.var(axis=0).mean())
    return 1.0 / (3.0 * var) if var > 0 else 1.0


def train(leaf_points, stem_points, params: SvmParams | None = None) -> SvmModel:
    params = params or SvmParams()
    leaf_points = np.asarray(leaf_points, dtype=np.float64).reshape(-1, 3)
    stem_points = np.asarray(stem_points, dtype=np.float64).reshape(-1, 3)
    if len(leaf_points) == 0 or len(stem_points) == 0:
        raise ValueError(
            f"both classes need training points (leaf={len(leaf_points)}, stem={len(stem_points)})"
        )
    raw = np.vstack([leaf_points, stem_points])
    y = np.concatenate([np.ones(len(leaf_points)), -np.ones(len(stem_points))])

    if params.scaling:
        mean = raw.mean(axis=0)
        scale = raw.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(3), np.ones(3)
    X = (raw - mean) / scale
    gamma = resolve_gamma(params, X)

    alpha, b, diag = _smo(X, y, params.C, gamma, params.kernel, params.tol, params.max_passes)
    sv = alpha > 0
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coefs=(alpha * y)[sv],
        bias=b,
        gamma=gamma,
        mean=mean,
        scale=scale,
        kernel=params.kernel,
        C=params.C,
        diagnostics=diag,
    )


def _smo(X, y, C, gamma, kind, tol, max_passes):
    n = len(X)
    K = _KernelRows(X, gamma, kind)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    diag = TrainingDiagnostics(alpha=alpha, y=y, X=X, objective=[0.0], tol=tol)
    max_iter = max(max_passes * n, 1000)
    pos = y > 0

    it = 0
    m_val = M_val = 0.0
    while True:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_val = score[i]
        M_val = score[low].min()
        if m_val - M_val < tol:
            break
        if it >= max_iter:
            diag.converged = False
            log.warning("SMO stopped after %d iterations with KKT gap %.3g", it, m_val - M_val)
            break

        Ki = K.row(i)
        cand = low & (score < m_val)
        bdiff = m_val - score[cand]
        a = K.diag[i] + K.diag[cand] - 2.0 * Ki[cand]
        a = np.where(a > 0, a, _TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(bdiff * bdiff) / a)])
        Kj = K.row(j)

        ai_old, aj_old = alpha[i], alpha[j]
        quad = K.diag[i] + K.diag[j] - 2.0 * Ki[j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        dai, daj = ai - ai_old, aj - aj_old
        # Q[:, t] = y * y[t] * K[:, t]
        G += y * (y[i] * dai * Ki + y[j] * daj * Kj)
        it += 1
        diag.objective.append(float(alpha.sum() - 0.5 * alpha @ (G + 1.0)))

    diag.iterations = it
    diag.gap = float(m_val - M_val)
    free = (alpha > 0) & (alpha < C)
    if free.any():
        b = float(np.mean(-y[free] * G[free]))
    else:
        b = float((m_val + M_val) / 2.0)
    return alpha, b, diag


def predict(model: SvmModel, points) -> np.ndarray:
    """Leaf where the decision value is >= 0, stem otherwise."""
    f = model.decision_function(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    return np.where(f >= 0, LEAF, STEM).astype(np.int8)


def save_model(path, model: SvmModel) -> None:
    lines = [
        f"leafstem-svm {FORMAT_VERSION}",
        f"kernel {model.kernel}",
        f"gamma {model.gamma!r}",
        f"bias {model.bias!r}",
        f"C {model.C!r}",
        "mean " + " ".join(repr(float(v)) for v in model.mean),
        "scale " + " ".join(repr(float(v)) for v in model.scale),
        f"n_sv {len(model.dual_coefs)}",
    ]
    lines += [
        " ".join(repr(float(v)) for v in (c, *sv))
        for c, sv in zip(model.dual_coefs, model.support_vectors)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> SvmModel:
    lines = Path(path).read_text().splitlines()
    try:
        magic, version = lines[0].split()
        if magic != "leafstem-svm" or int(version) != FORMAT_VERSION:
            raise SvmFormatError(f"{path}: unsupported model header {lines[0]!r}")
        head = {}
        for line in lines[1:8]:
            key, *vals = line.split()
            head[key] = vals
        n_sv = int(head["n_sv"][0])
        body = np.array([[float(v) for v in ln.split()] for ln in lines[8:8 + n_sv]]).reshape(-1, 4)
        if len(body) != n_sv:
            raise SvmFormatError(f"{path}: expected {n_sv} support vectors, found {len(body)}")
        return SvmModel(
            support_vectors=body[:, 1:],
            dual_coefs=body[:, 0],
            bias=float(head["bias"][0]),
            gamma=float(head["gamma"][0]),
            mean=np.array([float(v) for v in head["mean"]]),
            scale=np.array([float(v) for v in head["scale"]]),
            kernel=head["kernel"][0],
            C=float(head["C"][0]),
        )
    except (IndexError, KeyError, ValueError) as exc:
        if isinstance(exc, SvmFormatError):
            raise
        raise SvmFormatError(f"{path}: malformed model file ({exc})") from exc
