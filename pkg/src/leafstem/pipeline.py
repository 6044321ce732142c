"""End-to-end leaf/stem classification and the random-selection baseline."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .cloud import LEAF, STEM, PointCloud, SpatialIndex, as_labels, build_index
from .density import DensityParams, DensityReport, select_validated_stem_samples
from .hull import SampleSet, TrainingSet, convex_hull_3d, expand_training, leaf_samples
from .metrics import ConfusionMatrix, confusion, report_record
from .svm import SvmModel, SvmParams, predict, train

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


def default_svm_params() -> SvmParams:
    """RBF on raw millimetre coordinates, width matched to the 5 mm density sphere.

    gamma = 1 / (2 * 5**2). Standardized features with gamma='auto' give a
    kernel as wide as the whole plant, which swallows the leaf bases.
    """
    return SvmParams(scaling=False, gamma=0.02)


@dataclass(frozen=True)
class PipelineConfig:
    r1: float = 0.2
    r2: float = 0.2
    density: DensityParams = field(default_factory=DensityParams)
    svm: SvmParams = field(default_factory=default_svm_params)
    validate: bool = True
    max_retries: int = 10
    compactness_factor: float = 0.25
    spread_factor: float = 0.3
    overlap_limit: float = 0.1
    threads: int = 1

    def __post_init__(self):
        if not self.r1 > 0:
            raise ValueError(f"r1 must be positive, got {self.r1}")
        if not self.r2 > 0:
            raise ValueError(f"r2 must be positive, got {self.r2}")
        if self.max_retries < 1:
            raise ValueError(f"max_retries must be >= 1, got {self.max_retries}")
        if not 0 < self.compactness_factor:
            raise ValueError(f"compactness_factor must be positive, got {self.compactness_factor}")
        if not 0 <= self.spread_factor <= 1:
            raise ValueError(f"spread_factor must lie in [0, 1], got {self.spread_factor}")
        if not 0 <= self.overlap_limit <= 1:
            raise ValueError(f"overlap_limit must lie in [0, 1], got {self.overlap_limit}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def params(self) -> dict:
        """Flat parameter dict for reports."""
        return {
            "r1": self.r1,
            "r2": self.r2,
            **{k: v for k, v in asdict(self.density).items() if k != "seed"},
            **asdict(self.svm),
            "validate": self.validate,
            "max_retries": self.max_retries,
            "compactness_factor": self.compactness_factor,
            "spread_factor": self.spread_factor,
        }


@dataclass
class PipelineResult:
    labels: np.ndarray
    leaf_samples: SampleSet
    stem_samples: SampleSet
    training: TrainingSet
    model: SvmModel
    density_reports: list[DensityReport]
    stem_seed: int
    confusion: ConfusionMatrix | None = None
    report: dict | None = None

    @property
    def kappa(self) -> float | None:
        return None if self.confusion is None else self.confusion.kappa


def resolve_overlap(leaf_idx: np.ndarray, stem_idx: np.ndarray, limit: float) -> TrainingSet:
    """Drop points claimed by both training sets; abort if too many are lost."""
    both = np.intersect1d(leaf_idx, stem_idx)
    if both.size:
        for name, idx in (("leaf", leaf_idx), ("stem", stem_idx)):
            frac = both.size / idx.size
            if frac > limit:
                raise PipelineError(
                    f"{both.size} points lie in both training sets "
                    f"({frac:.1%} of the {name} set, limit {limit:.0%})"
                )
        leaf_idx = np.setdiff1d(leaf_idx, both)
        stem_idx = np.setdiff1d(stem_idx, both)
    return TrainingSet(leaf_idx, stem_idx, both)


def _score(result: PipelineResult, truth, method: str, seed, params: dict) -> None:
    truth = as_labels(truth) if not isinstance(truth, np.ndarray) else truth
    cm = confusion(truth, result.labels)
    result.confusion = cm
    result.report = report_record(cm, method, seed, **params)


def run(config: PipelineConfig, cloud: PointCloud, truth=None, index: SpatialIndex | None = None) -> PipelineResult:
    """Hull leaf samples, density stem samples, SVM over both, classify every point."""
    if len(cloud) < 4:
        raise PipelineError(f"cloud has {len(cloud)} points; a 3D hull needs at least 4")
    if len(cloud) < config.density.p:
        raise PipelineError(f"cloud has {len(cloud)} points, fewer than p={config.density.p}")
    if truth is not None and len(truth) != len(cloud):
        raise PipelineError(f"{len(truth)} truth labels for {len(cloud)} points")
    index = index or build_index(cloud, workers=config.threads)

    hull = convex_hull_3d(cloud)
    leaves = leaf_samples(hull)
    x_leaf = expand_training(cloud, index, leaves, config.r1)
    log.info("hull: %d leaf samples, %d leaf training points", len(leaves), len(x_leaf))

    stems, reports, stem_seed = select_validated_stem_samples(
        cloud,
        index,
        config.density,
        validate=config.validate,
        max_retries=config.max_retries,
        compactness_factor=config.compactness_factor,
        spread_factor=config.spread_factor,
    )
    x_stem = expand_training(cloud, index, stems, config.r2)
    log.info("density: %d stem samples (seed %d), %d stem training points", len(stems), stem_seed, len(x_stem))

    training = resolve_overlap(x_leaf, x_stem, config.overlap_limit)
    if training.dropped.size:
        log.warning("dropped %d points present in both training sets", training.dropped.size)
    pts = cloud.points
    model = train(pts[training.leaf_indices], pts[training.stem_indices], config.svm)
    labels = predict(model, pts)

    result = PipelineResult(labels, leaves, stems, training, model, reports, stem_seed)
    if truth is not None:
        _score(result, truth, "automated", config.density.seed, config.params())
    return result


def random_baseline(
    cloud: PointCloud,
    truth,
    k: int,
    r1: float = 0.2,
    r2: float = 0.2,
    seed: int = 0,
    svm_params: SvmParams | None = None,
    max_retries: int = 10,
    index: SpatialIndex | None = None,
) -> PipelineResult:
    """Random points split by their true organ, expanded, trained and scored."""
    truth = as_labels(truth) if not isinstance(truth, np.ndarray) else truth
    if len(truth) != len(cloud):
        raise PipelineError(f"{len(truth)} truth labels for {len(cloud)} points")
    if k > len(cloud):
        raise PipelineError(f"k={k} exceeds cloud size {len(cloud)}")
    if k < 2:
        raise PipelineError(f"k must be >= 2, got {k}")
    if not (r1 > 0 and r2 > 0):
        raise ValueError("r1 and r2 must be positive")
    index = index or build_index(cloud)
    svm_params = svm_params or default_svm_params()

    draw_seed = seed
    for _ in range(max_retries):
        picks = np.random.default_rng(draw_seed).choice(len(cloud), size=k, replace=False)
        leaf_pick = picks[truth[picks] == LEAF]
        stem_pick = picks[truth[picks] == STEM]
        if leaf_pick.size and stem_pick.size:
            break
        draw_seed += 1
    else:
        raise PipelineError(f"no draw of {k} points covered both classes in {max_retries} tries")

    leaves = SampleSet(leaf_pick, LEAF)
    stems = SampleSet(stem_pick, STEM)
    x_leaf = expand_training(cloud, index, leaves, r1)
    x_stem = expand_training(cloud, index, stems, r2)
    # organ labels are exact here, so the two sets can only meet in the noise
    training = resolve_overlap(x_leaf, x_stem, 1.0)
    model = train(cloud.points[training.leaf_indices], cloud.points[training.stem_indices], svm_params)
    result = PipelineResult(predict(model, cloud.points), leaves, stems, training, model, [], draw_seed)
    params = {"k": k, "r1": r1, "r2": r2, **asdict(svm_params)}
    _score(result, truth, "random", seed, params)
    return result
