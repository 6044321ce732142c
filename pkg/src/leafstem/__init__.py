"""Leaf/stem separation of plant point clouds with hull and density sampling plus an SVM."""
from .cloud import LEAF, STEM, PointCloud, load_labels, load_xyz
from .density import DensityParams
from .pipeline import PipelineConfig, run
from .svm import SvmParams

__all__ = ["LEAF", "STEM", "PointCloud", "load_xyz", "load_labels", "DensityParams",
           "PipelineConfig", "SvmParams", "run"]
