"""Scattering features and class-geometry statistics for hyperspectral data."""

from .errors import HsigeoError
from .fst3d import FilterBank3D, FstConfig, StageConfig, build_filter_bank, scatter_cube, scatter_patch
from .geometry import (
    ClassMeans,
    CompressionCurves,
    SymMatrixReport,
    class_means,
    class_variability,
    compression_curve,
    delta_matrix,
    mean_angle_matrix,
    mean_distance_matrix,
)
from .hsi_io import (
    FeatureSet,
    LabeledCube,
    assemble_feature_set,
    flatten_labeled_pixels,
    load_array,
    normalize_max_norm,
    save_array,
)
from .margins import MarginConfig, MarginResult, max_margin, pairwise_margins, separability_check
from .neural_collapse import NcReport, etf_angle_degrees, make_simplex_etf, nc_report

__version__ = "0.1.0"
