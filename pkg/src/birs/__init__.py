"""Binary and re-search (BiRS) signal region detection with the DCF two-sample test."""

from .dcf import (
    CenteredPair,
    bootstrap_critical_value,
    bootstrap_replicate,
    center_columns,
    column_statistics,
    critical_value_from_replicates,
    dcf_statistic,
    dcf_test,
    normalized_sum,
)
from .detect import BirsConfig, binary_search_round, birs_detect, rearrange, split_region, zero_out
from .fileio import MatrixFile, read_matrix, read_result, write_matrix, write_result
from .metrics import EvalReport, eval_detection, jaccard, prop1_bound
from .model import DetectedSegment, DetectionResult, Region, TestOutcome, region_union_size
from .rng import RngStream, make_rng, sample_standard_normal, substream
from .scan import ScanConfig, scan_detect
from .simulation import ExperimentConfig, ExperimentResult, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BirsConfig",
    "CenteredPair",
    "DetectedSegment",
    "DetectionResult",
    "EvalReport",
    "ExperimentConfig",
    "ExperimentResult",
    "MatrixFile",
    "Region",
    "RngStream",
    "ScanConfig",
    "TestOutcome",
    "binary_search_round",
    "birs_detect",
    "bootstrap_critical_value",
    "bootstrap_replicate",
    "center_columns",
    "column_statistics",
    "critical_value_from_replicates",
    "dcf_statistic",
    "dcf_test",
    "eval_detection",
    "jaccard",
    "make_rng",
    "normalized_sum",
    "prop1_bound",
    "read_matrix",
    "read_result",
    "rearrange",
    "region_union_size",
    "run_experiment",
    "sample_standard_normal",
    "scan_detect",
    "split_region",
    "substream",
    "write_matrix",
    "write_result",
    "zero_out",
]
