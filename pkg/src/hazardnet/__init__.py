"""Predict when links form in temporal heterogeneous networks.

Pipeline: temporal graph -> windowed meta-path count features -> censored
survival dataset -> non-parametric or parametric proportional-hazards
GLM -> probability/quantile/sampling queries and ranking metrics.
"""

from .graph import (
    GraphError,
    LinkType,
    Schema,
    SparseCountMatrix,
    TemporalGraph,
    load_graph,
    load_graph_file,
    load_schema,
    spmm,
    time_aware_adjacency,
    transpose,
)
from .metapaths import (
    MetaPath,
    MetaPathError,
    PairSeries,
    PrefixCache,
    SnapshotPlan,
    dynamic_series,
    metapath_matrix,
    parse_metapath,
    read_metapath_file,
)
from .datasets import (
    Dataset,
    DatasetError,
    LabeledSample,
    Standardization,
    WindowConfig,
    aggregate_expsmooth,
    aggregate_stack,
    build_dataset,
    candidate_pairs,
    label_pairs,
    load_dataset,
    save_dataset,
    subsample_censored,
)
from .npglm import (
    FitConfig,
    NpGlmModel,
    TimeEstimate,
    compute_H,
    fit,
    interpolate_H,
    link_g,
    loss,
    optimize_w,
    predict_median,
    quantile,
    quantile_times,
    ranged_probability,
    sample_time,
)
from .baselines import ParametricGlmModel, fit_parametric
from .synthetic import SynthConfig, SynthOutput, generate
from .metrics import EvalReport, concordance_index, evaluate, point_metrics

__version__ = "0.1.0"

__all__ = [
    "GraphError", "LinkType", "Schema", "SparseCountMatrix", "TemporalGraph",
    "load_graph", "load_graph_file", "load_schema", "spmm",
    "time_aware_adjacency", "transpose",
    "MetaPath", "MetaPathError", "PairSeries", "PrefixCache", "SnapshotPlan",
    "dynamic_series", "metapath_matrix", "parse_metapath", "read_metapath_file",
    "Dataset", "DatasetError", "LabeledSample", "Standardization",
    "WindowConfig", "aggregate_expsmooth", "aggregate_stack", "build_dataset",
    "candidate_pairs", "label_pairs", "load_dataset", "save_dataset",
    "subsample_censored",
    "FitConfig", "NpGlmModel", "TimeEstimate", "compute_H", "fit",
    "interpolate_H", "link_g", "loss", "optimize_w", "predict_median",
    "quantile", "quantile_times", "ranged_probability", "sample_time",
    "ParametricGlmModel", "fit_parametric",
    "SynthConfig", "SynthOutput", "generate",
    "EvalReport", "concordance_index", "evaluate", "point_metrics",
    "__version__",
]
