"""Conditional independence testing via 1-nearest-neighbor conditional
resampling.

The test asks whether x and y are independent given z.  Pseudo-copies of x
are drawn by looking up, for each test point's z, the nearest z in a held
out reference set and emitting its x; ranking the observed dependence
statistic among the statistics of many such pseudo-samples yields the
p-value.  Supporting pieces (k-NN mutual information, a classifier-based
conditional mutual information estimate, synthetic benchmark families, and
an experiment harness) are exported here.
"""

from .cmi import CmiEstimate, KlEstimate, estimate_cmi, estimate_kl
from .crt import (
    CrtResult,
    TestConfig,
    VARIANTS,
    crt_p_value,
    run_crt_with_oracle,
    run_nnscit,
)
from .data import (
    Dataset,
    IngestionError,
    SplitPair,
    derive_seed,
    load_csv,
    make_rng,
    split,
    subsample,
    write_csv,
)
from .knn_mi import MiEstimate, digamma, estimate_mi
from .mlp import MlpClassifier, TrainConfig, predict_proba, save_weights, train
from .neighbors import NnIndex, build_index, sample_1nn
from .synth import (
    FAMILIES,
    ScenarioSpec,
    UnsupportedFamilyError,
    generate,
    model_params,
    oracle_conditional_sampler,
)
from .bench import (
    ExperimentConfig,
    GofReport,
    SweepReport,
    SweepRow,
    TimingRow,
    gof_report,
    run_experiment,
    timing_report,
)

__version__ = "0.1.0"

__all__ = [
    "CmiEstimate",
    "CrtResult",
    "Dataset",
    "ExperimentConfig",
    "FAMILIES",
    "GofReport",
    "IngestionError",
    "KlEstimate",
    "MiEstimate",
    "MlpClassifier",
    "NnIndex",
    "ScenarioSpec",
    "SplitPair",
    "SweepReport",
    "SweepRow",
    "TestConfig",
    "TimingRow",
    "TrainConfig",
    "UnsupportedFamilyError",
    "VARIANTS",
    "build_index",
    "crt_p_value",
    "derive_seed",
    "digamma",
    "estimate_cmi",
    "estimate_kl",
    "estimate_mi",
    "generate",
    "gof_report",
    "load_csv",
    "make_rng",
    "model_params",
    "oracle_conditional_sampler",
    "predict_proba",
    "run_crt_with_oracle",
    "run_experiment",
    "run_nnscit",
    "sample_1nn",
    "save_weights",
    "split",
    "subsample",
    "timing_report",
    "train",
    "write_csv",
    "__version__",
]
