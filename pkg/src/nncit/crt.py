"""Conditional randomization test driven by 1-NN conditional resampling.

The data are split into a sampling fold and a test fold.  The observed
statistic is computed on the test fold; then, many times over, a reference
subset is redrawn from the sampling fold, pseudo-x values are emitted at
the test fold's z coordinates by exact 1-nearest-neighbor lookup, and each
pseudo sample is scored.  The p-value is the tie-inclusive rank of the
observed statistic among the null scores.

Statistic variants:
  eq6 (default): observed = classifier-based conditional mutual information
      of the test fold; null scores = k-NN mutual information between the
      pseudo-x draws and y.  Two classifier trainings total.
  eq5: both sides use the classifier-based conditional mutual information.
      Costs n_resamples + 1 classifier-CMI evaluations in total.
  eq7: both sides use the k-NN mutual information between x (or pseudo-x)
      and y, ignoring z in the scoring.  No classifier at all.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cmi import MIN_CMI_ROWS, estimate_cmi
from .data import Dataset, derive_seed, make_rng, split, subsample
from .knn_mi import estimate_mi
from .mlp import TrainConfig
from .neighbors import build_index, sample_1nn

__all__ = ["VARIANTS", "TestConfig", "CrtResult", "crt_p_value",
           "run_nnscit", "run_crt_with_oracle"]

VARIANTS = ("eq5", "eq6", "eq7")

_OBS_STREAM = 20
_NULL_STREAM = 21


@dataclass(frozen=True)
class TestConfig:
    """Settings for one test invocation."""

    n_resamples: int = 500
    k: int = 3
    alpha: float = 0.05
    variant: str = "eq6"
    seed: int = 0
    classifier: TrainConfig = field(default_factory=TrainConfig)
    # classifier-CMI evaluations averaged per statistic: a single train/eval
    # pass on a one-third test fold is heavy-tailed (an occasional unlucky
    # fit sends the difference of the two divergence parts negative), and
    # averaging a few independently seeded replicates removes those
    # collapses without touching the estimator itself
    cmi_repeats: int = 3

    def __post_init__(self):
        if self.n_resamples < 1:
            raise ValueError("n_resamples must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}, expected one of {VARIANTS}"
            )
        if self.cmi_repeats < 1:
            raise ValueError("cmi_repeats must be >= 1")


@dataclass(frozen=True)
class CrtResult:
    """Outcome of one conditional randomization test."""

    p_value: float
    statistic: float
    null_stats: np.ndarray
    decision: str
    variant: str
    seed: int
    wall_time_s: float


def crt_p_value(null_stats, observed: float) -> float:
    """(1 + #{null >= observed}) / (1 + M); ties count toward the null."""
    nulls = np.asarray(null_stats, dtype=np.float64)
    if nulls.ndim != 1 or nulls.shape[0] == 0:
        raise ValueError("null_stats must be a nonempty one-dimensional array")
    exceed = int(np.count_nonzero(nulls >= observed))
    return float((1 + exceed) / (1 + nulls.shape[0]))


def _check_inputs(data: Dataset, cfg: TestConfig) -> None:
    test_rows = data.n // 3
    # the classifier CMI is computed on the test fold, which must satisfy
    # that estimator's own minimum row count
    if cfg.variant != "eq7" and test_rows < MIN_CMI_ROWS:
        raise ValueError(
            f"variant {cfg.variant} needs a test fold of at least "
            f"{MIN_CMI_ROWS} rows ({3 * MIN_CMI_ROWS} samples in total), "
            f"got {test_rows}"
        )
    # the test fold must keep more rows than the k-NN scorer needs
    if test_rows <= cfg.k:
        raise ValueError(
            f"test fold of {test_rows} rows cannot support k={cfg.k}"
        )


def _averaged_cmi(data: Dataset, cfg: TestConfig, seed_parts) -> float:
    values = [
        estimate_cmi(
            data,
            replace(cfg.classifier, seed=derive_seed(cfg.seed, *seed_parts, r)),
        ).value
        for r in range(cfg.cmi_repeats)
    ]
    return float(np.mean(values))


def _observed_stat(test_fold: Dataset, cfg: TestConfig) -> float:
    if cfg.variant == "eq7":
        return estimate_mi(test_fold.x, test_fold.y, cfg.k).value
    return _averaged_cmi(test_fold, cfg, (_OBS_STREAM,))


def _null_stat(pseudo_x: np.ndarray, test_fold: Dataset, cfg: TestConfig,
               m: int) -> float:
    if cfg.variant == "eq5":
        return _averaged_cmi(test_fold.with_x(pseudo_x), cfg, (_NULL_STREAM, m))
    return estimate_mi(pseudo_x, test_fold.y, cfg.k).value


def _run(data: Dataset, cfg: TestConfig, draw_pseudo_x) -> CrtResult:
    start = time.perf_counter()
    _check_inputs(data, cfg)
    pair = split(data, cfg.seed)
    sampling_fold, test_fold = pair.u1, pair.u2
    observed = _observed_stat(test_fold, cfg)
    null_stats = np.empty(cfg.n_resamples, dtype=np.float64)
    for m in range(1, cfg.n_resamples + 1):
        try:
            rng = make_rng(cfg.seed, (_NULL_STREAM, m))
            pseudo_x = draw_pseudo_x(sampling_fold, test_fold, rng)
            null_stats[m - 1] = _null_stat(pseudo_x, test_fold, cfg, m)
        except Exception as exc:
            raise RuntimeError(f"resampling repetition {m} failed: {exc}") from exc
    null_stats.setflags(write=False)
    p_value = crt_p_value(null_stats, observed)
    decision = "reject-H0" if p_value < cfg.alpha else "accept-H0"
    return CrtResult(
        p_value=p_value,
        statistic=observed,
        null_stats=null_stats,
        decision=decision,
        variant=cfg.variant,
        seed=cfg.seed,
        wall_time_s=time.perf_counter() - start,
    )


def run_nnscit(data: Dataset, cfg: TestConfig) -> CrtResult:
    """Conditional independence test of x and y given z on one Dataset.

    Each resampling repetition draws its own reference subset (the size of
    the test fold) from the sampling fold, rebuilds the 1-NN index on it,
    and emits pseudo-x values at the test fold's z coordinates.  Every
    repetition owns a private random stream keyed by its index, so results
    do not depend on execution order.
    """

    def draw(sampling_fold: Dataset, test_fold: Dataset,
             rng: np.random.Generator) -> np.ndarray:
        reference = subsample(sampling_fold, test_fold.n, rng)
        return sample_1nn(build_index(reference), test_fold)

    return _run(data, cfg, draw)


def run_crt_with_oracle(data: Dataset, sampler, cfg: TestConfig) -> CrtResult:
    """Same test with pseudo-x drawn from a caller-supplied conditional law.

    sampler(z_rows, rng) must return one x value per row of z_rows.  Used
    to validate the test's p-value behaviour when exact conditional draws
    are available.
    """

    def draw(sampling_fold: Dataset, test_fold: Dataset,
             rng: np.random.Generator) -> np.ndarray:
        pseudo_x = np.asarray(sampler(test_fold.z, rng), dtype=np.float64)
        if pseudo_x.shape != (test_fold.n,):
            raise ValueError(
                f"oracle sampler returned shape {pseudo_x.shape}, "
                f"expected ({test_fold.n},)"
            )
        return pseudo_x

    return _run(data, cfg, draw)
