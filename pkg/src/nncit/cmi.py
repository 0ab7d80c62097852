"""Classifier-based divergence and conditional mutual information estimates.

A binary classifier trained to separate two sample sets yields, through its
predicted class-1 probability a, the likelihood ratio a / (1 - a); plugging
the ratio into the variational (Donsker-Varadhan) bound gives a KL
divergence estimate.  Conditional mutual information follows as the
difference of two such divergences, I(x; y, z) - I(x; z), where the second
sample set of each divergence is built by permuting the x column.

Before training, both classes pass through a common feature map fitted on
the training rows only: a triangular decorrelation of the columns followed
by an appended interaction of the last two decorrelated columns.  Both
steps are injective and applied identically to the two classes, so the
divergence between the class laws is exactly unchanged; the map only
re-expresses covariance-level class differences (which a gradient-trained
network picks up slowly, if at all) as mean-level differences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .data import Dataset, derive_seed, make_rng
from .mlp import TrainConfig, predict_proba, train

__all__ = ["KlEstimate", "CmiEstimate", "estimate_kl", "estimate_cmi",
           "CLIP_EPS", "MIN_CLASS_ROWS", "MIN_CMI_ROWS"]

_KL_STREAM = 30
_CMI_STREAM = 31

# predicted probabilities are clipped to [CLIP_EPS, 1 - CLIP_EPS] before the
# likelihood ratio is formed, bounding every log-ratio by log((1-eps)/eps)
CLIP_EPS = 1e-3
MIN_CLASS_ROWS = 30
MIN_CMI_ROWS = 90
# the appended interaction column is replicated so that its share of the
# first-layer gradient keeps up with the (possibly wide) nuisance block;
# the classifier spreads capacity uniformly across input columns otherwise
_INTERACTION_COPIES = 12


@dataclass(frozen=True)
class KlEstimate:
    """Divergence estimate together with the per-class sample counts."""

    value: float
    n_f: int
    n_g: int


@dataclass(frozen=True)
class CmiEstimate:
    """Conditional mutual information with its two divergence parts.

    value equals i_xyz - i_xz exactly as computed, so the decomposition can
    be checked bit for bit.
    """

    value: float
    i_xyz: float
    i_xz: float


def _three_folds(n_rows: int, rng: np.random.Generator):
    """Rotation of (2/3 train, 1/3 eval) index pairs covering every row.

    Each third of a random permutation serves once as the evaluation set
    for a classifier trained on the remaining two thirds.
    """
    parts = np.array_split(rng.permutation(n_rows), 3)
    folds = []
    for i, eval_idx in enumerate(parts):
        train_idx = np.concatenate([parts[j] for j in range(3) if j != i])
        folds.append((train_idx, eval_idx))
    return folds


def _dv_value(model, eval_f, eval_g) -> float:
    """Variational divergence estimate from held-out rows of both classes."""
    ratio_f = _likelihood_ratio(model, eval_f)
    ratio_g = _likelihood_ratio(model, eval_g)
    return float(np.mean(np.log(ratio_f)) - np.log(np.mean(ratio_g)))


def _likelihood_ratio(model, rows) -> np.ndarray:
    proba = predict_proba(model, rows)
    proba = np.clip(proba, CLIP_EPS, 1.0 - CLIP_EPS)
    return proba / (1.0 - proba)


def _fit_feature_map(train_rows):
    """Injective feature map fitted on training rows only.

    Columns are decorrelated by solving against the Cholesky factor of the
    (lightly ridged) covariance, then the product of the last two
    decorrelated columns is appended.  Adding a deterministic function of
    existing columns keeps the map injective, so divergences between the
    two class laws are unchanged while covariance-level differences, such
    as two variables coupling only through their conditional correlation,
    become mean-level differences the classifier can reach at first order.
    """
    rows = np.asarray(train_rows, dtype=np.float64)
    mu = rows.mean(axis=0)
    centered = rows - mu
    cov = centered.T @ centered / max(rows.shape[0] - 1, 1)
    p = cov.shape[0]
    # ridge grows with p/n so near-singular sample covariances stay stable
    lam = (np.trace(cov) / p) * max(1e-8, 1e-2 * p / max(rows.shape[0], 1))
    chol = cholesky(cov + (lam + 1e-12) * np.eye(p), lower=True)

    def apply(rows):
        white = solve_triangular(chol, (rows - mu).T, lower=True).T
        if white.shape[1] >= 2:
            inter = white[:, -1] * white[:, -2]
            copies = np.tile(inter[:, None], (1, _INTERACTION_COPIES))
            return np.column_stack((white, copies))
        return white

    return apply


def _kl_core(rows_f, rows_g, folds_f, folds_g, cfg: TrainConfig) -> float:
    """Cross-fitted divergence: average of the per-fold estimates."""
    values = []
    for fold, ((train_f, eval_f), (train_g, eval_g)) in enumerate(
        zip(folds_f, folds_g)
    ):
        feature_map = _fit_feature_map(
            np.vstack((rows_f[train_f], rows_g[train_g]))
        )
        mapped_f = feature_map(rows_f)
        mapped_g = feature_map(rows_g)
        model = train(
            mapped_f[train_f],
            mapped_g[train_g],
            replace(cfg, seed=derive_seed(cfg.seed, fold)),
        )
        values.append(_dv_value(model, mapped_f[eval_f], mapped_g[eval_g]))
    return float(np.mean(values))


def estimate_kl(samples_f, samples_g, cfg: TrainConfig) -> KlEstimate:
    """KL divergence of the law of samples_f from the law of samples_g.

    The estimate is cross-fitted: each third of a class's rows serves once
    as the evaluation set for a classifier trained on the other two
    thirds, so every row is scored out-of-sample, and the three fold
    estimates are averaged.  The shared feature map appends an interaction
    of the last two columns, so callers probing a dependence between two
    particular variables should place that pair last.
    """
    rows_f = np.ascontiguousarray(samples_f, dtype=np.float64)
    rows_g = np.ascontiguousarray(samples_g, dtype=np.float64)
    if rows_f.ndim == 1:
        rows_f = rows_f[:, None]
    if rows_g.ndim == 1:
        rows_g = rows_g[:, None]
    if rows_f.ndim != 2 or rows_g.ndim != 2:
        raise ValueError("sample arrays must be two-dimensional")
    if rows_f.shape[1] != rows_g.shape[1]:
        raise ValueError(
            f"feature width mismatch: {rows_f.shape[1]} vs {rows_g.shape[1]}"
        )
    for name, rows in (("f", rows_f), ("g", rows_g)):
        if rows.shape[0] < MIN_CLASS_ROWS:
            raise ValueError(
                f"class {name} has {rows.shape[0]} rows, "
                f"need at least {MIN_CLASS_ROWS}"
            )
    rng = make_rng(cfg.seed, (_KL_STREAM,))
    folds_f = _three_folds(rows_f.shape[0], rng)
    folds_g = _three_folds(rows_g.shape[0], rng)
    value = _kl_core(
        rows_f, rows_g, folds_f, folds_g,
        replace(cfg, seed=derive_seed(cfg.seed, _KL_STREAM, 1)),
    )
    return KlEstimate(value=value, n_f=rows_f.shape[0], n_g=rows_g.shape[0])


def estimate_cmi(data: Dataset, cfg: TrainConfig) -> CmiEstimate:
    """Conditional mutual information of x and y given z.

    Both divergence parts reuse one cross-fit rotation of the rows; the
    product-law class of each part permutes the x column with its own
    independent permutation.  Within every fold, train and eval rows never
    mix, so each per-fold estimate is out-of-sample.
    """
    if data.n < MIN_CMI_ROWS:
        raise ValueError(
            f"need at least {MIN_CMI_ROWS} samples, got {data.n}"
        )
    rng = make_rng(cfg.seed, (_CMI_STREAM,))
    row_folds = _three_folds(data.n, rng)
    perm_xyz = rng.permutation(data.n)
    perm_xz = rng.permutation(data.n)

    # conditioning columns first, tested pair last, so the feature map's
    # appended interaction lands on the decorrelated (y, x) pair
    joint_xyz = np.column_stack((data.z, data.y, data.x))
    prod_xyz = np.column_stack((data.z, data.y, data.x[perm_xyz]))
    i_xyz = _kl_core(
        joint_xyz, prod_xyz, row_folds, row_folds,
        replace(cfg, seed=derive_seed(cfg.seed, _CMI_STREAM, 1)),
    )

    joint_xz = np.column_stack((data.z, data.x))
    prod_xz = np.column_stack((data.z, data.x[perm_xz]))
    i_xz = _kl_core(
        joint_xz, prod_xz, row_folds, row_folds,
        replace(cfg, seed=derive_seed(cfg.seed, _CMI_STREAM, 2)),
    )
    return CmiEstimate(value=i_xyz - i_xz, i_xyz=i_xyz, i_xz=i_xz)
