"""Tests for the classifier-based divergence and CMI estimators."""

import numpy as np
import pytest

from nncit.cmi import (
    CLIP_EPS,
    MIN_CLASS_ROWS,
    MIN_CMI_ROWS,
    CmiEstimate,
    KlEstimate,
    _dv_value,
    _fit_feature_map,
    _three_folds,
    estimate_cmi,
    estimate_kl,
)
from nncit.data import Dataset
from nncit.mlp import MlpClassifier, TrainConfig

# fewer epochs than the production default keep these tests quick while
# leaving the estimates accurate enough for coarse tolerances
_FAST = TrainConfig(epochs=60, seed=0)


def _constant_model(n_features=2):
    """All-zero network: predicts probability 1/2 for every row."""
    widths = [n_features, 3, 1]
    return MlpClassifier(
        weights=[np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:])],
        biases=[np.zeros(b) for b in widths[1:]],
        feature_mean=np.zeros(n_features),
        feature_scale=np.ones(n_features),
    )


def _gaussian_dataset(n, dependent, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 3))
    x = z @ np.array([0.6, 0.3, 0.1]) + rng.normal(size=n)
    noise = rng.normal(size=n)
    y = z @ np.array([0.2, 0.5, 0.3]) + (1.5 * x if dependent else 0.0) + noise
    return Dataset(x=x, y=y, z=z)


class TestFolds:
    def test_three_folds_partition_rows(self):
        rng = np.random.default_rng(0)
        folds = _three_folds(100, rng)
        assert len(folds) == 3
        all_eval = np.concatenate([e for _, e in folds])
        assert np.array_equal(np.sort(all_eval), np.arange(100))
        for train_idx, eval_idx in folds:
            assert np.intersect1d(train_idx, eval_idx).size == 0
            assert train_idx.size + eval_idx.size == 100


class TestFeatureMap:
    def test_map_is_injective_affine_plus_interaction(self):
        rng = np.random.default_rng(1)
        rows = rng.normal(size=(200, 4)) @ rng.normal(size=(4, 4))
        apply = _fit_feature_map(rows)
        mapped = apply(rows)
        # appended columns are all copies of the product of the last two
        # decorrelated coordinates
        base = mapped[:, :4]
        extras = mapped[:, 4:]
        expect = base[:, -1] * base[:, -2]
        for j in range(extras.shape[1]):
            np.testing.assert_allclose(extras[:, j], expect)
        # decorrelation: sample covariance of the base block near identity
        cov = np.cov(base.T)
        off_diag = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off_diag)) < 0.05
        assert np.allclose(np.diag(cov), 1.0, atol=0.1)

    def test_single_column_passes_through_without_interaction(self):
        rng = np.random.default_rng(2)
        rows = rng.normal(size=(50, 1))
        mapped = _fit_feature_map(rows)(rows)
        assert mapped.shape == (50, 1)

    def test_map_applies_to_new_rows(self):
        rng = np.random.default_rng(3)
        apply = _fit_feature_map(rng.normal(size=(100, 2)))
        out = apply(rng.normal(size=(7, 2)))
        assert out.shape[0] == 7 and np.all(np.isfinite(out))


class TestDvValue:
    def test_constant_predictor_gives_exactly_zero(self):
        # a constant likelihood ratio cancels between the two class terms,
        # so a no-signal classifier can never fabricate divergence
        model = _constant_model()
        rng = np.random.default_rng(4)
        value = _dv_value(model, rng.normal(size=(40, 2)),
                          rng.normal(size=(60, 2)) + 5.0)
        assert value == 0.0

    def test_value_bounded_by_twice_the_clip_log_ratio(self):
        # each class term is capped by log((1-eps)/eps) in absolute value
        bound = 2.0 * np.log((1.0 - CLIP_EPS) / CLIP_EPS)
        rng = np.random.default_rng(5)
        # saturated network: probabilities pinned at the clip boundaries
        model = MlpClassifier(
            weights=[np.full((2, 3), 50.0), np.full((3, 1), 50.0)],
            biases=[np.zeros(3), np.zeros(1)],
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
        )
        value = _dv_value(model, rng.normal(size=(30, 2)) + 3.0,
                          rng.normal(size=(30, 2)) + 3.0)
        assert abs(value) <= bound + 1e-12


class TestEstimateKl:
    def test_identical_laws_give_small_value(self):
        rng = np.random.default_rng(6)
        est = estimate_kl(rng.normal(size=(300, 2)),
                          rng.normal(size=(300, 2)), _FAST)
        assert isinstance(est, KlEstimate)
        assert est.n_f == 300 and est.n_g == 300
        assert abs(est.value) < 0.1

    def test_mean_shifted_gaussians_recovered(self):
        # KL(N(1,1) || N(0,1)) = 1/2
        rng = np.random.default_rng(7)
        est = estimate_kl(rng.normal(size=600) + 1.0,
                          rng.normal(size=600), _FAST)
        assert 0.2 < est.value < 0.8

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(8)
        f = rng.normal(size=(120, 2))
        g = rng.normal(size=(120, 2)) + 0.5
        a = estimate_kl(f, g, TrainConfig(epochs=15, seed=3))
        b = estimate_kl(f, g, TrainConfig(epochs=15, seed=3))
        assert a == b

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError, match="width mismatch"):
            estimate_kl(np.ones((40, 2)), np.ones((40, 3)), _FAST)

    def test_too_few_rows_rejected(self):
        good = np.random.default_rng(9).normal(size=(MIN_CLASS_ROWS, 2))
        bad = good[: MIN_CLASS_ROWS - 1]
        with pytest.raises(ValueError, match="need at least"):
            estimate_kl(bad, good, _FAST)
        with pytest.raises(ValueError, match="need at least"):
            estimate_kl(good, bad, _FAST)


class TestEstimateCmi:
    def test_value_is_exact_difference_of_parts(self):
        data = _gaussian_dataset(150, dependent=True, seed=10)
        est = estimate_cmi(data, TrainConfig(epochs=20, seed=4))
        assert isinstance(est, CmiEstimate)
        assert est.value == est.i_xyz - est.i_xz

    def test_conditionally_independent_pair_scores_near_zero(self):
        data = _gaussian_dataset(400, dependent=False, seed=11)
        est = estimate_cmi(data, _FAST)
        assert abs(est.value) < 0.15

    def test_dependent_pair_scores_clearly_positive(self):
        data = _gaussian_dataset(400, dependent=True, seed=12)
        est = estimate_cmi(data, _FAST)
        assert est.value > 0.15

    def test_deterministic_for_fixed_seed(self):
        data = _gaussian_dataset(120, dependent=True, seed=13)
        cfg = TrainConfig(epochs=15, seed=5)
        assert estimate_cmi(data, cfg) == estimate_cmi(data, cfg)

    def test_seed_changes_estimate(self):
        data = _gaussian_dataset(120, dependent=True, seed=14)
        a = estimate_cmi(data, TrainConfig(epochs=15, seed=6))
        b = estimate_cmi(data, TrainConfig(epochs=15, seed=7))
        assert a.value != b.value

    def test_too_few_rows_rejected(self):
        data = _gaussian_dataset(MIN_CMI_ROWS - 1, dependent=False, seed=15)
        with pytest.raises(ValueError, match="need at least"):
            estimate_cmi(data, _FAST)
