"""Tests for logistic regression, group LASSO and likelihood-ratio tests."""

import numpy as np
import pytest

from eureka.exceptions import ModelError
from eureka.glm import (
    LogisticModel,
    accuracy,
    bonferroni,
    chi_square_sf,
    fit_group_lasso,
    fit_logistic,
    fit_null,
    group_lasso_lambda_max,
    log_likelihood,
    lr_test,
    penalized_gradient,
    penalized_objective,
    predict,
    predict_proba,
)

from .common import make_design, planted_group_design


def _naive_log_likelihood(p, y):
    return float(np.sum(y * np.log(p) + (1 - y) * np.log(1 - p)))


class TestPenalizedLoss:
    """Test the penalized objective and its gradient."""

    def test_gradient_matches_finite_differences(self):
        """Test the analytic gradient on 20 random small instances."""
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(20):
            n, p = rng.integers(5, 51), rng.integers(1, 11)
            values = rng.standard_normal((n, p))
            y = rng.integers(0, 2, size=n).astype(float)
            beta = rng.normal(0.0, 0.5, size=p + 1)
            l2_lambda = float(rng.uniform(0.0, 2.0))

            numeric = np.array(
                [
                    (
                        penalized_objective(beta + h * e, values, y, l2_lambda)
                        - penalized_objective(beta - h * e, values, y, l2_lambda)
                    )
                    / (2 * h)
                    for e in np.eye(p + 1)
                ]
            )
            analytic = penalized_gradient(beta, values, y, l2_lambda)

            error = np.linalg.norm(numeric - analytic) / np.linalg.norm(analytic)
            assert error < 1e-5

    def test_intercept_is_not_penalized(self):
        """Test that only the weights carry the ridge term."""
        values = np.zeros((4, 1))
        y = np.array([0.0, 1.0, 0.0, 1.0])
        beta = np.array([3.0, 2.0])

        difference = penalized_objective(beta, values, y, 1.0) - penalized_objective(
            beta, values, y, 0.0
        )

        assert difference == pytest.approx(2.0)


class TestFitLogistic:
    """Test IRLS fitting."""

    def test_objective_path_non_increasing(self):
        """Test that every accepted IRLS step descends."""
        for seed in range(5):
            X = planted_group_design(seed, n=150)

            model = fit_logistic(X, l2_lambda=1e-4)

            assert len(model.objective_path) == model.n_iter + 1
            assert np.all(np.diff(model.objective_path) <= 0.0)
            assert model.converged
            assert model.grad_norm <= 1e-6

    def test_one_dimensional_grid_minimum(self):
        """Test two points with lambda=1 against a brute-force grid."""
        X = make_design([[-1.0], [1.0]], [0, 1])
        values, y = X.values, X.labels.astype(float)

        def grid_minimum(ws, bs):
            W, B = np.meshgrid(ws, bs, indexing="ij")
            eta = B[..., None] + W[..., None] * values[:, 0]
            loss = np.sum(np.logaddexp(0.0, eta) - y * eta, axis=-1) + 0.5 * W**2
            i, j = np.unravel_index(np.argmin(loss), loss.shape)
            return ws[i], bs[j]

        coarse = np.arange(-5.0, 5.0 + 1e-9, 1e-2)
        w0, b0 = grid_minimum(coarse, coarse)
        fine_w = np.arange(w0 - 0.02, w0 + 0.02 + 1e-9, 1e-3)
        fine_b = np.arange(b0 - 0.02, b0 + 0.02 + 1e-9, 1e-3)
        w_grid, b_grid = grid_minimum(fine_w, fine_b)

        model = fit_logistic(X, l2_lambda=1.0)

        assert model.weights[0] == pytest.approx(w_grid, abs=1e-3)
        assert model.intercept == pytest.approx(b_grid, abs=1e-3)

    def test_all_positive_labels(self):
        """Test the degenerate single-class case."""
        X = make_design(np.random.default_rng(1).standard_normal((30, 2)), [1] * 30)

        model = fit_logistic(X, l2_lambda=0.0)

        assert model.intercept > 20
        np.testing.assert_allclose(model.weights, 0.0, atol=1e-6)
        assert np.all(predict_proba(model, X) > 0.999)

    def test_separable_data_stays_finite(self):
        """Test that the default ridge keeps a perfect separator finite."""
        X = make_design([[-2.0], [-1.0], [1.0], [2.0]], [0, 0, 1, 1])

        model = fit_logistic(X)

        assert np.all(np.isfinite(model.weights))
        assert accuracy(model, X) == 1.0

    def test_rejects_bad_input(self):
        """Test label and lambda validation."""
        with pytest.raises(ModelError, match="0/1"):
            fit_logistic(make_design([[0.0], [1.0]], [0, 2]))
        with pytest.raises(ModelError):
            fit_logistic(make_design([[0.0], [1.0]], [0, 1]), l2_lambda=-1.0)

    def test_max_iter_reports_not_converged(self):
        """Test that an early stop is flagged."""
        X = planted_group_design(3, n=200)

        model = fit_logistic(X, max_iter=1)

        assert model.n_iter == 1
        assert not model.converged
        assert model.grad_norm > 1e-6

    def test_keeps_column_labels(self):
        """Test that fitted models carry the design-matrix labels."""
        X = make_design([[0.0], [1.0], [2.0], [3.0]], [0, 1, 0, 1], names=["Light"])

        assert fit_logistic(X).column_labels == ("Light",)


class TestPrediction:
    """Test probabilities, predictions and accuracy."""

    def test_zero_model_predicts_positive(self):
        """Test that probability 0.5 predicts class 1."""
        model = LogisticModel(intercept=0.0, weights=np.zeros(2))
        X = make_design(np.ones((3, 2)), [0, 1, 0])

        np.testing.assert_allclose(predict_proba(model, X), 0.5)
        np.testing.assert_array_equal(predict(model, X), [1, 1, 1])
        assert accuracy(model, X) == pytest.approx(1 / 3)

    def test_width_mismatch(self):
        """Test that a model rejects a design matrix of another width."""
        model = LogisticModel(intercept=0.0, weights=np.zeros(3))

        with pytest.raises(ModelError, match="columns"):
            predict(model, make_design(np.ones((2, 2)), [0, 1]))

    def test_rule_summary(self):
        """Test the printable rule lines."""
        model = LogisticModel(
            intercept=0.1,
            weights=np.array([1.5, 0.0, -0.25]),
            column_labels=("Light", "Noise", "Weekday=Mon"),
            classes=("0", "1"),
        )

        assert model.rule_summary() == [
            "+ Light → 1 (weight +1.5000)",
            "- Weekday=Mon → 1 (weight -0.2500)",
        ]

    def test_serialization(self):
        """Test the model JSON layout."""
        model = LogisticModel(
            intercept=-0.5,
            weights=np.array([2.0]),
            l2_lambda=1e-4,
            column_labels=("Light",),
        )

        document = model.to_dict()
        restored = LogisticModel.from_dict(document)

        assert set(document) >= {"intercept", "weights", "column_labels", "lambda"}
        assert restored.intercept == -0.5
        np.testing.assert_array_equal(restored.weights, [2.0])
        assert restored.l2_lambda == 1e-4


class TestLogLikelihood:
    """Test Bernoulli log-likelihoods and the null model."""

    def test_single_fair_coin(self):
        """Test one row at probability one half."""
        model = LogisticModel(intercept=0.0, weights=np.zeros(1))

        assert log_likelihood(model, make_design([[3.0]], [1])) == pytest.approx(
            -np.log(2)
        )

    def test_confident_predictions(self):
        """Test that perfect confident predictions have likelihood near 1."""
        model = LogisticModel(intercept=0.0, weights=np.array([50.0]))

        ll = log_likelihood(model, make_design([[-1.0], [1.0]], [0, 1]))

        assert -1e-12 < ll <= 0.0

    def test_matches_naive_sum(self):
        """Test against direct summation on a random 20-point set."""
        rng = np.random.default_rng(4)
        X = make_design(rng.standard_normal((20, 3)), rng.integers(0, 2, size=20))
        model = LogisticModel(intercept=0.3, weights=rng.normal(size=3))

        expected = _naive_log_likelihood(predict_proba(model, X), X.labels)

        assert log_likelihood(model, X) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize(
        ("labels", "intercept"), [([0, 1, 0, 1], 0.0), ([1, 1, 1, 0], np.log(3))]
    )
    def test_fit_null_closed_form(self, labels, intercept):
        """Test the intercept-only model."""
        model = fit_null(labels, width=2)

        assert model.intercept == pytest.approx(intercept)
        np.testing.assert_array_equal(model.weights, [0.0, 0.0])

    def test_null_log_likelihood_identity(self):
        """Test LL_null = n[ybar log ybar + (1 - ybar) log(1 - ybar)]."""
        labels = np.random.default_rng(5).integers(0, 2, size=37)
        ybar = labels.mean()
        X = make_design(np.zeros((37, 1)), labels)

        ll = log_likelihood(fit_null(labels, width=1), X)

        expected = 37 * (ybar * np.log(ybar) + (1 - ybar) * np.log(1 - ybar))
        assert ll == pytest.approx(expected)

    def test_fit_null_needs_labels(self):
        """Test that an empty label vector is rejected."""
        with pytest.raises(ModelError):
            fit_null([])


class TestChiSquare:
    """Test the chi-square upper tail."""

    def test_zero_statistic(self):
        """Test sf(0, k) = 1."""
        for df in (1, 2, 5, 30):
            assert chi_square_sf(0.0, df) == 1.0

    def test_two_degrees_closed_form(self):
        """Test sf(x, 2) = exp(-x/2) over [0, 20]."""
        for x in np.linspace(0.0, 20.0, 201):
            assert abs(chi_square_sf(x, 2) - np.exp(-x / 2)) < 1e-10
        assert chi_square_sf(2.0, 2) == pytest.approx(0.367879, abs=1e-6)

    def test_critical_values(self):
        """Test familiar one-degree critical values."""
        assert chi_square_sf(3.84, 1) == pytest.approx(0.050, abs=1e-3)
        assert chi_square_sf(10.83, 1) == pytest.approx(0.001, abs=1e-4)

    def test_monotone(self):
        """Test that the tail decreases in x."""
        tails = [chi_square_sf(x, 3) for x in np.linspace(0.0, 30.0, 61)]

        assert np.all(np.diff(tails) < 0)

    def test_invalid_arguments(self):
        """Test the domain checks."""
        with pytest.raises(ValueError):
            chi_square_sf(1.0, 0)
        with pytest.raises(ValueError):
            chi_square_sf(-1.0, 1)


class TestBonferroni:
    """Test the Bonferroni correction."""

    def test_threshold(self):
        """Test flags against alpha / m."""
        assert bonferroni([0.01, 0.2], alpha=0.05) == [True, False]

    def test_single_test(self):
        """Test that one test uses the plain threshold."""
        assert bonferroni([0.049]) == [True]

    def test_boundary_is_not_significant(self):
        """Test the strict inequality."""
        assert bonferroni([0.0125] * 4, alpha=0.05) == [False] * 4

    def test_empty(self):
        """Test that no p-values give no flags."""
        assert bonferroni([]) == []


class TestLikelihoodRatioTest:
    """Test the likelihood-ratio test."""

    def test_null_against_itself(self):
        """Test that the null model gives statistic 0 and p = 1."""
        labels = [0, 1, 1, 0, 1]
        X = make_design(np.arange(5.0), labels)
        null = fit_null(labels, width=1)

        result = lr_test(null, null, X, df=1)

        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert not result.significant_after_bonferroni

    def test_informative_feature_is_significant(self):
        """Test a strong effect and the Bonferroni flag."""
        X = planted_group_design(6, n=300).select(["g2"])
        full = fit_logistic(X)

        result = lr_test(full, fit_null(X.labels, X.width), X, df=2, m_tests=5)

        assert result.statistic > 0
        assert result.p_value < 0.01 / 5
        assert result.significant_after_bonferroni
        assert result.to_dict()["m_tests"] == 5

    def test_statistic_is_non_negative(self):
        """Test the zero floor with a model worse than the null."""
        labels = [0, 1, 0, 1]
        X = make_design(np.array([1.0, -1.0, 1.0, -1.0]), labels)
        worse = LogisticModel(intercept=2.0, weights=np.array([0.0]))

        result = lr_test(worse, fit_null(labels, 1), X, df=1)

        assert result.statistic >= 0.0

    def test_invalid_df(self):
        """Test that df must be positive."""
        null = fit_null([0, 1])

        with pytest.raises(ValueError):
            lr_test(null, null, make_design([[0.0], [1.0]], [0, 1]), df=0)

    @pytest.mark.slow
    def test_calibration_under_null(self):
        """Test the rejection rate with labels independent of the feature."""
        rng = np.random.default_rng(7)
        rejections = 0
        for _ in range(1000):
            values = rng.standard_normal((200, 1))
            labels = rng.permutation(np.repeat([0, 1], 100))
            X = make_design(values, labels)

            result = lr_test(fit_logistic(X), fit_null(labels, 1), X, df=1)

            rejections += result.p_value < 0.05

        assert 0.03 <= rejections / 1000 <= 0.07


class TestGroupLasso:
    """Test the group-LASSO solver."""

    def test_lambda_max_zeroes_every_group(self):
        """Test that lambda_max returns the null model exactly."""
        X = planted_group_design(8)
        lam_max = group_lasso_lambda_max(X)

        fit = fit_group_lasso(X, lam=lam_max)

        assert not any(fit.active.values())
        assert np.all(fit.model.weights == 0.0)
        assert fit.model.intercept == pytest.approx(fit_null(X.labels).intercept)

    def test_large_lambda(self):
        """Test that a huge penalty also gives the null model."""
        fit = fit_group_lasso(planted_group_design(9), lam=1e6)

        assert not any(fit.active.values())

    def test_just_below_lambda_max_activates(self):
        """Test that the strongest group enters below lambda_max."""
        X = planted_group_design(10)

        fit = fit_group_lasso(X, lam=0.9 * group_lasso_lambda_max(X))

        assert fit.active == {f"g{g}": g == 2 for g in range(5)}

    def test_zero_lambda_matches_ridge_free_fit(self):
        """Test that lambda=0 reaches the unpenalized optimum."""
        X = planted_group_design(11)

        fit = fit_group_lasso(X, lam=0.0, tol=1e-7, max_iter=20000)
        reference = fit_logistic(X, l2_lambda=1e-10)

        mean_loss = reference.objective_path[-1] / X.n_rows
        assert fit.objective == pytest.approx(mean_loss, abs=1e-4)

    def test_block_kkt_conditions(self):
        """Test the zero-group optimality condition."""
        X = planted_group_design(12)
        lam = 0.3 * group_lasso_lambda_max(X)

        fit = fit_group_lasso(X, lam=lam)

        assert fit.model.converged
        for name, active in fit.active.items():
            start, stop = X.groups[name]
            if not active:
                assert fit.group_gradients[name] <= lam * np.sqrt(stop - start) + 1e-4

    def test_warm_start(self):
        """Test that a warm start reaches the same solution."""
        X = planted_group_design(13)
        lam = 0.2 * group_lasso_lambda_max(X)
        cold = fit_group_lasso(X, lam=lam)

        warm = fit_group_lasso(X, lam=lam, init=cold.model)

        assert warm.active == cold.active
        assert warm.objective == pytest.approx(cold.objective, abs=1e-6)

    def test_groups_must_partition(self):
        """Test group and lambda validation."""
        X = planted_group_design(14)

        with pytest.raises(ValueError, match="partition"):
            fit_group_lasso(X, groups={"a": (0, 3), "b": (4, 10)}, lam=0.01)
        with pytest.raises(ValueError):
            fit_group_lasso(X, lam=-0.1)

    @pytest.mark.slow
    def test_planted_group_enters_first(self):
        """Test the informative group leads the path in at least 95/100 trials."""
        hits = 0
        for seed in range(100):
            X = planted_group_design(1000 + seed)
            lam_max = group_lasso_lambda_max(X)

            at_max = fit_group_lasso(X, lam=lam_max)
            entering = max(at_max.group_gradients, key=at_max.group_gradients.get)
            below = fit_group_lasso(X, lam=0.9 * lam_max)

            hits += entering == "g2" and below.active["g2"]

        assert hits >= 95
