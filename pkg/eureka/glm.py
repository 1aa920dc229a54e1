"""Logistic regression, group LASSO and likelihood-ratio testing."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging
from typing import Any

import numpy as np
import scipy.linalg
from scipy.special import expit, gammaincc

from .const import (
    DEFAULT_ALPHA,
    DEFAULT_GL_MAX_ITER,
    DEFAULT_GL_TOL,
    DEFAULT_L2_LAMBDA,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    IRLS_RIDGE_FLOOR,
    MAX_STEP_HALVINGS,
)
from .data import DesignMatrix
from .exceptions import ModelError

_LOGGER = logging.getLogger(__name__)

_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LogisticModel:
    """Fitted binary logistic regression ``P(y=1) = sigmoid(b + x.w)``."""

    intercept: float
    weights: np.ndarray
    l2_lambda: float = 0.0
    converged: bool = True
    grad_norm: float = 0.0
    column_labels: tuple[str, ...] = ()
    n_iter: int = 0
    objective_path: tuple[float, ...] = ()
    classes: tuple[str, ...] = ("0", "1")

    @property
    def width(self) -> int:
        """Number of weights."""
        return int(self.weights.size)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the model JSON layout."""
        return {
            "intercept": float(self.intercept),
            "weights": [float(w) for w in self.weights],
            "column_labels": list(self.column_labels),
            "lambda": self.l2_lambda,
            "converged": self.converged,
            "grad_norm": float(self.grad_norm),
            "n_iter": self.n_iter,
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> LogisticModel:
        """Inverse of :meth:`to_dict`."""
        return cls(
            intercept=float(document["intercept"]),
            weights=np.asarray(document["weights"], dtype=float),
            l2_lambda=float(document.get("lambda", 0.0)),
            converged=bool(document.get("converged", True)),
            grad_norm=float(document.get("grad_norm", 0.0)),
            column_labels=tuple(document.get("column_labels", ())),
            n_iter=int(document.get("n_iter", 0)),
            classes=tuple(document.get("classes", ("0", "1"))),
        )

    def rule_summary(self) -> list[str]:
        """One ``sign(weight) feature → class`` line per nonzero weight."""
        positive = self.classes[-1]
        labels = self.column_labels or tuple(f"x{j}" for j in range(self.width))
        lines = []
        for label, weight in zip(labels, self.weights):
            if weight == 0:
                continue
            sign = "+" if weight > 0 else "-"
            lines.append(f"{sign} {label} → {positive} (weight {weight:+.4f})")
        return lines


@dataclass(frozen=True)
class TestResult:
    """Likelihood-ratio test of a fitted model against the intercept-only null."""

    __test__ = False

    statistic: float
    df: int
    p_value: float
    significant_after_bonferroni: bool
    alpha: float
    m_tests: int

    def to_dict(self) -> dict[str, Any]:
        """Serialize for reports."""
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "significant_after_bonferroni": self.significant_after_bonferroni,
            "alpha": self.alpha,
            "m_tests": self.m_tests,
        }


def _unpack(X: DesignMatrix) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(X.values, dtype=float)
    y = np.asarray(X.labels)
    if not np.all(np.isin(y, (0, 1))):
        raise ModelError("Logistic models need binary labels encoded as 0/1")
    if not np.all(np.isfinite(values)):
        raise ModelError("Design matrix contains non-finite values")
    return values, y.astype(float)


def _linear_predictor(model: LogisticModel, values: np.ndarray) -> np.ndarray:
    if model.width == 0:
        return np.full(values.shape[0], float(model.intercept))
    if values.shape[1] != model.width:
        raise ModelError(
            f"Design matrix has {values.shape[1]} columns, model expects {model.width}"
        )
    return model.intercept + values @ model.weights


def penalized_objective(
    beta: np.ndarray, values: np.ndarray, y: np.ndarray, l2_lambda: float
) -> float:
    """Negative log-likelihood plus ``(lambda/2)||w||^2``; ``beta = [b, w...]``."""
    eta = beta[0] + values @ beta[1:]
    nll = np.sum(np.logaddexp(0.0, eta) - y * eta)
    return float(nll + 0.5 * l2_lambda * beta[1:] @ beta[1:])


def penalized_gradient(
    beta: np.ndarray, values: np.ndarray, y: np.ndarray, l2_lambda: float
) -> np.ndarray:
    """Gradient of :func:`penalized_objective` with respect to ``[b, w...]``."""
    residual = expit(beta[0] + values @ beta[1:]) - y
    grad = np.empty_like(beta)
    grad[0] = residual.sum()
    grad[1:] = values.T @ residual + l2_lambda * beta[1:]
    return grad


def _null_intercept(y: np.ndarray) -> float:
    ybar = float(np.clip(np.mean(y), _PROB_FLOOR, 1.0 - _PROB_FLOOR))
    return float(np.log(ybar / (1.0 - ybar)))


def fit_logistic(
    X: DesignMatrix,
    l2_lambda: float = DEFAULT_L2_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LogisticModel:
    """Fit L2-penalized logistic regression by IRLS with step-halving.

    Minimizes ``NLL + (lambda/2)||w||^2`` (intercept unpenalized). Each
    Newton step is halved until the objective does not increase, so the
    objective path is non-increasing.

    Raises:
        ModelError: Non-binary labels, non-finite values or negative lambda.
    """
    if l2_lambda < 0:
        raise ModelError("l2_lambda must be non-negative")
    values, y = _unpack(X)
    n, p = values.shape
    design = np.hstack([np.ones((n, 1)), values])
    penalty = np.full(p + 1, l2_lambda)
    penalty[0] = 0.0

    beta = np.zeros(p + 1)
    beta[0] = _null_intercept(y)
    objective = penalized_objective(beta, values, y, l2_lambda)
    path = [objective]
    grad = penalized_gradient(beta, values, y, l2_lambda)
    n_iter = 0
    while n_iter < max_iter and np.linalg.norm(grad) > tol:
        mu = expit(design @ beta)
        weight = mu * (1.0 - mu)
        hessian = design.T @ (design * weight[:, None])
        hessian[np.diag_indices_from(hessian)] += penalty + IRLS_RIDGE_FLOOR
        try:
            step = scipy.linalg.solve(hessian, grad, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = np.linalg.lstsq(hessian, grad, rcond=None)[0]

        scale = 1.0
        for _ in range(MAX_STEP_HALVINGS):
            candidate = beta - scale * step
            value = penalized_objective(candidate, values, y, l2_lambda)
            if value <= objective:
                break
            scale *= 0.5
        else:
            _LOGGER.debug("IRLS stalled at iteration %d: no descent step", n_iter)
            break
        beta, objective = candidate, value
        path.append(objective)
        n_iter += 1
        grad = penalized_gradient(beta, values, y, l2_lambda)

    grad_norm = float(np.linalg.norm(grad))
    converged = grad_norm <= tol
    if not converged:
        _LOGGER.debug(
            "IRLS stopped after %d iterations with gradient norm %.3g",
            n_iter,
            grad_norm,
        )
    return LogisticModel(
        intercept=float(beta[0]),
        weights=beta[1:].copy(),
        l2_lambda=l2_lambda,
        converged=converged,
        grad_norm=grad_norm,
        column_labels=X.column_labels,
        n_iter=n_iter,
        objective_path=tuple(path),
        classes=X.classes,
    )


def predict_proba(model: LogisticModel, X: DesignMatrix) -> np.ndarray:
    """Probabilities of the positive class."""
    return expit(_linear_predictor(model, np.asarray(X.values, dtype=float)))


def predict(model: LogisticModel, X: DesignMatrix) -> np.ndarray:
    """Class predictions; probability exactly 0.5 predicts the positive class."""
    return (predict_proba(model, X) >= 0.5).astype(int)


def accuracy(model: LogisticModel, X: DesignMatrix) -> float:
    """Fraction of rows whose thresholded prediction equals the label."""
    return float(np.mean(predict(model, X) == np.asarray(X.labels)))


def log_likelihood(model: LogisticModel, X: DesignMatrix) -> float:
    """Bernoulli log-likelihood ``sum y log p + (1-y) log(1-p)``, unpenalized."""
    values, y = _unpack(X)
    eta = _linear_predictor(model, values)
    return float(-np.sum(np.logaddexp(0.0, eta) - y * eta))


def fit_null(y: np.ndarray | Sequence[int], width: int = 0) -> LogisticModel:
    """Intercept-only model ``log(ybar / (1 - ybar))`` with zero weights."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ModelError("Cannot fit a null model without labels")
    return LogisticModel(intercept=_null_intercept(y), weights=np.zeros(width))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail chi-square probability ``Q(df/2, x/2)``."""
    if df < 1:
        raise ValueError(f"Degrees of freedom must be at least 1, got {df}")
    if x < 0:
        raise ValueError(f"Chi-square statistic must be non-negative, got {x}")
    return float(gammaincc(df / 2.0, x / 2.0))


def bonferroni(p_values: Sequence[float], alpha: float = DEFAULT_ALPHA) -> list[bool]:
    """Flag ``p < alpha / m`` for each of ``m`` p-values."""
    if not p_values:
        return []
    threshold = alpha / len(p_values)
    return [p < threshold for p in p_values]


def lr_test(
    full: LogisticModel,
    null: LogisticModel,
    X: DesignMatrix,
    df: int,
    alpha: float = DEFAULT_ALPHA,
    m_tests: int = 1,
) -> TestResult:
    """Likelihood-ratio test of ``full`` against ``null`` on ``X``.

    The statistic uses unpenalized log-likelihoods and is floored at zero.

    Raises:
        ValueError: ``df < 1`` or ``m_tests < 1``.
    """
    if df < 1:
        raise ValueError(f"Degrees of freedom must be at least 1, got {df}")
    if m_tests < 1:
        raise ValueError("m_tests must be at least 1")
    statistic = max(0.0, 2.0 * (log_likelihood(full, X) - log_likelihood(null, X)))
    p_value = chi_square_sf(statistic, df)
    return TestResult(
        statistic=statistic,
        df=df,
        p_value=p_value,
        significant_after_bonferroni=p_value < alpha / m_tests,
        alpha=alpha,
        m_tests=m_tests,
    )


@dataclass(frozen=True)
class GroupLassoFit:
    """Group-sparse logistic fit and its per-group support pattern."""

    model: LogisticModel
    active: dict[str, bool]
    lam: float
    objective: float
    group_gradients: dict[str, float] = field(default_factory=dict)


def _check_groups(groups: Mapping[str, tuple[int, int]], width: int) -> None:
    cursor = 0
    for start, stop in sorted(groups.values()):
        if start != cursor or stop <= start:
            raise ValueError("Groups must partition the design-matrix columns")
        cursor = stop
    if cursor != width:
        raise ValueError("Groups must partition the design-matrix columns")


def _mean_loss(beta: np.ndarray, values: np.ndarray, y: np.ndarray) -> float:
    eta = beta[0] + values @ beta[1:]
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _mean_gradient(beta: np.ndarray, values: np.ndarray, y: np.ndarray) -> np.ndarray:
    residual = expit(beta[0] + values @ beta[1:]) - y
    grad = np.empty_like(beta)
    grad[0] = residual.mean()
    grad[1:] = values.T @ residual / values.shape[0]
    return grad


def _group_norms(
    vector: np.ndarray, groups: Mapping[str, tuple[int, int]]
) -> dict[str, float]:
    return {
        name: float(np.linalg.norm(vector[start:stop]))
        for name, (start, stop) in groups.items()
    }


def group_lasso_lambda_max(
    X: DesignMatrix, groups: Mapping[str, tuple[int, int]] | None = None
) -> float:
    """Smallest lambda whose group-LASSO solution has every group at zero."""
    groups = dict(groups or X.groups)
    values, y = _unpack(X)
    beta = np.zeros(values.shape[1] + 1)
    beta[0] = _null_intercept(y)
    grad = _mean_gradient(beta, values, y)[1:]
    norms = _group_norms(grad, groups)
    return max(
        norms[name] / np.sqrt(stop - start) for name, (start, stop) in groups.items()
    )


def fit_group_lasso(
    X: DesignMatrix,
    groups: Mapping[str, tuple[int, int]] | None = None,
    lam: float = 0.0,
    tol: float = DEFAULT_GL_TOL,
    max_iter: int = DEFAULT_GL_MAX_ITER,
    init: LogisticModel | None = None,
) -> GroupLassoFit:
    """Fit group-LASSO logistic regression by accelerated proximal gradient.

    Minimizes the mean negative log-likelihood plus
    ``lam * sum_g sqrt(p_g) ||w_g||``. Steps use block soft-thresholding
    with backtracking line search and restart when the objective rises.
    At or above :func:`group_lasso_lambda_max` the null model is returned.

    Raises:
        ValueError: ``groups`` do not partition the columns or ``lam < 0``.
    """
    groups = dict(groups or X.groups)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    values, y = _unpack(X)
    p = values.shape[1]
    _check_groups(groups, p)
    spans = [
        (start, stop, lam * np.sqrt(stop - start)) for start, stop in groups.values()
    ]

    def penalty(beta: np.ndarray) -> float:
        w = beta[1:]
        return float(sum(k * np.linalg.norm(w[s:e]) for s, e, k in spans))

    def prox(beta: np.ndarray, step: float) -> np.ndarray:
        out = beta.copy()
        w = out[1:]
        for start, stop, k in spans:
            norm = np.linalg.norm(w[start:stop])
            if norm <= step * k:
                w[start:stop] = 0.0
            else:
                w[start:stop] *= 1.0 - step * k / norm
        return out

    beta = np.zeros(p + 1)
    beta[0] = _null_intercept(y)
    converged = True
    mapping_norm = 0.0
    n_iter = 0
    if lam < group_lasso_lambda_max(X, groups):
        if init is not None:
            beta = np.concatenate([[init.intercept], init.weights])
        current = beta.copy()
        objective = _mean_loss(current, values, y) + penalty(current)
        momentum = current.copy()
        theta = 1.0
        step = 1.0
        converged = False
        for n_iter in range(1, max_iter + 1):
            grad = _mean_gradient(momentum, values, y)
            base = _mean_loss(momentum, values, y)
            while True:
                candidate = prox(momentum - step * grad, step)
                diff = candidate - momentum
                bound = base + grad @ diff + diff @ diff / (2.0 * step)
                if _mean_loss(candidate, values, y) <= bound + 1e-15:
                    break
                step *= 0.5
            mapping_norm = float(np.linalg.norm(diff) / step)
            value = _mean_loss(candidate, values, y) + penalty(candidate)
            if value > objective:
                # Restart the momentum from the last accepted iterate
                momentum = current.copy()
                theta = 1.0
                continue
            theta_next = (1.0 + np.sqrt(1.0 + 4.0 * theta**2)) / 2.0
            momentum = candidate + ((theta - 1.0) / theta_next) * (candidate - current)
            current, objective, theta = candidate, value, theta_next
            if mapping_norm <= tol:
                converged = True
                break
            step *= 1.5
        beta = current

    gradient = _mean_gradient(beta, values, y)[1:]
    active = {
        name: bool(np.any(beta[1:][start:stop] != 0.0))
        for name, (start, stop) in groups.items()
    }
    model = LogisticModel(
        intercept=float(beta[0]),
        weights=beta[1:].copy(),
        l2_lambda=0.0,
        converged=converged,
        grad_norm=mapping_norm,
        column_labels=X.column_labels,
        n_iter=n_iter,
        classes=X.classes,
    )
    _LOGGER.debug(
        "Group LASSO lambda=%.4g: %d/%d groups active after %d iterations",
        lam,
        sum(active.values()),
        len(active),
        n_iter,
    )
    return GroupLassoFit(
        model=model,
        active=active,
        lam=lam,
        objective=_mean_loss(beta, values, y) + penalty(beta),
        group_gradients=_group_norms(gradient, groups),
    )
