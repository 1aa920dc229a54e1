"""Interestingness-first K-sweep and accuracy-first baseline rankers."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging
from typing import Any

import numpy as np

from .const import (
    DEFAULT_ALPHA,
    DEFAULT_GL_PATH_POINTS,
    DEFAULT_GL_PATH_RATIO,
    DEFAULT_L2_LAMBDA,
    DEFAULT_LR_BASELINE_LAMBDA,
    DEFAULT_VALIDATION_FRACTION,
)
from .data import DesignMatrix, stratified_indices
from .glm import (
    LogisticModel,
    accuracy,
    fit_group_lasso,
    fit_logistic,
    fit_null,
    group_lasso_lambda_max,
    lr_test,
)
from .ranking import Ranking

_LOGGER = logging.getLogger(__name__)


def chance_rate(y: Sequence[Any] | np.ndarray) -> float:
    """Accuracy of always predicting the majority class of ``y``."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("chance_rate needs at least one label")
    _, counts = np.unique(y, return_counts=True)
    return float(counts.max() / y.size)


@dataclass(frozen=True)
class KRecord:
    """Outcome of the top-K classifier for one K."""

    k: int
    features: tuple[str, ...]
    test_accuracy: float
    train_accuracy: float
    lr_statistic: float
    p_value: float
    significant: bool
    above_chance: bool
    model: LogisticModel

    @property
    def feature_added(self) -> str:
        """The feature that entered at this K."""
        return self.features[-1]

    @property
    def predictive(self) -> bool:
        """Above chance and significant after Bonferroni."""
        return self.above_chance and self.significant

    def to_dict(self) -> dict[str, Any]:
        """Serialize for the sweep report."""
        return {
            "K": self.k,
            "features": list(self.features),
            "feature_added": self.feature_added,
            "test_accuracy": self.test_accuracy,
            "train_accuracy": self.train_accuracy,
            "lr_statistic": self.lr_statistic,
            "p_value": self.p_value,
            "significant": self.significant,
            "above_chance": self.above_chance,
            "model": self.model.to_dict(),
        }


@dataclass(frozen=True)
class KSweepReport:
    """Per-K accuracies and significance tests along an interestingness ranking."""

    ranking: Ranking
    records: tuple[KRecord, ...]
    chance_rate: float
    K_prime: int | None
    alpha: float
    l2_lambda: float

    @property
    def k_max(self) -> int:
        """Largest K evaluated."""
        return len(self.records)

    def record(self, k: int) -> KRecord:
        """Record for ``k`` (1-based)."""
        return self.records[k - 1]

    @property
    def selected_features(self) -> tuple[str, ...]:
        """S_K′, or the top-1 feature when no K qualifies."""
        if self.K_prime is None:
            return self.ranking.top(1)
        return self.ranking.top(self.K_prime)

    @property
    def selected_model(self) -> LogisticModel:
        """Model fitted on :attr:`selected_features`."""
        return self.record(self.K_prime or 1).model

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the report JSON layout."""
        return {
            "ranking": list(self.ranking.names),
            "chance_rate": self.chance_rate,
            "K_prime": self.K_prime,
            "alpha": self.alpha,
            "bonferroni_m": self.k_max,
            "lambda": self.l2_lambda,
            "selected_features": list(self.selected_features),
            "records": [record.to_dict() for record in self.records],
        }

    def csv_rows(self) -> list[dict[str, Any]]:
        """Rows of the accuracy-versus-K curve."""
        return [
            {
                "K": record.k,
                "feature_added": record.feature_added,
                "test_accuracy": record.test_accuracy,
                "p_value": record.p_value,
                "significant": record.significant,
            }
            for record in self.records
        ]


def eureka_sweep(
    train: DesignMatrix,
    test: DesignMatrix,
    ranking: Ranking,
    K_max: int,
    alpha: float = DEFAULT_ALPHA,
    l2_lambda: float = DEFAULT_L2_LAMBDA,
) -> KSweepReport:
    """Fit one logistic model per prefix of ``ranking`` and locate K′.

    For each K the model uses only the columns of the top-K features; it is
    scored on ``test`` and tested against the intercept-only null on
    ``train`` with Bonferroni over the ``K_max`` tests. K′ is the smallest K
    that beats the test chance rate and is significant.

    Raises:
        ValueError: The ranking does not cover the features, or ``K_max`` is
            outside ``[1, d]``.
    """
    features = set(train.feature_names)
    if not ranking.names:
        raise ValueError("Ranking must not be empty")
    if set(ranking.names) != features:
        raise ValueError(
            "Ranking must list exactly the dataset features; "
            f"missing {sorted(features - set(ranking.names))}, "
            f"unknown {sorted(set(ranking.names) - features)}"
        )
    if not 1 <= K_max <= len(features):
        raise ValueError(f"K_max must lie in [1, {len(features)}], got {K_max}")

    chance = chance_rate(test.labels)
    null = fit_null(train.labels)
    records: list[KRecord] = []
    k_prime: int | None = None
    for k in range(1, K_max + 1):
        subset = ranking.top(k)
        train_k = train.select(subset)
        test_k = test.select(subset)
        model = fit_logistic(train_k, l2_lambda=l2_lambda)
        test_acc = accuracy(model, test_k)
        result = lr_test(
            model, null, train_k, df=train_k.width, alpha=alpha, m_tests=K_max
        )
        record = KRecord(
            k=k,
            features=subset,
            test_accuracy=test_acc,
            train_accuracy=accuracy(model, train_k),
            lr_statistic=result.statistic,
            p_value=result.p_value,
            significant=result.significant_after_bonferroni,
            above_chance=test_acc > chance,
            model=model,
        )
        records.append(record)
        if k_prime is None and record.predictive:
            k_prime = k
        _LOGGER.debug(
            "K=%d (+%s): test accuracy %.4f, p=%.3g%s",
            k,
            record.feature_added,
            test_acc,
            result.p_value,
            " *" if record.significant else "",
        )

    _LOGGER.info(
        "Sweep over %d features: chance %.4f, K'=%s", K_max, chance, k_prime
    )
    return KSweepReport(
        ranking=ranking,
        records=tuple(records),
        chance_rate=chance,
        K_prime=k_prime,
        alpha=alpha,
        l2_lambda=l2_lambda,
    )


def default_lambda_grid(
    train: DesignMatrix,
    points: int = DEFAULT_GL_PATH_POINTS,
    ratio: float = DEFAULT_GL_PATH_RATIO,
) -> np.ndarray:
    """Logarithmic grid from lambda_max down to ``ratio * lambda_max``."""
    lambda_max = group_lasso_lambda_max(train)
    if lambda_max <= 0:
        return np.zeros(1)
    return np.geomspace(lambda_max, lambda_max * ratio, points)


def _order(names: Sequence[str], keys: dict[str, tuple[float, ...]]) -> Ranking:
    index = {name: i for i, name in enumerate(names)}
    return Ranking(names=tuple(sorted(names, key=lambda n: (*keys[n], index[n]))))


def rank_by_group_lasso(
    train: DesignMatrix, lambda_grid: Sequence[float] | np.ndarray | None = None
) -> Ranking:
    """Rank features by their entry into the group-LASSO path.

    The path runs from the largest lambda down, warm-starting each fit from
    the previous one. Features entering at the same lambda are ordered by
    group norm; features that never enter follow, ordered by group gradient
    norm at the smallest lambda.

    Raises:
        ValueError: Empty ``lambda_grid``.
    """
    grid = default_lambda_grid(train) if lambda_grid is None else lambda_grid
    grid = np.sort(np.asarray(grid, dtype=float))[::-1]
    if grid.size == 0:
        raise ValueError("lambda_grid must not be empty")

    names = train.feature_names
    entry: dict[str, tuple[float, ...]] = {}
    fit = None
    for step, lam in enumerate(grid):
        fit = fit_group_lasso(train, lam=float(lam), init=fit.model if fit else None)
        for name in names:
            if name in entry or not fit.active[name]:
                continue
            norm = float(np.linalg.norm(fit.model.weights[train.group_slice(name)]))
            entry[name] = (0.0, float(step), -norm)
    assert fit is not None  # nosec B101

    keys = dict(entry)
    for name in names:
        if name not in keys:
            start, stop = train.groups[name]
            scaled = fit.group_gradients[name] / np.sqrt(stop - start)
            keys[name] = (1.0, -scaled, 0.0)
    ranking = _order(names, keys)
    _LOGGER.debug(
        "Group LASSO path over %d lambdas: %d/%d features entered",
        grid.size,
        len(entry),
        len(names),
    )
    return ranking


def rank_by_lr_weights(
    train: DesignMatrix, l2_lambda: float = DEFAULT_LR_BASELINE_LAMBDA
) -> Ranking:
    """Rank features by the L2 norm of their weights in one full fit."""
    model = fit_logistic(train, l2_lambda=l2_lambda)
    keys = {
        name: (-float(np.linalg.norm(model.weights[train.group_slice(name)])),)
        for name in train.feature_names
    }
    return _order(train.feature_names, keys)


def rank_by_validation(
    train: DesignMatrix,
    val_fraction: float = DEFAULT_VALIDATION_FRACTION,
    seed: int = 0,
    l2_lambda: float = DEFAULT_L2_LAMBDA,
) -> Ranking:
    """Rank features by the validation accuracy of single-feature models."""
    fit_idx, val_idx = stratified_indices(train.labels, val_fraction, seed)
    fit_rows = train.subset_rows(fit_idx)
    val_rows = train.subset_rows(val_idx)
    keys = {}
    for name in train.feature_names:
        model = fit_logistic(fit_rows.select([name]), l2_lambda=l2_lambda)
        score = accuracy(model, val_rows.select([name]))
        keys[name] = (-score,)
        _LOGGER.debug("Validation accuracy of %s: %.4f", name, score)
    return _order(train.feature_names, keys)
