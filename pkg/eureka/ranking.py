"""Borda-score estimation, rank metrics and ranking benchmarks."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from itertools import combinations
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import kendalltau, spearmanr

from .const import (
    DEFAULT_ACTIVE_DELTA,
    DEFAULT_TRUTH_COMPARISONS,
    METHOD_ACTIVE,
    METHOD_COUNTING,
    TRUTH_ANALYTIC,
    TRUTH_SAMPLED,
)
from .exceptions import ConfigError, JudgeError
from .judge import Judge, MockOracle, PreferenceMatrix

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ranking:
    """Feature names ordered from most to least interesting."""

    names: tuple[str, ...]
    tie_groups: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        """Validate that the ranking is a permutation."""
        if not self.names:
            raise ValueError("Ranking must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("Ranking must list each feature once")

    def __len__(self) -> int:
        """Number of ranked features."""
        return len(self.names)

    def top(self, k: int) -> tuple[str, ...]:
        """The ``k`` most interesting features."""
        return self.names[:k]

    def position(self, name: str) -> int:
        """0-based rank of ``name``."""
        return self.names.index(name)

    def to_dict(self) -> dict[str, Any]:
        """Serialize for ``ranking.json``."""
        return {
            "ranking": list(self.names),
            "tie_groups": [list(group) for group in self.tie_groups],
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> Ranking:
        """Inverse of :meth:`to_dict`."""
        return cls(
            names=tuple(document["ranking"]),
            tie_groups=tuple(tuple(g) for g in document.get("tie_groups", [])),
        )

    @classmethod
    def load(cls, path: str | Path) -> Ranking:
        """Read a ranking file."""
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class BordaEstimate:
    """Estimated Borda scores with the vote counts behind them."""

    names: tuple[str, ...]
    scores: np.ndarray
    votes: np.ndarray
    comparisons_used: int
    appearances: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self) -> None:
        """Validate lengths."""
        m = len(self.names)
        if m < 2:
            raise ValueError("A Borda estimate needs at least two items")
        if self.scores.shape != (m,) or self.votes.shape != (m,):
            raise ValueError("Scores and votes need one entry per item")
        if self.appearances.size == 0:
            object.__setattr__(self, "appearances", np.zeros(m, dtype=int))

    def score_of(self, name: str) -> float:
        """Score of one item."""
        return float(self.scores[self.names.index(name)])

    def ranking(self) -> Ranking:
        """Order by descending score; exact ties keep input order.

        Items that were never compared rank after every compared item.
        """
        unsampled = self.appearances == 0
        if unsampled.all():
            unsampled = np.zeros_like(unsampled)
        order = sorted(
            range(len(self.names)), key=lambda i: (unsampled[i], -self.scores[i], i)
        )
        ties: dict[tuple[bool, float], list[str]] = {}
        for i in order:
            key = (bool(unsampled[i]), float(self.scores[i]))
            ties.setdefault(key, []).append(self.names[i])
        groups = tuple(tuple(g) for g in ties.values() if len(g) > 1)
        return Ranking(tuple(self.names[i] for i in order), groups)

    def to_dict(self) -> dict[str, Any]:
        """Serialize for ``borda_estimate.json``."""
        return {
            "names": list(self.names),
            "scores": [float(s) for s in self.scores],
            "votes": [int(v) for v in self.votes],
            "appearances": [int(a) for a in self.appearances],
            "comparisons_used": self.comparisons_used,
        }


def sample_pairs(
    m: int,
    n: int,
    rng: np.random.Generator,
    replacement: bool = True,
    randomize_order: bool = True,
) -> np.ndarray:
    """Draw ``n`` ordered index pairs over ``m`` items.

    With replacement every draw picks one of the m(m-1)/2 unordered pairs
    uniformly; without it the draws run through shuffled complete sweeps of
    all pairs. The presentation order of each pair is a fair coin unless
    ``randomize_order`` is off.
    """
    pairs = np.array(list(combinations(range(m), 2)), dtype=int)
    if replacement:
        chosen = pairs[rng.integers(len(pairs), size=n)]
    else:
        sweeps = math.ceil(n / len(pairs))
        sweep_blocks = [pairs[rng.permutation(len(pairs))] for _ in range(sweeps)]
        chosen = np.concatenate(sweep_blocks)[:n]
    if randomize_order:
        flip = rng.random(n) < 0.5
        chosen[flip] = chosen[flip][:, ::-1]
    return chosen


def borda_count(
    features: Sequence[str],
    oracle: Judge,
    N: int,
    seed: int,
    *,
    replacement: bool = True,
    randomize_order: bool = True,
) -> BordaEstimate:
    """Estimate Borda scores by Monte Carlo pairwise counting.

    Each sampled comparison gives its winner one vote; an item's score is
    its votes divided by the comparisons it took part in (0 when never
    sampled).

    Raises:
        ValueError: Fewer than two features or ``N < 1``.
        JudgeError: An oracle failure; completed comparisons stay in the
            judge transcript and cache.
    """
    names = tuple(features)
    m = len(names)
    if m < 2:
        raise ValueError("Borda counting needs at least two features")
    if N < 1:
        raise ValueError("Borda counting needs at least one comparison")

    rng = np.random.default_rng(seed)
    drawn = sample_pairs(m, N, rng, replacement, randomize_order)
    requests = [(names[i], names[j], draw) for draw, (i, j) in enumerate(drawn)]
    results = oracle.compare_many(requests, seed)

    votes = np.zeros(m, dtype=int)
    appearances = np.zeros(m, dtype=int)
    for (i, j), result in zip(drawn, results):
        votes[i if result.winner == "A" else j] += 1
        appearances[i] += 1
        appearances[j] += 1
    scores = np.divide(
        votes, appearances, out=np.zeros(m), where=appearances > 0
    )
    _LOGGER.debug("Borda count with N=%d (seed %d): %s", N, seed, scores.round(3))
    return BordaEstimate(names, scores, votes, N, appearances)


def analytic_borda(P: PreferenceMatrix) -> BordaEstimate:
    """Exact Borda scores ``(1/(m-1)) sum_{j != i} P[i][j]``."""
    m = P.size
    scores = (P.matrix.sum(axis=1) - np.diag(P.matrix)) / (m - 1)
    return BordaEstimate(P.names, scores, np.zeros(m, dtype=int), 0)


def confidence_radius(t: np.ndarray | int, m: int, delta: float) -> np.ndarray:
    """Anytime confidence radius ``sqrt(log(4 m t^2 / delta) / (2 t))``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.sqrt(np.log(4.0 * m * t**2 / delta) / (2.0 * t))
    return np.where(t > 0, radius, np.inf)


def _separated(estimates: np.ndarray, radius: np.ndarray) -> np.ndarray:
    lower, upper = estimates - radius, estimates + radius
    order = sorted(range(len(estimates)), key=lambda i: (-estimates[i], i))
    separated = np.zeros(len(estimates), dtype=bool)
    for k, item in enumerate(order):
        above = k == 0 or upper[item] < lower[order[k - 1]]
        below = k == len(order) - 1 or lower[item] > upper[order[k + 1]]
        separated[item] = above and below
    return separated


def active_rank(
    features: Sequence[str],
    oracle: Judge,
    budget: int,
    delta: float = DEFAULT_ACTIVE_DELTA,
    seed: int = 0,
) -> BordaEstimate:
    """Estimate Borda scores with successive elimination.

    Every round compares each active item against one uniformly random
    opponent; the item's score is its win rate in those comparisons. After
    a round, an item whose confidence interval is disjoint from the
    intervals of its neighbours in the current order is frozen. The loop
    stops when every item is frozen or the budget is spent; a final round
    that does not fit the budget is truncated to a random subset.

    Raises:
        ValueError: ``budget < m`` or fewer than two features.
    """
    names = tuple(features)
    m = len(names)
    if m < 2:
        raise ValueError("Active ranking needs at least two features")
    if budget < m:
        raise ValueError(f"Budget {budget} cannot give each of {m} items a comparison")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    wins = np.zeros(m, dtype=int)
    trials = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    used = 0
    rounds = 0
    while used < budget and active.any():
        members = np.flatnonzero(active)
        remaining = budget - used
        if remaining < members.size:
            members = np.sort(rng.permutation(members)[:remaining])
        opponents = rng.integers(m - 1, size=members.size)
        opponents = opponents + (opponents >= members)
        flip = rng.random(members.size) < 0.5
        requests = []
        for k, (i, j) in enumerate(zip(members, opponents)):
            a, b = (j, i) if flip[k] else (i, j)
            requests.append((names[a], names[b], used + k))
        results = oracle.compare_many(requests, seed)
        for k, (i, result) in enumerate(zip(members, results)):
            picked_a = not flip[k]
            wins[i] += int((result.winner == "A") == picked_a)
            trials[i] += 1
        used += members.size
        rounds += 1
        estimates = np.divide(wins, trials, out=np.zeros(m), where=trials > 0)
        active &= ~_separated(estimates, confidence_radius(trials, m, delta))

    estimates = np.divide(wins, trials, out=np.zeros(m), where=trials > 0)
    _LOGGER.debug(
        "Active ranking used %d/%d comparisons in %d rounds, %d items unresolved",
        used,
        budget,
        rounds,
        int(active.sum()),
    )
    return BordaEstimate(names, estimates, wins, used, trials)


def _rank_vectors(r1: Ranking, r2: Ranking) -> tuple[list[int], list[int]]:
    if set(r1.names) != set(r2.names) or len(r1) != len(r2):
        raise ValueError("Rankings must order the same set of features")
    if len(r1) < 2:
        raise ValueError("Rank correlations need at least two items")
    return list(range(len(r1))), [r2.position(name) for name in r1.names]


def kendall_tau(r1: Ranking, r2: Ranking) -> float:
    """Kendall rank correlation ``(C - D) / (m(m-1)/2)``."""
    x, y = _rank_vectors(r1, r2)
    return float(kendalltau(x, y)[0])


def spearman_rho(r1: Ranking, r2: Ranking) -> float:
    """Spearman rank correlation ``1 - 6 sum d^2 / (m(m^2-1))``."""
    x, y = _rank_vectors(r1, r2)
    return float(spearmanr(x, y)[0])


def mae(b_hat: BordaEstimate, b_true: BordaEstimate) -> float:
    """Mean absolute error between two score vectors, matched by name."""
    if set(b_hat.names) != set(b_true.names):
        raise ValueError("Estimates must cover the same features")
    truth = np.array([b_true.score_of(name) for name in b_hat.names])
    return float(np.mean(np.abs(b_hat.scores - truth)))


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds for repeated runs."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@dataclass(frozen=True)
class BenchRow:
    """Mean MAE of one estimator at one comparison budget."""

    method: str
    n: int
    mae_mean: float
    mae_std: float
    repeats: int
    aborted: bool = False


@dataclass(frozen=True)
class RankBenchResult:
    """MAE-versus-N curves for the counting and active estimators."""

    rows: tuple[BenchRow, ...]
    truth: BordaEstimate
    truth_kind: str

    def csv_rows(self) -> list[dict[str, Any]]:
        """Long-format rows ``(method, N, metric, value)``."""
        rows = []
        for row in self.rows:
            for metric, value in (("mae_mean", row.mae_mean), ("mae_std", row.mae_std)):
                rows.append(
                    {"method": row.method, "N": row.n, "metric": metric, "value": value}
                )
        return rows

    def curve(self, method: str) -> dict[int, float]:
        """Mean MAE by N for one method."""
        return {row.n: row.mae_mean for row in self.rows if row.method == method}

    def summary(self) -> dict[str, Any]:
        """JSON summary."""
        return {
            "truth": self.truth_kind,
            "truth_scores": dict(zip(self.truth.names, map(float, self.truth.scores))),
            "curves": {
                method: {str(n): v for n, v in self.curve(method).items()}
                for method in sorted({row.method for row in self.rows})
            },
            "aborted_cells": [
                {"method": row.method, "N": row.n, "repeats": row.repeats}
                for row in self.rows
                if row.aborted
            ],
        }


def rankbench(
    oracle: Judge,
    Ns: Sequence[int],
    truth: str = TRUTH_SAMPLED,
    repeats: int = 50,
    seed: int = 0,
    *,
    truth_n: int = DEFAULT_TRUTH_COMPARISONS,
    delta: float = DEFAULT_ACTIVE_DELTA,
    methods: Sequence[str] = (METHOD_COUNTING, METHOD_ACTIVE),
) -> RankBenchResult:
    """Compare Borda estimators by MAE against a reference score vector.

    The reference is either the exact scores of a mock oracle's preference
    matrix (``analytic``) or a large-N counting estimate (``sampled``). A
    judge failure aborts its cell; the repeats finished so far are kept.

    Raises:
        ConfigError: Analytic truth without a mock oracle, or ``truth_n``
            not above every N.
    """
    names = tuple(oracle.features)
    if truth == TRUTH_ANALYTIC:
        if not isinstance(oracle.oracle, MockOracle):
            raise ConfigError("Analytic truth needs a mock oracle")
        prefs = oracle.oracle.preferences
        idx = [prefs.index(name) for name in names]
        reference = analytic_borda(
            PreferenceMatrix(names, prefs.matrix[np.ix_(idx, idx)])
        )
    elif truth == TRUTH_SAMPLED:
        if truth_n <= max(Ns):
            raise ConfigError(f"truth_n={truth_n} must exceed max(Ns)={max(Ns)}")
        reference = borda_count(names, oracle, truth_n, seed)
    else:
        raise ConfigError(f"Unknown truth kind {truth!r}")
    _LOGGER.info("Rankbench reference (%s): %s", truth, reference.scores.round(3))

    seeds = derive_seeds(seed, repeats)
    rows: list[BenchRow] = []
    for n in Ns:
        for method in methods:
            errors: list[float] = []
            aborted = False
            for child in seeds:
                try:
                    if method == METHOD_COUNTING:
                        estimate = borda_count(names, oracle, n, child)
                    elif method == METHOD_ACTIVE:
                        estimate = active_rank(names, oracle, n, delta, child)
                    else:
                        raise ConfigError(f"Unknown ranking method {method!r}")
                except (JudgeError, ValueError) as err:
                    _LOGGER.warning(
                        "Rankbench cell %s/N=%d aborted after %d repeats: %s",
                        method,
                        n,
                        len(errors),
                        err,
                    )
                    aborted = True
                    break
                errors.append(mae(estimate, reference))
            rows.append(
                BenchRow(
                    method=method,
                    n=n,
                    mae_mean=float(np.mean(errors)) if errors else float("nan"),
                    mae_std=float(np.std(errors)) if errors else float("nan"),
                    repeats=len(errors),
                    aborted=aborted,
                )
            )
            _LOGGER.debug("Rankbench %s N=%d: MAE %.4f", method, n, rows[-1].mae_mean)
    return RankBenchResult(tuple(rows), reference, truth)


@dataclass(frozen=True)
class StabilityResult:
    """Pairwise rank correlations between repeated rankings."""

    rankings: tuple[Ranking, ...]
    pair_rows: tuple[dict[str, Any], ...]
    failures: int

    def stats(self, metric: str) -> dict[str, float]:
        """Mean and standard deviation of one metric across ranking pairs."""
        values = np.array([row[metric] for row in self.pair_rows])
        return {"mean": float(values.mean()), "std": float(values.std())}

    def summary(self) -> dict[str, Any]:
        """JSON summary with mean and std per metric."""
        return {
            "runs": len(self.rankings) + self.failures,
            "failures": self.failures,
            "pairs": len(self.pair_rows),
            "kendall_tau": self.stats("kendall_tau"),
            "spearman_rho": self.stats("spearman_rho"),
        }

    def csv_rows(self) -> list[dict[str, Any]]:
        """Long-format rows ``(run_pair, metric, value)``."""
        rows = []
        for row in self.pair_rows:
            for metric in ("kendall_tau", "spearman_rho"):
                rows.append(
                    {
                        "run_pair": f"{row['run_i']}-{row['run_j']}",
                        "metric": metric,
                        "value": row[metric],
                    }
                )
        return rows


def stability_experiment(
    rank_fn: Callable[[int], Ranking], runs: int, seed: int
) -> StabilityResult:
    """Generate ``runs`` rankings and correlate every pair of them.

    Failed rankings are excluded and counted.

    Raises:
        ValueError: ``runs < 2`` or fewer than two rankings succeeded.
    """
    if runs < 2:
        raise ValueError("A stability experiment needs at least two runs")
    rankings: list[tuple[int, Ranking]] = []
    failures = 0
    for run, child in enumerate(derive_seeds(seed, runs)):
        try:
            rankings.append((run, rank_fn(child)))
        except (JudgeError, ValueError) as err:
            failures += 1
            _LOGGER.warning("Stability run %d failed and is excluded: %s", run, err)
    if len(rankings) < 2:
        raise ValueError(f"Only {len(rankings)} ranking(s) succeeded out of {runs}")
    if failures:
        _LOGGER.warning("%d of %d stability runs failed", failures, runs)

    pair_rows = tuple(
        {
            "run_i": i,
            "run_j": j,
            "kendall_tau": kendall_tau(ri, rj),
            "spearman_rho": spearman_rho(ri, rj),
        }
        for (i, ri), (j, rj) in combinations(rankings, 2)
    )
    return StabilityResult(tuple(r for _, r in rankings), pair_rows, failures)


def pairwise_ranker(
    judge: Judge, n_comparisons: int, **kwargs: Any
) -> Callable[[int], Ranking]:
    """Rank function running Borda counting with a given seed."""
    names = tuple(judge.features)

    def _rank(seed: int) -> Ranking:
        return borda_count(names, judge, n_comparisons, seed, **kwargs).ranking()

    return _rank


def direct_ranker(judge: Judge) -> Callable[[int], Ranking]:
    """Rank function asking the judge for a one-prompt ranking."""
    return judge.rank_directly
