"""Experiment runner wiring data, judge, ranking and selection together."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any

from .cache import TranscriptCache
from .client import ChatClient, mask_secret
from .config import RunConfig
from .const import (
    BASELINES_FILE,
    BASELINES_JSON_FILE,
    ESTIMATE_FILE,
    JUDGE_MODE_MOCK,
    METHOD_ACTIVE,
    METHOD_DIRECT,
    METHOD_PAIRWISE,
    MODEL_FILE,
    RANKBENCH_CSV_FILE,
    RANKBENCH_SUMMARY_FILE,
    RANKING_FILE,
    RESOLVED_CONFIG_FILE,
    RULES_FILE,
    STABILITY_CSV_FILE,
    STABILITY_SUMMARY_FILE,
    SWEEP_CSV_FILE,
    SWEEP_REPORT_FILE,
    TRANSCRIPT_FILE,
)
from .data import (
    Dataset,
    DesignMatrix,
    fit_preprocessor,
    load_csv,
    load_schema,
    stratified_split,
    transform,
)
from .exceptions import ConfigError, DataError
from .judge import Judge, LiveOracle, MockOracle, Oracle, PreferenceMatrix
from .ranking import (
    Ranking,
    RankBenchResult,
    StabilityResult,
    active_rank,
    borda_count,
    direct_ranker,
    pairwise_ranker,
    rankbench,
    stability_experiment,
)
from .selection import (
    KSweepReport,
    default_lambda_grid,
    eureka_sweep,
    rank_by_group_lasso,
    rank_by_lr_weights,
    rank_by_validation,
)
from .utils import make_run_dir, write_csv, write_json

_LOGGER = logging.getLogger(__name__)

BASELINE_COLUMNS = ("group_lasso", "lr_weights", "validation", "eureka")


class ExperimentRunner:
    """Runs one EUREKA command under a validated configuration.

    Each command writes its artifacts into a fresh timestamped directory
    below the configured output root, next to a copy of the resolved
    configuration. The dataset and judge are built lazily and reused
    across commands of the same runner.
    """

    def __init__(self, config: RunConfig) -> None:
        """Initialize the runner.

        Args:
            config: Validated run configuration.
        """
        self.config = config
        self._dataset: Dataset | None = None
        self._judge: Judge | None = None
        self._client: ChatClient | None = None
        self.run_dir: Path | None = None

    def _start(self, command: str) -> Path:
        self.run_dir = make_run_dir(self.config.output, command)
        write_json(self.run_dir / RESOLVED_CONFIG_FILE, self.config.to_dict())
        _LOGGER.info("Running %s into %s", command, self.run_dir)
        return self.run_dir

    @property
    def dataset(self) -> Dataset:
        """The configured dataset, loaded on first use."""
        if self._dataset is None:
            data = self.config.data
            schema = load_schema(data.schema) if data.schema else None
            self._dataset = load_csv(
                data.path,
                schema,
                label_column=data.label_column,
                exclude=data.exclude,
                missing_tokens=data.missing_tokens,
            )
        return self._dataset

    def design_matrices(self) -> tuple[DesignMatrix, DesignMatrix]:
        """Stratified train/test split, preprocessed on the training part."""
        train, test = stratified_split(
            self.dataset, self.config.data.test_fraction, self.config.seed
        )
        preprocessor = fit_preprocessor(train)
        return transform(preprocessor, train), transform(preprocessor, test)

    def _build_oracle(self) -> Oracle:
        judge = self.config.judge
        if judge.mode == JUDGE_MODE_MOCK:
            if judge.preferences is not None:
                preferences = PreferenceMatrix.load(judge.preferences)
            else:
                assert judge.dominance is not None  # nosec B101
                try:
                    preferences = PreferenceMatrix.from_dominance(judge.dominance)
                except ValueError as err:
                    raise ConfigError(f"Invalid judge.dominance: {err}") from err
            missing = set(self.dataset.schema.feature_names) - set(preferences.names)
            if missing:
                raise ConfigError(
                    f"Preference matrix does not cover features {sorted(missing)}"
                )
            return MockOracle(preferences, direct_noise=judge.direct_noise)

        api_key = os.environ.get(judge.api_key_env)
        if not api_key:
            raise ConfigError(
                f"API key environment variable {judge.api_key_env} is not set"
            )
        assert judge.endpoint is not None  # nosec B101
        _LOGGER.debug(
            "Live judge %s at %s with key %s",
            judge.model,
            judge.endpoint,
            mask_secret(api_key),
        )
        self._client = ChatClient(
            judge.endpoint, judge.model, api_key, timeout=judge.timeout
        )
        return LiveOracle(
            self._client, max_attempts=judge.max_attempts, backoff=judge.backoff
        )

    def build_judge(self, symmetrize: bool | None = None) -> Judge:
        """Bind the configured oracle to the dataset features and task."""
        if self._judge is None:
            if len(self.dataset.schema.features) < 2:
                raise DataError(
                    "Ranking needs at least two features, dataset has "
                    f"{len(self.dataset.schema.features)}"
                )
            judge = self.config.judge
            cache = TranscriptCache(judge.cache) if judge.cache else None
            self._judge = Judge(
                self._build_oracle(),
                self.dataset.schema.features,
                self.config.task.description,
                self.config.task.label_name,
                cache=cache,
                max_in_flight=judge.max_in_flight,
                symmetrize=judge.symmetrize,
            )
        if symmetrize is not None:
            self._judge.symmetrize = symmetrize
        return self._judge

    def _finish_transcript(self, judge: Judge) -> None:
        judge.close_transcript()
        if judge.cache is not None:
            _LOGGER.info(
                "Judge issued %d queries (cache hits %d, misses %d)",
                judge.queries_issued,
                judge.cache.hits,
                judge.cache.misses,
            )

    def run_rank(
        self, method: str | None = None, symmetrize: bool | None = None
    ) -> Ranking:
        """Rank the dataset features by interestingness.

        Writes ``ranking.json``, the Borda estimate for the pairwise and
        active methods, and the comparison transcript. The transcript is
        written even when the judge fails.
        """
        method = method or self.config.ranking.method
        run_dir = self._start("rank")
        judge = self.build_judge(symmetrize)
        judge.stream_transcript(run_dir / TRANSCRIPT_FILE)
        names = self.dataset.schema.feature_names
        settings = self.config.ranking
        try:
            if method == METHOD_DIRECT:
                ranking = judge.rank_directly(self.config.seed)
            elif method == METHOD_ACTIVE:
                estimate = active_rank(
                    names, judge, settings.N, settings.delta, self.config.seed
                )
                write_json(run_dir / ESTIMATE_FILE, estimate.to_dict())
                ranking = estimate.ranking()
            elif method == METHOD_PAIRWISE:
                estimate = borda_count(
                    names,
                    judge,
                    settings.N,
                    self.config.seed,
                    replacement=settings.replacement,
                )
                write_json(run_dir / ESTIMATE_FILE, estimate.to_dict())
                ranking = estimate.ranking()
            else:
                raise ConfigError(f"Unknown ranking method {method!r}")
        finally:
            self._finish_transcript(judge)

        document = ranking.to_dict()
        document["method"] = method
        write_json(run_dir / RANKING_FILE, document)
        _LOGGER.info("Ranking (%s): %s", method, ", ".join(ranking.names))
        return ranking

    def _sweep(
        self, train: DesignMatrix, test: DesignMatrix, ranking: Ranking
    ) -> KSweepReport:
        settings = self.config.sweep
        d = len(train.feature_names)
        k_max = settings.K_max if settings.K_max is not None else d
        if k_max > d:
            raise ConfigError(f"sweep.K_max={k_max} exceeds the {d} dataset features")
        if set(ranking.names) != set(train.feature_names):
            raise ConfigError("Ranking file does not list exactly the dataset features")
        return eureka_sweep(
            train,
            test,
            ranking,
            k_max,
            alpha=settings.alpha,
            l2_lambda=settings.l2_lambda,
        )

    def run_sweep(self, ranking_path: str | Path) -> KSweepReport:
        """Fit top-K classifiers along a stored ranking and find K′."""
        ranking = self._load_ranking(ranking_path)
        settings = self.config.sweep
        d = len(self.dataset.schema.features)
        if settings.K_max is not None and settings.K_max > d:
            raise ConfigError(
                f"sweep.K_max={settings.K_max} exceeds the {d} dataset features"
            )
        run_dir = self._start("sweep")
        train, test = self.design_matrices()
        report = self._sweep(train, test, ranking)

        write_json(run_dir / SWEEP_REPORT_FILE, report.to_dict())
        write_csv(run_dir / SWEEP_CSV_FILE, report.csv_rows())
        model = report.selected_model
        write_json(run_dir / MODEL_FILE, model.to_dict())
        header = (
            f"K' = {report.K_prime}"
            if report.K_prime is not None
            else "No K is both above chance and significant; showing K = 1"
        )
        lines = [header, f"features: {', '.join(report.selected_features)}"]
        lines.extend(model.rule_summary())
        (run_dir / RULES_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return report

    def _load_ranking(self, ranking_path: str | Path) -> Ranking:
        try:
            return Ranking.load(ranking_path)
        except (OSError, ValueError, KeyError) as err:
            raise ConfigError(f"Cannot read ranking {ranking_path}: {err}") from err

    def run_baselines(self, ranking_path: str | Path | None = None) -> dict[str, Any]:
        """Compare the accuracy-first rankers with the interestingness pick.

        A missing or unreadable ranking file drops the EUREKA column with a
        warning.
        """
        run_dir = self._start("baselines")
        train, test = self.design_matrices()
        settings = self.config.baselines
        grid = default_lambda_grid(train, points=settings.path_points)
        rankings: dict[str, Ranking] = {
            "group_lasso": rank_by_group_lasso(train, grid),
            "lr_weights": rank_by_lr_weights(train, settings.lr_lambda),
            "validation": rank_by_validation(
                train, settings.val_fraction, self.config.seed
            ),
        }
        table: dict[str, Any] = {
            name: {"top": ranking.names[0], "ranking": list(ranking.names)}
            for name, ranking in rankings.items()
        }

        eureka_pick: tuple[str, ...] = ()
        if ranking_path is not None and Path(ranking_path).exists():
            report = self._sweep(train, test, self._load_ranking(ranking_path))
            eureka_pick = report.selected_features
            table["eureka"] = {
                "top": list(eureka_pick),
                "ranking": list(report.ranking.names),
                "K_prime": report.K_prime,
            }
        else:
            _LOGGER.warning(
                "No interestingness ranking at %s; writing baselines only", ranking_path
            )

        rows = []
        for position, _ in enumerate(train.feature_names):
            row: dict[str, Any] = {"rank": position + 1}
            for name, ranking in rankings.items():
                row[name] = ranking.names[position]
            row["eureka"] = eureka_pick[position] if position < len(eureka_pick) else ""
            rows.append(row)
        columns = ["rank", *BASELINE_COLUMNS]
        if not eureka_pick:
            columns.remove("eureka")
            for row in rows:
                row.pop("eureka")
        write_csv(run_dir / BASELINES_FILE, rows, columns)
        write_json(run_dir / BASELINES_JSON_FILE, table)
        return table

    def run_rankbench(self) -> RankBenchResult:
        """MAE-versus-N curves of the counting and active estimators."""
        run_dir = self._start("rankbench")
        judge = self.build_judge()
        judge.stream_transcript(run_dir / TRANSCRIPT_FILE)
        bench = self.config.bench
        try:
            result = rankbench(
                judge,
                bench.Ns,
                truth=bench.truth,
                repeats=bench.repeats,
                seed=self.config.seed,
                truth_n=bench.truth_n,
                delta=self.config.ranking.delta,
                methods=bench.methods,
            )
        finally:
            self._finish_transcript(judge)
        write_csv(
            run_dir / RANKBENCH_CSV_FILE,
            result.csv_rows(),
            ["method", "N", "metric", "value"],
        )
        write_json(run_dir / RANKBENCH_SUMMARY_FILE, result.summary())
        return result

    def run_stability(self, rank_method: str = METHOD_PAIRWISE) -> StabilityResult:
        """Correlate repeated rankings from independent seeds."""
        run_dir = self._start("stability")
        judge = self.build_judge()
        if rank_method == METHOD_DIRECT:
            rank_fn = direct_ranker(judge)
        elif rank_method == METHOD_PAIRWISE:
            rank_fn = pairwise_ranker(
                judge,
                self.config.ranking.N,
                replacement=self.config.ranking.replacement,
            )
        else:
            raise ConfigError(f"Unsupported stability ranking method {rank_method!r}")
        judge.stream_transcript(run_dir / TRANSCRIPT_FILE)
        try:
            result = stability_experiment(
                rank_fn, self.config.bench.stability_runs, self.config.seed
            )
        finally:
            self._finish_transcript(judge)
        write_csv(
            run_dir / STABILITY_CSV_FILE,
            result.csv_rows(),
            ["run_pair", "metric", "value"],
        )
        write_json(run_dir / STABILITY_SUMMARY_FILE, result.summary())
        return result

    def close(self) -> None:
        """Release the HTTP session of a live judge and the transcript file."""
        if self._judge is not None:
            self._judge.close_transcript()
        if self._client is not None:
            self._client.close()
            self._client = None
