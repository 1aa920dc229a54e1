"""Run configuration for EUREKA experiments."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
import json
import logging
from pathlib import Path
import tomllib
from typing import Any

import voluptuous as vol

from .const import (
    DEFAULT_ACTIVE_DELTA,
    DEFAULT_ALPHA,
    DEFAULT_API_KEY_ENV,
    DEFAULT_BACKOFF_SECONDS,
    DEFAULT_BENCH_NS,
    DEFAULT_BENCH_REPEATS,
    DEFAULT_COMPARISONS,
    DEFAULT_DIRECT_NOISE,
    DEFAULT_GL_PATH_POINTS,
    DEFAULT_L2_LAMBDA,
    DEFAULT_LR_BASELINE_LAMBDA,
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_MISSING_TOKENS,
    DEFAULT_MODEL_ID,
    DEFAULT_REQUEST_TIMEOUT,
    DEFAULT_STABILITY_RUNS,
    DEFAULT_TEST_FRACTION,
    DEFAULT_TRUTH_COMPARISONS,
    DEFAULT_VALIDATION_FRACTION,
    JUDGE_MODE_LIVE,
    JUDGE_MODE_MOCK,
    METHOD_ACTIVE,
    METHOD_COUNTING,
    METHOD_DIRECT,
    METHOD_PAIRWISE,
    TASK_PRESETS,
    TRUTH_ANALYTIC,
    TRUTH_SAMPLED,
)
from .exceptions import ConfigError

_LOGGER = logging.getLogger(__name__)

_FRACTION = vol.All(
    vol.Coerce(float),
    vol.Range(min=0.0, max=1.0, min_included=False, max_included=False),
)
_POSITIVE_INT = vol.All(int, vol.Range(min=1))
_NON_NEGATIVE = vol.All(vol.Coerce(float), vol.Range(min=0.0))

DATA_SCHEMA = vol.Schema(
    {
        vol.Required("path"): str,
        vol.Optional("schema"): vol.Any(None, str),
        vol.Optional("label_column"): vol.Any(None, str),
        vol.Optional("exclude", default=[]): [str],
        vol.Optional("missing_tokens", default=list(DEFAULT_MISSING_TOKENS)): [str],
        vol.Optional("test_fraction", default=DEFAULT_TEST_FRACTION): _FRACTION,
    }
)

TASK_SCHEMA = vol.Schema(
    {
        vol.Optional("preset"): vol.In(sorted(TASK_PRESETS)),
        vol.Optional("description"): str,
        vol.Optional("label_name", default="the label"): str,
    }
)

JUDGE_SCHEMA = vol.Schema(
    {
        vol.Optional("mode", default=JUDGE_MODE_MOCK): vol.In(
            [JUDGE_MODE_MOCK, JUDGE_MODE_LIVE]
        ),
        vol.Optional("endpoint"): vol.Any(None, vol.Url()),
        vol.Optional("model", default=DEFAULT_MODEL_ID): str,
        vol.Optional("api_key_env", default=DEFAULT_API_KEY_ENV): str,
        vol.Optional("max_in_flight", default=DEFAULT_MAX_IN_FLIGHT): _POSITIVE_INT,
        vol.Optional("cache"): vol.Any(None, str),
        vol.Optional("preferences"): vol.Any(None, str),
        vol.Optional("dominance"): vol.Any(None, [str]),
        vol.Optional("direct_noise", default=DEFAULT_DIRECT_NOISE): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0)
        ),
        vol.Optional("symmetrize", default=False): bool,
        vol.Optional("max_attempts", default=DEFAULT_MAX_ATTEMPTS): _POSITIVE_INT,
        vol.Optional("backoff", default=DEFAULT_BACKOFF_SECONDS): _NON_NEGATIVE,
        vol.Optional("timeout", default=DEFAULT_REQUEST_TIMEOUT): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
    }
)

RANKING_SCHEMA = vol.Schema(
    {
        vol.Optional("N", default=DEFAULT_COMPARISONS): _POSITIVE_INT,
        vol.Optional("method", default=METHOD_PAIRWISE): vol.In(
            [METHOD_PAIRWISE, METHOD_ACTIVE, METHOD_DIRECT]
        ),
        vol.Optional("delta", default=DEFAULT_ACTIVE_DELTA): _FRACTION,
        vol.Optional("replacement", default=True): bool,
    }
)

SWEEP_SCHEMA = vol.Schema(
    {
        vol.Optional("K_max"): vol.Any(None, _POSITIVE_INT),
        vol.Optional("alpha", default=DEFAULT_ALPHA): _FRACTION,
        vol.Optional("lambda", default=DEFAULT_L2_LAMBDA): _NON_NEGATIVE,
    }
)

BASELINES_SCHEMA = vol.Schema(
    {
        vol.Optional("lr_lambda", default=DEFAULT_LR_BASELINE_LAMBDA): _NON_NEGATIVE,
        vol.Optional("val_fraction", default=DEFAULT_VALIDATION_FRACTION): _FRACTION,
        vol.Optional("path_points", default=DEFAULT_GL_PATH_POINTS): vol.All(
            int, vol.Range(min=2)
        ),
    }
)

BENCH_SCHEMA = vol.Schema(
    {
        vol.Optional("Ns", default=list(DEFAULT_BENCH_NS)): vol.All(
            [_POSITIVE_INT], vol.Length(min=1)
        ),
        vol.Optional("truth", default=TRUTH_SAMPLED): vol.In(
            [TRUTH_SAMPLED, TRUTH_ANALYTIC]
        ),
        vol.Optional("truth_n", default=DEFAULT_TRUTH_COMPARISONS): _POSITIVE_INT,
        vol.Optional("repeats", default=DEFAULT_BENCH_REPEATS): _POSITIVE_INT,
        vol.Optional("methods", default=[METHOD_COUNTING, METHOD_ACTIVE]): vol.All(
            [vol.In([METHOD_COUNTING, METHOD_ACTIVE])], vol.Length(min=1)
        ),
        vol.Optional("stability_runs", default=DEFAULT_STABILITY_RUNS): vol.All(
            int, vol.Range(min=2)
        ),
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required("data"): DATA_SCHEMA,
        vol.Optional("task", default={}): TASK_SCHEMA,
        vol.Optional("judge", default={}): JUDGE_SCHEMA,
        vol.Optional("ranking", default={}): RANKING_SCHEMA,
        vol.Optional("sweep", default={}): SWEEP_SCHEMA,
        vol.Optional("baselines", default={}): BASELINES_SCHEMA,
        vol.Optional("bench", default={}): BENCH_SCHEMA,
        vol.Optional("seed", default=0): vol.All(int, vol.Range(min=0)),
        vol.Optional("output", default="runs"): str,
    }
)


@dataclass(frozen=True)
class DataConfig:
    """Where the dataset lives and how to read and split it."""

    path: Path
    schema: Path | None = None
    label_column: str | None = None
    exclude: tuple[str, ...] = ()
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS
    test_fraction: float = DEFAULT_TEST_FRACTION


@dataclass(frozen=True)
class TaskConfig:
    """Task context given to the judge."""

    description: str
    label_name: str = "the label"
    preset: str | None = None


@dataclass(frozen=True)
class JudgeConfig:
    """Oracle settings; ``mock`` needs preferences or a dominance order."""

    mode: str = JUDGE_MODE_MOCK
    endpoint: str | None = None
    model: str = DEFAULT_MODEL_ID
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    cache: Path | None = None
    preferences: Path | None = None
    dominance: tuple[str, ...] | None = None
    direct_noise: float = DEFAULT_DIRECT_NOISE
    symmetrize: bool = False
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff: float = DEFAULT_BACKOFF_SECONDS
    timeout: float = DEFAULT_REQUEST_TIMEOUT


@dataclass(frozen=True)
class RankingConfig:
    """Comparison budget and estimator."""

    N: int = DEFAULT_COMPARISONS
    method: str = METHOD_PAIRWISE
    delta: float = DEFAULT_ACTIVE_DELTA
    replacement: bool = True


@dataclass(frozen=True)
class SweepConfig:
    """K-sweep settings; ``K_max`` of None means every feature."""

    K_max: int | None = None
    alpha: float = DEFAULT_ALPHA
    l2_lambda: float = DEFAULT_L2_LAMBDA


@dataclass(frozen=True)
class BaselinesConfig:
    """Settings of the accuracy-first rankers."""

    lr_lambda: float = DEFAULT_LR_BASELINE_LAMBDA
    val_fraction: float = DEFAULT_VALIDATION_FRACTION
    path_points: int = DEFAULT_GL_PATH_POINTS


@dataclass(frozen=True)
class BenchConfig:
    """Ranking benchmark and stability experiment settings."""

    Ns: tuple[int, ...] = DEFAULT_BENCH_NS
    truth: str = TRUTH_SAMPLED
    truth_n: int = DEFAULT_TRUTH_COMPARISONS
    repeats: int = DEFAULT_BENCH_REPEATS
    methods: tuple[str, ...] = (METHOD_COUNTING, METHOD_ACTIVE)
    stability_runs: int = DEFAULT_STABILITY_RUNS


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration of one experiment run."""

    data: DataConfig
    task: TaskConfig
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    baselines: BaselinesConfig = field(default_factory=BaselinesConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    seed: int = 0
    output: Path = Path("runs")

    @classmethod
    def from_dict(
        cls, document: dict[str, Any], base_dir: str | Path | None = None
    ) -> RunConfig:
        """Validate ``document`` and build a config.

        Relative paths are resolved against ``base_dir`` when given.

        Raises:
            ConfigError: The document fails validation.
        """
        try:
            doc = CONFIG_SCHEMA(document)
        except vol.Invalid as err:
            raise ConfigError(f"Invalid configuration: {err}") from err

        base = Path(base_dir) if base_dir is not None else None

        def resolve(value: str | None) -> Path | None:
            if value is None:
                return None
            path = Path(value).expanduser()
            if base is not None and not path.is_absolute():
                path = base / path
            return path

        data = doc["data"]
        task = doc["task"]
        judge = doc["judge"]
        description = task.get("description")
        preset = task.get("preset")
        if description is None:
            if preset is None:
                raise ConfigError("task needs a description or a preset")
            description = TASK_PRESETS[preset]

        if judge["mode"] == JUDGE_MODE_MOCK:
            if not judge.get("preferences") and not judge.get("dominance"):
                raise ConfigError(
                    "Mock judge needs a preference matrix file or a dominance order"
                )
        elif not judge.get("endpoint") or not judge.get("api_key_env"):
            raise ConfigError("Live judge needs an endpoint and api_key_env")

        sweep = doc["sweep"]
        dominance = judge.get("dominance")
        return cls(
            data=DataConfig(
                path=resolve(data["path"]),  # type: ignore[arg-type]
                schema=resolve(data.get("schema")),
                label_column=data.get("label_column"),
                exclude=tuple(data["exclude"]),
                missing_tokens=tuple(data["missing_tokens"]),
                test_fraction=data["test_fraction"],
            ),
            task=TaskConfig(
                description=description,
                label_name=task["label_name"],
                preset=preset,
            ),
            judge=JudgeConfig(
                mode=judge["mode"],
                endpoint=judge.get("endpoint"),
                model=judge["model"],
                api_key_env=judge["api_key_env"],
                max_in_flight=judge["max_in_flight"],
                cache=resolve(judge.get("cache")),
                preferences=resolve(judge.get("preferences")),
                dominance=tuple(dominance) if dominance else None,
                direct_noise=judge["direct_noise"],
                symmetrize=judge["symmetrize"],
                max_attempts=judge["max_attempts"],
                backoff=judge["backoff"],
                timeout=judge["timeout"],
            ),
            ranking=RankingConfig(**doc["ranking"]),
            sweep=SweepConfig(
                K_max=sweep.get("K_max"),
                alpha=sweep["alpha"],
                l2_lambda=sweep["lambda"],
            ),
            baselines=BaselinesConfig(**doc["baselines"]),
            bench=BenchConfig(
                Ns=tuple(doc["bench"]["Ns"]),
                truth=doc["bench"]["truth"],
                truth_n=doc["bench"]["truth_n"],
                repeats=doc["bench"]["repeats"],
                methods=tuple(doc["bench"]["methods"]),
                stability_runs=doc["bench"]["stability_runs"],
            ),
            seed=doc["seed"],
            output=resolve(doc["output"]),  # type: ignore[arg-type]
        )

    def with_overrides(
        self, seed: int | None = None, output: str | Path | None = None
    ) -> RunConfig:
        """Return a copy with command-line overrides applied."""
        config = self
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed must be non-negative")
            config = replace(config, seed=seed)
        if output is not None:
            config = replace(config, output=Path(output))
        return config

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration as a JSON-ready document."""

        def plain(value: Any) -> Any:
            if isinstance(value, Path):
                return str(value)
            if isinstance(value, dict):
                return {key: plain(item) for key, item in value.items()}
            if isinstance(value, (list, tuple)):
                return [plain(item) for item in value]
            return value

        document = plain(asdict(self))
        document["sweep"]["lambda"] = document["sweep"].pop("l2_lambda")
        return document


def load_config(path: str | Path) -> RunConfig:
    """Read a TOML or JSON config file, chosen by extension.

    Raises:
        ConfigError: Unreadable file, unknown extension or invalid content.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with path.open("rb") as handle:
                document = tomllib.load(handle)
        elif suffix == ".json":
            with path.open(encoding="utf-8") as handle:
                document = json.load(handle)
        else:
            raise ConfigError(
                f"Unsupported config format {suffix!r}; use .toml or .json"
            )
    except OSError as err:
        raise ConfigError(f"Cannot read config {path}: {err}") from err
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise ConfigError(f"Cannot parse config {path}: {err}") from err

    if not isinstance(document, dict):
        raise ConfigError(f"Config {path} must hold a table/object at top level")
    config = RunConfig.from_dict(document, base_dir=path.parent)
    _LOGGER.debug(
        "Loaded config %s (seed %d, judge %s)", path, config.seed, config.judge.mode
    )
    return config
