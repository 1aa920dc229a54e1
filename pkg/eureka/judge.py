"""Pairwise interestingness judges: live LLM, seeded mock and direct ranking."""

from __future__ import annotations

import asyncio
from collections.abc import Sequence
from dataclasses import dataclass
import hashlib
import json
import logging
from pathlib import Path
import re
import threading
import time
from typing import TYPE_CHECKING, Any, Callable, Literal, Protocol, TextIO

import numpy as np

from .cache import TranscriptCache, make_cache_key
from .client import ChatClient
from .const import (
    DEFAULT_BACKOFF_SECONDS,
    DEFAULT_DIRECT_NOISE,
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MAX_IN_FLIGHT,
    DIRECT_PROMPT,
    DIRECT_REPROMPT,
    PAIRWISE_PROMPT,
    PAIRWISE_REPROMPT,
    PROMPT_TEMPLATE_VERSION,
    SOURCE_CACHE,
    SOURCE_LIVE,
    SOURCE_MOCK,
    SYSTEM_PROMPT,
)
from .data import FeatureSpec
from .exceptions import ConfigError, JudgeError, ReplyParseError, TransportError

if TYPE_CHECKING:
    from .ranking import Ranking

_LOGGER = logging.getLogger(__name__)

Winner = Literal["A", "B"]

_WINNER_PATTERN = re.compile(r"\b([AB])\b", re.IGNORECASE)
_LIST_MARKER = re.compile(r"^\s*(?:\d+\s*[.):-]|[-*•])\s*")


@dataclass(frozen=True)
class ComparisonQuery:
    """One pairwise interestingness question."""

    task_description: str
    label_name: str
    feature_a: FeatureSpec
    feature_b: FeatureSpec

    def __post_init__(self) -> None:
        """Validate the query."""
        if self.feature_a.name == self.feature_b.name:
            raise ValueError("A feature cannot be compared with itself")
        texts = (
            self.task_description,
            self.label_name,
            self.feature_a.name,
            self.feature_b.name,
        )
        if any(not text.strip() for text in texts):
            raise ValueError("Query texts must be non-empty")


@dataclass(frozen=True)
class ComparisonResult:
    """Outcome of one pairwise judgment."""

    winner: Winner
    raw_response: str
    source: str
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        """Validate the result."""
        if self.winner not in ("A", "B"):
            raise ValueError(f"Winner must be 'A' or 'B', got {self.winner!r}")
        if self.source not in (SOURCE_LIVE, SOURCE_MOCK, SOURCE_CACHE):
            raise ValueError(f"Unknown result source {self.source!r}")
        if self.latency_ms < 0:
            raise ValueError("Latency must be non-negative")


@dataclass(frozen=True)
class PreferenceMatrix:
    """Pairwise win probabilities: ``matrix[i][j]`` = Pr[i beats j]."""

    names: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        """Validate the matrix and normalize its diagonal to 0.5."""
        m = len(self.names)
        if m < 2 or len(set(self.names)) != m:
            raise ValueError("Preference matrix needs at least two distinct names")
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (m, m):
            raise ValueError(f"Preference matrix must be {m}x{m}")
        np.fill_diagonal(matrix, 0.5)
        if np.any(matrix < 0) or np.any(matrix > 1):
            raise ValueError("Preference probabilities must lie in [0, 1]")
        if not np.allclose(matrix + matrix.T, 1.0, atol=1e-9):
            raise ValueError("Preference matrix must satisfy P[i][j] + P[j][i] = 1")
        object.__setattr__(self, "matrix", matrix)

    @property
    def size(self) -> int:
        """Number of items."""
        return len(self.names)

    def index(self, name: str) -> int:
        """Position of ``name``."""
        return self.names.index(name)

    def prob(self, a: str, b: str) -> float:
        """Probability that ``a`` beats ``b``."""
        return float(self.matrix[self.index(a), self.index(b)])

    @classmethod
    def from_dominance(cls, names: Sequence[str]) -> PreferenceMatrix:
        """Deterministic transitive order: earlier names always win."""
        m = len(names)
        matrix = np.triu(np.ones((m, m)), k=1)
        return cls(tuple(names), matrix)

    @classmethod
    def from_btl(
        cls, names: Sequence[str], strengths: Sequence[float]
    ) -> PreferenceMatrix:
        """Bradley-Terry-Luce matrix ``s_i / (s_i + s_j)``."""
        s = np.asarray(strengths, dtype=float)
        if s.shape != (len(names),) or np.any(s <= 0):
            raise ValueError("BTL strengths must be positive, one per name")
        return cls(tuple(names), s[:, None] / (s[:, None] + s[None, :]))

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> PreferenceMatrix:
        """Build from a ``matrix``, BTL ``strengths`` or ``dominance`` document."""
        names = document["names"]
        if "matrix" in document:
            return cls(tuple(names), np.asarray(document["matrix"], dtype=float))
        if "strengths" in document:
            return cls.from_btl(names, document["strengths"])
        if document.get("dominance"):
            return cls.from_dominance(names)
        raise ValueError("Preference document needs matrix, strengths or dominance")

    @classmethod
    def load(cls, path: str | Path) -> PreferenceMatrix:
        """Load a preference document from a JSON file."""
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls.from_dict(document)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
            raise ConfigError(f"Cannot load preference matrix {path}: {err}") from err

    def to_dict(self) -> dict[str, Any]:
        """Serialize as ``{names, matrix}``."""
        return {"names": list(self.names), "matrix": self.matrix.tolist()}


def stable_uniform(*parts: object) -> float:
    """Deterministic uniform draw in [0, 1) keyed by ``parts``."""
    digest = hashlib.blake2b(
        "|".join(str(part) for part in parts).encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2.0**64


class Oracle(Protocol):
    """Anything that can answer pairwise and direct interestingness prompts."""

    model_id: str
    source: str
    concurrent: bool

    def judge(self, query: ComparisonQuery, seed: int, draw: int) -> tuple[Winner, str]:
        """Return the winner and the raw reply for one query."""
        ...

    def rank_directly(
        self,
        features: Sequence[FeatureSpec],
        task_description: str,
        label_name: str,
        seed: int,
    ) -> tuple[list[str], str]:
        """Return a full ranking (best first) and the raw reply."""
        ...


class MockOracle:
    """Seeded judge driven by a preference matrix.

    A pairwise verdict is a Bernoulli(P[a][b]) draw determined entirely by
    (seed, a, b, draw index). Direct rankings return the analytic Borda
    order with each adjacent pair swapped with probability ``direct_noise``.
    """

    source = SOURCE_MOCK
    concurrent = False

    def __init__(
        self,
        preferences: PreferenceMatrix,
        direct_noise: float = DEFAULT_DIRECT_NOISE,
        model_id: str = "mock",
    ) -> None:
        """Initialize the mock judge."""
        if not 0.0 <= direct_noise <= 1.0:
            raise ValueError("direct_noise must lie in [0, 1]")
        self.preferences = preferences
        self.direct_noise = direct_noise
        self.model_id = model_id

    def judge(self, query: ComparisonQuery, seed: int, draw: int) -> tuple[Winner, str]:
        """Draw the verdict for one query."""
        a, b = query.feature_a.name, query.feature_b.name
        p = self.preferences.prob(a, b)
        winner: Winner = "A" if stable_uniform(seed, a, b, draw) < p else "B"
        return winner, winner

    def rank_directly(
        self,
        features: Sequence[FeatureSpec],
        task_description: str,
        label_name: str,
        seed: int,
    ) -> tuple[list[str], str]:
        """Return the perturbed analytic Borda order."""
        names = [feature.name for feature in features]
        idx = [self.preferences.index(name) for name in names]
        sub = self.preferences.matrix[np.ix_(idx, idx)]
        m = len(names)
        scores = (sub.sum(axis=1) - 0.5) / (m - 1)
        order = sorted(range(m), key=lambda i: (-scores[i], i))
        rng = np.random.default_rng(seed)
        for i in range(m - 1):
            if rng.random() < self.direct_noise:
                order[i], order[i + 1] = order[i + 1], order[i]
        ranked = [names[i] for i in order]
        return ranked, "\n".join(ranked)


def parse_winner(reply: str) -> Winner | None:
    """Return the first standalone ``A`` or ``B`` token of a reply."""
    match = _WINNER_PATTERN.search(reply)
    if match is None:
        return None
    return "A" if match.group(1).upper() == "A" else "B"


def _match_name(line: str, names: Sequence[str]) -> str | None:
    cleaned = _LIST_MARKER.sub("", line).strip().strip("`*\"'").strip()
    if not cleaned:
        return None
    for folded in (False, True):
        text = cleaned.casefold() if folded else cleaned
        best = None
        for name in names:
            candidate = name.casefold() if folded else name
            if text == candidate:
                return name
            if text.startswith(candidate):
                rest = text[len(candidate)]
                if not (rest.isalnum() or rest == "_"):
                    if best is None or len(name) > len(best):
                        best = name
        if best is not None:
            return best
    return None


def parse_ranking(reply: str, names: Sequence[str]) -> list[str]:
    """Parse a one-name-per-line ranking reply into a permutation of ``names``.

    Raises:
        ReplyParseError: A feature is missing or listed twice.
    """
    ranked: list[str] = []
    for line in reply.splitlines():
        name = _match_name(line, names)
        if name is None:
            continue
        if name in ranked:
            raise ReplyParseError(f"Feature {name!r} listed twice", raw_response=reply)
        ranked.append(name)
    missing = [name for name in names if name not in ranked]
    if missing:
        raise ReplyParseError(f"Ranking omits features {missing}", raw_response=reply)
    return ranked


class LiveOracle:
    """LLM judge reached over HTTP.

    Transport failures and unparseable replies are retried up to
    ``max_attempts`` times; transport failures back off exponentially and
    parse failures re-prompt within the same conversation.
    """

    source = SOURCE_LIVE
    concurrent = True

    def __init__(
        self,
        client: ChatClient,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff: float = DEFAULT_BACKOFF_SECONDS,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        """Initialize the live judge."""
        self.client = client
        self.model_id = client.model
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep

    def _converse(
        self,
        messages: list[dict[str, str]],
        parse: Callable[[str], Any],
        reprompt: str,
    ) -> tuple[Any, str]:
        last_error: JudgeError | None = None
        for attempt in range(self.max_attempts):
            try:
                reply = self.client.complete(messages)
            except TransportError as err:
                last_error = err
                if attempt < self.max_attempts - 1:
                    _LOGGER.warning(
                        "Judge request failed (attempt %d/%d): %s, retrying...",
                        attempt + 1,
                        self.max_attempts,
                        err,
                    )
                    self._sleep(self.backoff * 2**attempt)
                continue

            try:
                parsed = parse(reply)
            except ReplyParseError as err:
                parsed, last_error = None, err
            if parsed is not None:
                return parsed, reply
            if last_error is None or last_error.raw_response != reply:
                last_error = ReplyParseError(
                    "Could not parse judge reply", raw_response=reply
                )
            _LOGGER.warning(
                "Unparseable judge reply (attempt %d/%d): %r",
                attempt + 1,
                self.max_attempts,
                reply[:200],
            )
            messages = [
                *messages,
                {"role": "assistant", "content": reply},
                {"role": "user", "content": reprompt},
            ]

        assert last_error is not None  # nosec B101
        _LOGGER.error(
            "Judge gave no usable reply after %d attempts: %s",
            self.max_attempts,
            last_error,
        )
        raise last_error

    def judge(self, query: ComparisonQuery, seed: int, draw: int) -> tuple[Winner, str]:
        """Ask the model which single-feature rule is more interesting."""
        messages = [
            {
                "role": "system",
                "content": SYSTEM_PROMPT.format(
                    task_description=query.task_description,
                    label_name=query.label_name,
                ),
            },
            {
                "role": "user",
                "content": PAIRWISE_PROMPT.format(
                    label_name=query.label_name,
                    name_a=query.feature_a.name,
                    description_a=query.feature_a.text,
                    name_b=query.feature_b.name,
                    description_b=query.feature_b.text,
                ),
            },
        ]
        winner, reply = self._converse(messages, parse_winner, PAIRWISE_REPROMPT)
        return winner, reply

    def rank_directly(
        self,
        features: Sequence[FeatureSpec],
        task_description: str,
        label_name: str,
        seed: int,
    ) -> tuple[list[str], str]:
        """Ask the model for a full ranking in a single prompt."""
        names = [feature.name for feature in features]
        feature_lines = "\n".join(f"- {f.name}: {f.text}" for f in features)
        messages = [
            {
                "role": "system",
                "content": SYSTEM_PROMPT.format(
                    task_description=task_description, label_name=label_name
                ),
            },
            {
                "role": "user",
                "content": DIRECT_PROMPT.format(
                    label_name=label_name, feature_lines=feature_lines
                ),
            },
        ]
        ranked, reply = self._converse(
            messages,
            lambda text: parse_ranking(text, names),
            DIRECT_REPROMPT.format(names=", ".join(names)),
        )
        return ranked, reply


def compare(
    oracle: Oracle,
    q: ComparisonQuery,
    seed: int,
    draw: int = 0,
    cache: TranscriptCache | None = None,
) -> ComparisonResult:
    """Judge one query, consulting the cache first.

    Raises:
        JudgeError: The oracle failed after its retries.
    """
    key = None
    if cache is not None:
        key = make_cache_key(q, PROMPT_TEMPLATE_VERSION, oracle.model_id, seed, draw)
        cached = cache.get(key)
        if cached is not None:
            return cached

    start = time.perf_counter()
    winner, raw = oracle.judge(q, seed, draw)
    latency_ms = (time.perf_counter() - start) * 1000.0
    result = ComparisonResult(
        winner=winner, raw_response=raw, source=oracle.source, latency_ms=latency_ms
    )
    if cache is not None and key is not None:
        cache.put(key, result)
    return result


def direct_rank(
    oracle: Oracle,
    features: Sequence[FeatureSpec],
    task_description: str,
    label_name: str = "the label",
    seed: int = 0,
) -> Ranking:
    """Ask the judge for a full ranking in one prompt.

    Raises:
        ValueError: Fewer than two features.
        ReplyParseError: The reply is not a permutation after retries.
    """
    from .ranking import Ranking

    if len(features) < 2:
        raise ValueError("Direct ranking needs at least two features")
    ranked, _ = oracle.rank_directly(features, task_description, label_name, seed)
    names = [feature.name for feature in features]
    if sorted(ranked) != sorted(names):
        raise ReplyParseError(
            "Direct ranking is not a permutation of the features",
            raw_response="\n".join(ranked),
        )
    return Ranking(tuple(ranked))


@dataclass(frozen=True)
class ComparisonRecord:
    """One transcript entry: the ordered pair, its draw index and the result."""

    feature_a: str
    feature_b: str
    seed: int
    draw: int
    result: ComparisonResult

    def to_dict(self) -> dict[str, Any]:
        """Serialize for the transcript file."""
        return {
            "a": self.feature_a,
            "b": self.feature_b,
            "seed": self.seed,
            "draw": self.draw,
            "winner": self.result.winner,
            "source": self.result.source,
            "latency_ms": round(self.result.latency_ms, 3),
            "raw_response": self.result.raw_response,
        }


class Judge:
    """Oracle bound to one task, with caching, concurrency and a transcript.

    ``queries_issued`` counts oracle calls that missed the cache; it is the
    only cost accounting kept.
    """

    def __init__(
        self,
        oracle: Oracle,
        features: Sequence[FeatureSpec],
        task_description: str,
        label_name: str,
        cache: TranscriptCache | None = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        symmetrize: bool = False,
    ) -> None:
        """Initialize the judge."""
        self.oracle = oracle
        self.features = {feature.name: feature for feature in features}
        self.task_description = task_description
        self.label_name = label_name
        self.cache = cache
        self.max_in_flight = max(1, max_in_flight)
        self.symmetrize = symmetrize
        self.transcript: list[ComparisonRecord] = []
        self.queries_issued = 0
        self._lock = threading.Lock()
        self._transcript_file: TextIO | None = None

    def stream_transcript(self, path: Path) -> None:
        """Append transcript records to ``path``; ``transcript`` stays empty."""
        self.close_transcript()
        path.parent.mkdir(parents=True, exist_ok=True)
        self._transcript_file = path.open("a", encoding="utf-8")

    def close_transcript(self) -> None:
        """Stop streaming and flush the transcript file."""
        with self._lock:
            if self._transcript_file is not None:
                self._transcript_file.close()
                self._transcript_file = None

    @property
    def feature_specs(self) -> list[FeatureSpec]:
        """Bound features in insertion order."""
        return list(self.features.values())

    def query(self, a: str, b: str) -> ComparisonQuery:
        """Build the query presenting ``a`` as A and ``b`` as B."""
        return ComparisonQuery(
            task_description=self.task_description,
            label_name=self.label_name,
            feature_a=self.features[a],
            feature_b=self.features[b],
        )

    def _compare_once(self, a: str, b: str, seed: int, draw: int) -> ComparisonResult:
        result = compare(self.oracle, self.query(a, b), seed, draw, self.cache)
        with self._lock:
            if result.source != SOURCE_CACHE:
                self.queries_issued += 1
            record = ComparisonRecord(a, b, seed, draw, result)
            if self._transcript_file is not None:
                line = json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False)
                self._transcript_file.write(line + "\n")
            else:
                self.transcript.append(record)
        _LOGGER.debug(
            "Compared %s vs %s (draw %d): %s [%s]",
            a,
            b,
            draw,
            result.winner,
            result.source,
        )
        return result

    def compare(self, a: str, b: str, seed: int, draw: int = 0) -> ComparisonResult:
        """Judge ``a`` (as A) against ``b`` (as B).

        With ``symmetrize`` both presentation orders are queried and a
        disagreement is settled by a fair coin seeded on the comparison.
        """
        first = self._compare_once(a, b, seed, draw)
        if not self.symmetrize:
            return first
        second = self._compare_once(b, a, seed, draw)
        first_pick = a if first.winner == "A" else b
        second_pick = b if second.winner == "A" else a
        if first_pick == second_pick:
            pick = first_pick
        else:
            pick = a if stable_uniform(seed, a, b, draw, "coin") < 0.5 else b
        if first.source == second.source:
            source = first.source
        else:
            source = self.oracle.source
        return ComparisonResult(
            winner="A" if pick == a else "B",
            raw_response=f"{first.raw_response}\n---\n{second.raw_response}",
            source=source,
            latency_ms=first.latency_ms + second.latency_ms,
        )

    async def async_compare_many(
        self, pairs: Sequence[tuple[str, str, int]], seed: int
    ) -> list[ComparisonResult]:
        """Judge many ``(a, b, draw)`` comparisons, results in input order.

        Live oracles run in the default executor with at most
        ``max_in_flight`` requests outstanding. Completed comparisons stay in
        the cache and transcript when one of them fails.

        Raises:
            JudgeError: The first failure among the comparisons.
        """
        if not self.oracle.concurrent or self.max_in_flight == 1:
            return [self.compare(a, b, seed, draw) for a, b, draw in pairs]

        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(self.max_in_flight)

        async def _run(a: str, b: str, draw: int) -> ComparisonResult:
            async with semaphore:
                return await loop.run_in_executor(None, self.compare, a, b, seed, draw)

        outcomes = await asyncio.gather(
            *(_run(a, b, draw) for a, b, draw in pairs), return_exceptions=True
        )
        failures = [o for o in outcomes if isinstance(o, BaseException)]
        if failures:
            _LOGGER.error(
                "%d of %d comparisons failed; %d completed results kept",
                len(failures),
                len(pairs),
                len(pairs) - len(failures),
            )
            raise failures[0]
        return [o for o in outcomes if isinstance(o, ComparisonResult)]

    def compare_many(
        self, pairs: Sequence[tuple[str, str, int]], seed: int
    ) -> list[ComparisonResult]:
        """Blocking wrapper around :meth:`async_compare_many`."""
        if not self.oracle.concurrent or self.max_in_flight == 1:
            return [self.compare(a, b, seed, draw) for a, b, draw in pairs]
        return asyncio.run(self.async_compare_many(pairs, seed))

    def rank_directly(self, seed: int) -> Ranking:
        """Direct one-prompt ranking of the bound features."""
        return direct_rank(
            self.oracle,
            self.feature_specs,
            self.task_description,
            self.label_name,
            seed,
        )
