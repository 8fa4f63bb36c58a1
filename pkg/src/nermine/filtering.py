"""Corpus filters applied between projection and the final dataset split.

Two quality levers, applied in this order:
  1. downsample_no_entity: all-O sentences teach a model little and dominate
     raw parallel text, so only a small random fraction is kept.
  2. filter_top_fraction: rank by alignment quality score and keep the best
     part of the corpus; badly aligned pairs produce wrong projections.
Both are deterministic for a fixed seed and input order, which keeps full
pipeline runs byte-identical.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus_io import ENTITY_TYPES, LabeledSentence
from .projection import ProjectionResult


@dataclass(frozen=True)
class ScoredSentence:
    result: ProjectionResult
    score: float
    has_entity: bool

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score out of [0,1]: {self.score}")
        if self.has_entity != self.result.labeled.has_entity():
            raise ValueError(
                f"sentence {self.result.labeled.id}: has_entity flag "
                "contradicts the tags"
            )

    @classmethod
    def from_result(cls, result: ProjectionResult, score: float) -> "ScoredSentence":
        return cls(result, score, result.labeled.has_entity())

    @classmethod
    def from_labeled(cls, labeled: LabeledSentence, score: float) -> "ScoredSentence":
        """Wrap a bare labeled sentence (the file-driven path, where drop
        logs and mappings are long gone)."""
        return cls.from_result(ProjectionResult(labeled, (), {}), score)

    @property
    def labeled(self) -> LabeledSentence:
        return self.result.labeled


@dataclass
class FilterConfig:
    keep_fraction: float = 0.35
    no_entity_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.keep_fraction <= 1.0):
            raise ValueError(f"keep_fraction out of (0,1]: {self.keep_fraction}")
        if not (0.0 <= self.no_entity_rate <= 1.0):
            raise ValueError(f"no_entity_rate out of [0,1]: {self.no_entity_rate}")


def downsample_no_entity(
    corpus: Sequence[ScoredSentence], rate: float, seed: int
) -> list[ScoredSentence]:
    """Keep every entity-bearing sentence; keep each entity-free one
    independently with probability rate (Bernoulli, not an exact quota, so
    the pass stays single-pass and streaming-friendly)."""
    if not (0.0 <= rate <= 1.0):
        raise ValueError(f"rate out of [0,1]: {rate}")
    rng = random.Random(seed)
    kept = []
    for sentence in corpus:
        if sentence.has_entity or rng.random() < rate:
            kept.append(sentence)
    return kept


def filter_top_fraction(
    corpus: Sequence[ScoredSentence], keep_fraction: float
) -> list[ScoredSentence]:
    """Keep the ceil(keep_fraction * N) best-scoring sentences.

    Ties break toward earlier corpus position; the output preserves the
    original corpus order (rank decides membership only).
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep_fraction out of (0,1]: {keep_fraction}")
    n_keep = math.ceil(keep_fraction * len(corpus))
    ranked = sorted(range(len(corpus)), key=lambda k: (-corpus[k].score, k))
    chosen = sorted(ranked[:n_keep])
    return [corpus[k] for k in chosen]


# ---------------------------------------------------------------------------
# Dataset statistics


@dataclass(frozen=True)
class StatsReport:
    sentences: int
    tokens: int
    entities: Mapping[str, int]
    no_entity_sentences: int

    @property
    def total_entities(self) -> int:
        return sum(self.entities.values())


def corpus_stats(corpus: Iterable[LabeledSentence]) -> StatsReport:
    sentences = 0
    tokens = 0
    entities = {etype: 0 for etype in ENTITY_TYPES}
    no_entity = 0
    for sentence in corpus:
        sentences += 1
        tokens += len(sentence.tokens)
        spans = sentence.spans()
        if not spans:
            no_entity += 1
        for span in spans:
            entities[span.etype] += 1
    return StatsReport(sentences, tokens, entities, no_entity)


def stats_keyvalues(stats: StatsReport) -> str:
    """Machine-readable key=value form, one key per line."""
    lines = [
        f"sentences={stats.sentences}",
        f"tokens={stats.tokens}",
        f"no_entity_sentences={stats.no_entity_sentences}",
    ]
    for etype in ENTITY_TYPES:
        lines.append(f"entities_{etype}={stats.entities.get(etype, 0)}")
    return "\n".join(lines) + "\n"


def format_stats_table(named: Sequence[tuple[str, StatsReport]]) -> str:
    """Fixed-width summary with one row per split and per-type columns."""
    header = f"{'split':<10}{'sentences':>12}{'tokens':>12}" + "".join(
        f"{etype:>8}" for etype in ENTITY_TYPES
    ) + f"{'no-entity':>12}"
    lines = [header]
    for name, stats in named:
        row = f"{name:<10}{stats.sentences:>12}{stats.tokens:>12}" + "".join(
            f"{stats.entities.get(etype, 0):>8}" for etype in ENTITY_TYPES
        ) + f"{stats.no_entity_sentences:>12}"
        lines.append(row)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Ratio split


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n items; ties toward earlier
    splits. Exact for ratios that divide n evenly."""
    if n < 0:
        raise ValueError("negative corpus size")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1: {ratios}")
    floors = [math.floor(r * n) for r in ratios]
    remainders = [r * n - f for r, f in zip(ratios, floors)]
    shortfall = n - sum(floors)
    for k in sorted(range(len(ratios)), key=lambda k: (-remainders[k], k))[:shortfall]:
        floors[k] += 1
    return floors


def split_corpus(
    items: Sequence, ratios: Sequence[float], seed: int
) -> list[list]:
    """Seeded shuffle, then partition by largest-remainder sizes. Items come
    back in shuffled order inside each part."""
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    parts = []
    cursor = 0
    for size in split_sizes(len(items), ratios):
        parts.append(shuffled[cursor : cursor + size])
        cursor += size
    return parts
