"""Project English entity spans onto target-language sentences through word
alignments.

The core rule: an entity is moved as a whole. All target indices aligned to
any word of the span are collected and the minimal covering range [l, r]
becomes the target span, so partially aligned entities still project to one
contiguous mention instead of fragments. With mode="intersected" the forward
mapping is first pruned against the reversed backward mapping, which removes
most one-to-many noise before ranges are taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .aligner import DirectionalMapping
from .corpus_io import EntitySpan, LabeledSentence, SentencePair, iob_from_spans

MODES = ("forward_only", "intersected")

DROP_UNALIGNED = "unaligned"
DROP_OVERLAP = "overlap"


def _check_mapping(mapping: DirectionalMapping, n_keys: int, n_values: int, name: str) -> None:
    for key, values in mapping.items():
        if not (0 <= key < n_keys):
            raise ValueError(f"{name}: key {key} out of range [0, {n_keys})")
        for value in values:
            if not (0 <= value < n_values):
                raise ValueError(f"{name}: value {value} out of range [0, {n_values})")


@dataclass(frozen=True)
class ProjectionInput:
    """One sentence pair with its English spans and both directional
    alignments (english2indic keyed by source index, indic2english keyed
    by target index)."""

    pair: SentencePair
    english_spans: tuple[EntitySpan, ...]
    english2indic: DirectionalMapping
    indic2english: DirectionalMapping

    def __post_init__(self):
        object.__setattr__(self, "english_spans", tuple(self.english_spans))
        n_src, n_tgt = len(self.pair.src_tokens), len(self.pair.tgt_tokens)
        prev_end = -1
        for span in sorted(self.english_spans, key=lambda s: s.start):
            if span.end >= n_src:
                raise ValueError(f"pair {self.pair.id}: span {span} out of bounds")
            if span.start <= prev_end:
                raise ValueError(f"pair {self.pair.id}: overlapping span {span}")
            prev_end = span.end
        _check_mapping(self.english2indic, n_src, n_tgt, f"pair {self.pair.id} english2indic")
        _check_mapping(self.indic2english, n_tgt, n_src, f"pair {self.pair.id} indic2english")


@dataclass(frozen=True)
class ProjectionResult:
    labeled: LabeledSentence
    dropped_spans: tuple[tuple[EntitySpan, str], ...]
    mapping_used: DirectionalMapping


def reverse_mapping(mapping: DirectionalMapping) -> DirectionalMapping:
    """Transpose: (i -> j) in the output iff (j -> i) in the input."""
    reversed_map: DirectionalMapping = {}
    for key, values in mapping.items():
        for value in values:
            reversed_map.setdefault(value, set()).add(key)
    return reversed_map


def intersect_mappings(a: DirectionalMapping, b: DirectionalMapping) -> DirectionalMapping:
    """Per-key set intersection over the union of keys; keys whose
    intersection is empty are kept with empty sets so lookups stay total."""
    keys = set(a) | set(b)
    return {key: a.get(key, set()) & b.get(key, set()) for key in keys}


def project_spans(inp: ProjectionInput, mode: str = "intersected") -> ProjectionResult:
    """Move each English span to the minimal target range covering its
    aligned words.

    Spans are processed left to right on the source side. A span none of
    whose words align is dropped ("unaligned"); a span whose target range
    collides with an already-placed one is dropped whole ("overlap") rather
    than truncated, so boundaries are never invented. Drops are recorded,
    never raised.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "forward_only":
        mapping = inp.english2indic
    else:
        mapping = intersect_mappings(
            reverse_mapping(inp.indic2english), inp.english2indic
        )

    placed: list[EntitySpan] = []
    dropped: list[tuple[EntitySpan, str]] = []
    for span in sorted(inp.english_spans, key=lambda s: s.start):
        indices: set[int] = set()
        for word_idx in range(span.start, span.end + 1):
            indices |= mapping.get(word_idx, set())
        if not indices:
            dropped.append((span, DROP_UNALIGNED))
            continue
        candidate = EntitySpan(span.etype, min(indices), max(indices))
        if any(candidate.overlaps(existing) for existing in placed):
            dropped.append((span, DROP_OVERLAP))
            continue
        placed.append(candidate)

    tags = iob_from_spans(placed, len(inp.pair.tgt_tokens))
    labeled = LabeledSentence(inp.pair.id, inp.pair.tgt_tokens, tags)
    return ProjectionResult(labeled, tuple(dropped), mapping)


def project_corpus(
    pairs: Sequence[SentencePair],
    english: Sequence[LabeledSentence],
    forward_links,
    backward_links,
    mode: str = "intersected",
) -> list[ProjectionResult]:
    """Element-wise projection over four parallel streams.

    english carries the source-side tags; its ids and tokens must match the
    pairs. forward_links and backward_links are AlignmentLinks sequences in
    (src, tgt) orientation (what align_viterbi returns for both table
    directions). Order is preserved; drops stay attached to each result.
    """
    from .aligner import links_to_mapping

    lengths = {len(pairs), len(english), len(forward_links), len(backward_links)}
    if len(lengths) > 1:
        raise ValueError(
            f"stream lengths differ: {len(pairs)} pairs, {len(english)} tagged "
            f"sentences, {len(forward_links)} forward / {len(backward_links)} "
            "backward alignments"
        )
    results = []
    for pair, sentence, fwd, bwd in zip(pairs, english, forward_links, backward_links):
        if sentence.id != pair.id:
            raise ValueError(
                f"id mismatch: tagged sentence {sentence.id!r} vs pair {pair.id!r}"
            )
        if sentence.tokens != pair.src_tokens:
            raise ValueError(
                f"pair {pair.id}: tagged tokens do not match the source side"
            )
        fwd.check_bounds(pair)
        bwd.check_bounds(pair)
        inp = ProjectionInput(
            pair=pair,
            english_spans=tuple(sentence.spans()),
            english2indic=links_to_mapping(fwd, "src"),
            indic2english=links_to_mapping(bwd, "tgt"),
        )
        results.append(project_spans(inp, mode))
    return results


def drop_stats(results: Iterable[ProjectionResult]) -> dict[str, int]:
    stats: dict[str, int] = {}
    for result in results:
        for _, reason in result.dropped_spans:
            stats[reason] = stats.get(reason, 0) + 1
    return stats


def write_drop_log(results: Iterable[ProjectionResult]) -> str:
    """One line per dropped span: pair_id, etype, source bounds, reason."""
    lines = []
    for result in results:
        for span, reason in result.dropped_spans:
            lines.append(
                f"{result.labeled.id}\t{span.etype}\t{span.start}\t{span.end}\t{reason}\n"
            )
    return "".join(lines)
