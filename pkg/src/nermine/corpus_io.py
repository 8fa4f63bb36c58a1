"""Readers, writers and core record types for the corpus formats the pipeline
touches: CoNLL-style tagged text, parallel plain text / bitext, and Pharaoh
alignment lines.

All parsers are pure functions over strings and all record types are frozen,
so everything here is safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

ENTITY_TYPES = ("PER", "LOC", "ORG")

#: Tags accepted after normalization. MISC is handled (dropped) during
#: parsing and never survives in memory.
VALID_TAGS = frozenset(
    ["O"] + [f"{prefix}-{etype}" for etype in ENTITY_TYPES for prefix in ("B", "I")]
)

_MISC_TAGS = frozenset(["B-MISC", "I-MISC"])


class CorpusFormatError(ValueError):
    """Malformed input in one of the supported text formats."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


def _check_token(token: str) -> None:
    if not token:
        raise ValueError("empty token")
    if any(ch.isspace() for ch in token):
        raise ValueError(f"token contains whitespace: {token!r}")


@dataclass(frozen=True)
class EntitySpan:
    """Typed contiguous token range, inclusive on both ends."""

    etype: str
    start: int
    end: int

    def __post_init__(self):
        if self.etype not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type: {self.etype!r}")
        if not (0 <= self.start <= self.end):
            raise ValueError(f"bad span bounds: [{self.start}, {self.end}]")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class LabeledSentence:
    """Tokens plus one IOB tag per token; validated at construction."""

    id: str
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"sentence {self.id}: {len(self.tokens)} tokens vs {len(self.tags)} tags"
            )
        if not self.tokens:
            raise ValueError(f"sentence {self.id}: empty sentence")
        for token in self.tokens:
            _check_token(token)
        problem = iob_problem(self.tags)
        if problem is not None:
            raise ValueError(f"sentence {self.id}: {problem}")

    def spans(self) -> list[EntitySpan]:
        return spans_from_iob(self.tags)

    def has_entity(self) -> bool:
        return any(tag != "O" for tag in self.tags)


@dataclass(frozen=True)
class SentencePair:
    """Source (English) and target token sequences sharing an id."""

    id: str
    src_tokens: tuple[str, ...]
    tgt_tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "src_tokens", tuple(self.src_tokens))
        object.__setattr__(self, "tgt_tokens", tuple(self.tgt_tokens))
        if not self.src_tokens or not self.tgt_tokens:
            raise ValueError(f"pair {self.id}: empty side")
        for token in self.src_tokens + self.tgt_tokens:
            _check_token(token)


@dataclass(frozen=True)
class AlignmentLinks:
    """Set of (source index, target index) links, optionally with a
    per-link probability in (0, 1]."""

    links: frozenset[tuple[int, int]]
    probs: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        object.__setattr__(self, "probs", dict(self.probs))
        for link, p in self.probs.items():
            if link not in self.links:
                raise ValueError(f"probability for non-link {link}")
            if not (0.0 < p <= 1.0):
                raise ValueError(f"link probability out of (0,1]: {p}")

    def check_bounds(self, pair: SentencePair) -> None:
        n_src, n_tgt = len(pair.src_tokens), len(pair.tgt_tokens)
        for i, j in self.links:
            if not (0 <= i < n_src and 0 <= j < n_tgt):
                raise ValueError(
                    f"pair {pair.id}: link {i}-{j} out of bounds for "
                    f"{n_src}x{n_tgt} sentence pair"
                )


# ---------------------------------------------------------------------------
# IOB tag sequences


def iob_problem(tags: Sequence[str]) -> str | None:
    """Return a description of the first IOB violation, or None if valid."""
    for k, tag in enumerate(tags):
        if tag not in VALID_TAGS:
            return f"invalid tag {tag!r} at position {k}"
        if tag.startswith("I-"):
            prev = tags[k - 1] if k > 0 else "O"
            if prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
                return f"dangling {tag} at position {k}"
    return None


def repair_iob(tags: Sequence[str]) -> tuple[list[str], int]:
    """Rewrite dangling I-X tags (after O, start, or a different type) to B-X.

    Returns the repaired sequence and the number of rewrites. Tags must
    already be drawn from the valid inventory.
    """
    repaired = list(tags)
    count = 0
    for k, tag in enumerate(repaired):
        if tag.startswith("I-"):
            prev = repaired[k - 1] if k > 0 else "O"
            if prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
                repaired[k] = "B-" + tag[2:]
                count += 1
    return repaired, count


def spans_from_iob(tags: Sequence[str]) -> list[EntitySpan]:
    """Extract entity spans from an IOB-valid tag sequence.

    B- always opens a new span, so adjacent same-type entities stay
    distinct. Raises on invalid sequences; callers must repair first.
    """
    problem = iob_problem(tags)
    if problem is not None:
        raise ValueError(problem)
    spans: list[EntitySpan] = []
    start = None
    etype = None
    for k, tag in enumerate(tags):
        if tag.startswith("B-"):
            if start is not None:
                spans.append(EntitySpan(etype, start, k - 1))
            start, etype = k, tag[2:]
        elif tag == "O":
            if start is not None:
                spans.append(EntitySpan(etype, start, k - 1))
            start = None
        # I- continues the open span
    if start is not None:
        spans.append(EntitySpan(etype, start, len(tags) - 1))
    return spans


def iob_from_spans(spans: Iterable[EntitySpan], n: int) -> tuple[str, ...]:
    """Inverse of spans_from_iob: serialize non-overlapping spans over a
    sentence of length n."""
    tags = ["O"] * n
    prev_end = -1
    for span in sorted(spans, key=lambda s: s.start):
        if span.end >= n:
            raise ValueError(f"span {span} out of bounds for length {n}")
        if span.start <= prev_end:
            raise ValueError(f"overlapping span {span}")
        prev_end = span.end
        tags[span.start] = "B-" + span.etype
        for k in range(span.start + 1, span.end + 1):
            tags[k] = "I-" + span.etype
    return tuple(tags)


# ---------------------------------------------------------------------------
# CoNLL


@dataclass
class ParseResult:
    sentences: list[LabeledSentence]
    repaired_tags: int = 0


def parse_conll_result(text: str) -> ParseResult:
    """Parse "token<TAB>tag" lines into sentences, normalizing as we go.

    MISC tags are rewritten to O (the pipeline only keeps PER/LOC/ORG) and
    dangling I-X is repaired to B-X with a counter. Unknown tag strings and
    malformed lines are hard errors carrying the 1-based line number.
    Sentence ids are 1-based ordinals.
    """
    sentences: list[LabeledSentence] = []
    repairs = 0
    tokens: list[str] = []
    tags: list[str] = []

    def flush():
        nonlocal repairs
        if not tokens:
            return
        fixed, n = repair_iob(tags)
        repairs += n
        sentences.append(
            LabeledSentence(str(len(sentences) + 1), tuple(tokens), tuple(fixed))
        )
        tokens.clear()
        tags.clear()

    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line:
            flush()
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise CorpusFormatError(
                f"expected 'token<TAB>tag', got {len(fields)} fields", line_no
            )
        token, tag = fields
        if tag in _MISC_TAGS:
            tag = "O"
        elif tag not in VALID_TAGS:
            raise CorpusFormatError(f"invalid tag {tag!r}", line_no)
        try:
            _check_token(token)
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line_no) from None
        tokens.append(token)
        tags.append(tag)
    flush()
    return ParseResult(sentences, repairs)


def parse_conll(text: str) -> list[LabeledSentence]:
    return parse_conll_result(text).sentences


def write_conll(sentences: Iterable[LabeledSentence]) -> str:
    """Bit-exact writer: "token\\ttag\\n" per line, "\\n" per sentence."""
    chunks = []
    for sentence in sentences:
        for token, tag in zip(sentence.tokens, sentence.tags):
            chunks.append(f"{token}\t{tag}\n")
        chunks.append("\n")
    return "".join(chunks)


# ---------------------------------------------------------------------------
# Parallel text


def parse_parallel(src_text: str, tgt_text: str) -> list[SentencePair]:
    """Zip two line-aligned plain-text files into sentence pairs.

    Line number (1-based) becomes the pair id.
    """
    src_lines = src_text.splitlines()
    tgt_lines = tgt_text.splitlines()
    if len(src_lines) != len(tgt_lines):
        raise CorpusFormatError(
            f"line count mismatch: {len(src_lines)} source vs {len(tgt_lines)} target"
        )
    pairs = []
    for line_no, (src, tgt) in enumerate(zip(src_lines, tgt_lines), start=1):
        try:
            pairs.append(SentencePair(str(line_no), tuple(src.split()), tuple(tgt.split())))
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line_no) from None
    return pairs


def parse_bitext(text: str) -> list[SentencePair]:
    """Parse a tab-separated bitext file: "src<TAB>tgt" or "id<TAB>src<TAB>tgt"."""
    pairs = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) == 2:
            pair_id, src, tgt = str(line_no), fields[0], fields[1]
        elif len(fields) == 3:
            pair_id, src, tgt = fields
        else:
            raise CorpusFormatError(
                f"expected 2 or 3 tab-separated columns, got {len(fields)}", line_no
            )
        try:
            pairs.append(SentencePair(pair_id, tuple(src.split()), tuple(tgt.split())))
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line_no) from None
    return pairs


# ---------------------------------------------------------------------------
# Pharaoh alignments


def parse_pharaoh(line: str, pair: SentencePair) -> AlignmentLinks:
    """Parse one space-separated "i-j" line (0-indexed, source-target).

    An optional "i-j-p" extension carries a per-link probability. Indices
    are bounds-checked against the pair.
    """
    links: set[tuple[int, int]] = set()
    probs: dict[tuple[int, int], float] = {}
    for token in line.split():
        parts = token.split("-", 2)
        if len(parts) < 2:
            raise CorpusFormatError(f"malformed alignment token {token!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise CorpusFormatError(f"malformed alignment token {token!r}") from None
        if i < 0 or j < 0:
            raise CorpusFormatError(f"negative index in {token!r}")
        if len(parts) == 3:
            try:
                p = float(parts[2])
            except ValueError:
                raise CorpusFormatError(f"malformed probability in {token!r}") from None
            if not (0.0 < p <= 1.0):
                raise CorpusFormatError(f"probability out of (0,1] in {token!r}")
            probs[(i, j)] = p
        links.add((i, j))
    result = AlignmentLinks(frozenset(links), probs)
    result.check_bounds(pair)
    return result


def write_pharaoh(links: AlignmentLinks) -> str:
    """Canonical Pharaoh line: links sorted by (i, j), probabilities (when
    present) printed with 17 significant digits for exact round-trip."""
    tokens = []
    for i, j in sorted(links.links):
        p = links.probs.get((i, j))
        if p is None:
            tokens.append(f"{i}-{j}")
        else:
            tokens.append(f"{i}-{j}-{p:.17g}")
    return " ".join(tokens)
