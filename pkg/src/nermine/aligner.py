"""IBM Model 1 word alignment trained with EM, plus link extraction and
symmetrization.

The model is the classic lexical-translation table t(emitted | conditioning)
with an optional NULL word on the conditioning side. Training one table per
direction and intersecting the two Viterbi link sets removes most spurious
many-to-one links; see symmetrize_intersection. Richer aligners (HMM, neural)
are deliberately out of scope; their output can be imported through the
Pharaoh format instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus_io import AlignmentLinks, CorpusFormatError, SentencePair

FORWARD = "src->tgt"
BACKWARD = "tgt->src"
DIRECTIONS = (FORWARD, BACKWARD)

#: Conditioning-side pseudo-word collecting unaligned emissions. Corpus
#: tokens must not collide with it; train_ibm1 checks.
NULL_WORD = "<NULL>"

# E-step chunk size. Fixed (never derived from the worker count) so the
# partial-count merge order, and therefore the trained table, is bit-identical
# for any --jobs value.
_CHUNK = 512

#: src-index -> set of tgt indices (or the transpose); the sparse form the
#: projection step consumes.
DirectionalMapping = dict[int, set[int]]


@dataclass
class EmConfig:
    iterations: int = 5
    prob_floor: float = 1e-12
    use_null: bool = True
    # Optional guard against runaway vocabularies on unsegmented input;
    # None disables the check.
    vocab_cap: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (0.0 < self.prob_floor < 1e-3):
            raise ValueError(f"prob_floor out of (0, 1e-3): {self.prob_floor}")
        if self.vocab_cap is not None and self.vocab_cap < 1:
            raise ValueError(f"vocab_cap must be positive, got {self.vocab_cap}")


@dataclass(frozen=True)
class TranslationTable:
    """Trained lexical table. t[cond][emit] is t(emit | cond); rows are
    normalized and every stored probability is positive. Treat the nested
    dicts as immutable."""

    direction: str
    t: Mapping[str, Mapping[str, float]]
    cond_vocab: frozenset[str]
    emit_vocab: frozenset[str]
    null_word: str | None = NULL_WORD
    log_likelihood: tuple[float, ...] = ()

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "cond_vocab", frozenset(self.cond_vocab))
        object.__setattr__(self, "emit_vocab", frozenset(self.emit_vocab))
        object.__setattr__(self, "log_likelihood", tuple(self.log_likelihood))
        for cond, row in self.t.items():
            total = 0.0
            for emit, p in row.items():
                if not (0.0 < p <= 1.0):
                    raise ValueError(f"t({emit!r}|{cond!r}) out of (0,1]: {p}")
                total += p
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"row for {cond!r} sums to {total!r}, not 1")

    def prob(self, cond: str, emit: str) -> float:
        return self.t.get(cond, {}).get(emit, 0.0)


# ---------------------------------------------------------------------------
# EM training


def _orient(
    corpus: Sequence[SentencePair], direction: str
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Return (conditioning tokens, emitted tokens) per pair."""
    if direction == FORWARD:
        return [(p.src_tokens, p.tgt_tokens) for p in corpus]
    return [(p.tgt_tokens, p.src_tokens) for p in corpus]


def _estep_chunk(args):
    """Expected counts and log-likelihood contribution for one chunk.

    Module-level so it pickles for the process pool. The uniform 1/(L+1)
    alignment prior enters the likelihood but cancels in the posterior.
    """
    sentences, t, null_word = args
    counts: dict[str, dict[str, float]] = {}
    loglik = 0.0
    for cond_tokens, emit_tokens in sentences:
        cond = list(cond_tokens)
        if null_word is not None:
            cond.append(null_word)
        log_prior = math.log(len(cond))
        for emit in emit_tokens:
            denom = 0.0
            for c in cond:
                denom += t[c][emit]
            loglik += math.log(denom) - log_prior
            for c in cond:
                row = counts.setdefault(c, {})
                row[emit] = row.get(emit, 0.0) + t[c][emit] / denom
    return counts, loglik


def train_ibm1(
    corpus: Sequence[SentencePair],
    direction: str,
    config: EmConfig | None = None,
    jobs: int = 1,
) -> TranslationTable:
    """Fit t(emit|cond) by EM over co-occurring word pairs.

    Initialization is uniform over the emitted vocabulary, so only pairs
    that co-occur in some sentence ever get probability mass and the table
    stays sparse. The per-iteration corpus log-likelihood (measured with
    the table entering the iteration) is recorded on the result and is
    non-decreasing, which is the cheapest correctness check EM offers.
    """
    config = config or EmConfig()
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    if not corpus:
        raise ValueError("cannot train on an empty corpus")

    oriented = _orient(corpus, direction)
    cond_vocab: set[str] = set()
    emit_vocab: set[str] = set()
    for cond_tokens, emit_tokens in oriented:
        cond_vocab.update(cond_tokens)
        emit_vocab.update(emit_tokens)
    if config.vocab_cap is not None:
        for name, vocab in (("conditioning", cond_vocab), ("emitted", emit_vocab)):
            if len(vocab) > config.vocab_cap:
                raise ValueError(
                    f"{name} vocabulary size {len(vocab)} exceeds cap {config.vocab_cap}"
                )
    null_word = NULL_WORD if config.use_null else None
    if null_word is not None and null_word in cond_vocab:
        raise ValueError(f"corpus contains the reserved token {null_word!r}")

    # Sparse uniform init over co-occurring pairs.
    uniform = 1.0 / len(emit_vocab)
    t: dict[str, dict[str, float]] = {}
    for cond_tokens, emit_tokens in oriented:
        cond = list(cond_tokens)
        if null_word is not None:
            cond.append(null_word)
        for c in cond:
            row = t.setdefault(c, {})
            for emit in emit_tokens:
                row.setdefault(emit, uniform)

    chunks = [oriented[k : k + _CHUNK] for k in range(0, len(oriented), _CHUNK)]
    logliks: list[float] = []
    for _ in range(config.iterations):
        arg_iter = ((chunk, t, null_word) for chunk in chunks)
        if jobs > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                partials = list(pool.map(_estep_chunk, arg_iter))
        else:
            partials = [_estep_chunk(args) for args in arg_iter]

        # Merge partial counts in chunk order: the summation order is fixed
        # by the chunking, not the scheduler, hence bit-identical results.
        counts: dict[str, dict[str, float]] = {}
        loglik = 0.0
        for partial, partial_ll in partials:
            loglik += partial_ll
            for c, row in partial.items():
                dst = counts.setdefault(c, {})
                for emit, v in row.items():
                    dst[emit] = dst.get(emit, 0.0) + v
        logliks.append(loglik)

        # M-step. The floor is applied to the counts before normalizing so
        # each row still sums to exactly 1 and every probability stays > 0.
        t = {}
        for c, row in counts.items():
            floored = {emit: max(v, config.prob_floor) for emit, v in row.items()}
            z = sum(floored.values())
            t[c] = {emit: v / z for emit, v in floored.items()}

    return TranslationTable(
        direction=direction,
        t=t,
        cond_vocab=frozenset(cond_vocab),
        emit_vocab=frozenset(emit_vocab),
        null_word=null_word,
        log_likelihood=tuple(logliks),
    )


# ---------------------------------------------------------------------------
# Link extraction


def align_viterbi(table: TranslationTable, pair: SentencePair) -> AlignmentLinks:
    """Link each emitted-side word to its argmax conditioning word.

    Links are always returned in (src index, tgt index) orientation, for
    either table direction. Ties go to the lowest conditioning index; NULL
    absorbs a word only when strictly more probable than every real word,
    so degenerate corpora where t(e|NULL) equals t(e|w) still align. Words
    with no positive probability anywhere (out of vocabulary) are left
    unaligned rather than rejected.
    """
    if table.direction == FORWARD:
        cond_tokens, emit_tokens = pair.src_tokens, pair.tgt_tokens
        as_link = lambda ci, ei: (ci, ei)
    else:
        cond_tokens, emit_tokens = pair.tgt_tokens, pair.src_tokens
        as_link = lambda ci, ei: (ei, ci)

    null_row = table.t.get(table.null_word, {}) if table.null_word else {}
    links: set[tuple[int, int]] = set()
    probs: dict[tuple[int, int], float] = {}
    for ei, emit in enumerate(emit_tokens):
        best_p = 0.0
        best_ci = None
        for ci, c in enumerate(cond_tokens):
            p = table.t.get(c, {}).get(emit, 0.0)
            if p > best_p:
                best_p, best_ci = p, ci
        if best_ci is None or null_row.get(emit, 0.0) > best_p:
            continue
        link = as_link(best_ci, ei)
        links.add(link)
        probs[link] = best_p
    return AlignmentLinks(frozenset(links), probs)


def symmetrize_intersection(
    forward: AlignmentLinks, backward: AlignmentLinks
) -> AlignmentLinks:
    """Keep only links both directions agree on.

    Both arguments must already be in (src, tgt) orientation (align_viterbi
    guarantees that). Probabilities are taken from the forward run where
    available, else from the backward one.
    """
    links = forward.links & backward.links
    probs = {}
    for link in links:
        if link in forward.probs:
            probs[link] = forward.probs[link]
        elif link in backward.probs:
            probs[link] = backward.probs[link]
    return AlignmentLinks(links, probs)


def quality_score(pair: SentencePair, links: AlignmentLinks) -> float:
    """Geometric-mean link probability, normalized by target length.

    exp((sum of log p) / n) with n = len(tgt_tokens); the log-domain form
    survives corpus-scale sentences where a raw product underflows. Pairs
    with no links score 0.0.
    """
    if not links.links:
        return 0.0
    total = 0.0
    for link in sorted(links.links):
        p = links.probs.get(link)
        if p is None:
            raise ValueError(
                f"link {link} has no probability; use align_viterbi output or "
                "Pharaoh input with i-j-p tokens"
            )
        total += math.log(p)
    return math.exp(total / len(pair.tgt_tokens))


# ---------------------------------------------------------------------------
# DirectionalMapping conversions


def links_to_mapping(links: AlignmentLinks, keyed_by: str = "src") -> DirectionalMapping:
    """Sparse index map from one side of the links to the other."""
    mapping: DirectionalMapping = {}
    for i, j in links.links:
        if keyed_by == "src":
            mapping.setdefault(i, set()).add(j)
        elif keyed_by == "tgt":
            mapping.setdefault(j, set()).add(i)
        else:
            raise ValueError(f"keyed_by must be 'src' or 'tgt', got {keyed_by!r}")
    return mapping


def mapping_to_links(mapping: DirectionalMapping, keyed_by: str = "src") -> frozenset[tuple[int, int]]:
    if keyed_by not in ("src", "tgt"):
        raise ValueError(f"keyed_by must be 'src' or 'tgt', got {keyed_by!r}")
    links = set()
    for key, values in mapping.items():
        for value in values:
            links.add((key, value) if keyed_by == "src" else (value, key))
    return frozenset(links)


# ---------------------------------------------------------------------------
# Table serialization


def write_table(table: TranslationTable) -> str:
    """Plain-text form: one header line, then sorted cond<TAB>emit<TAB>prob
    rows with 17 significant digits (exact float round-trip)."""
    lines = [f"ibm1\t{table.direction}\t{len(table.cond_vocab)}\t{len(table.emit_vocab)}\n"]
    for cond in sorted(table.t):
        row = table.t[cond]
        for emit in sorted(row):
            lines.append(f"{cond}\t{emit}\t{row[emit]:.17g}\n")
    return "".join(lines)


def parse_table(text: str) -> TranslationTable:
    """Inverse of write_table. Training telemetry (log-likelihoods) is not
    serialized and comes back empty."""
    lines = text.splitlines()
    if not lines:
        raise CorpusFormatError("empty table file")
    header = lines[0].split("\t")
    if len(header) != 4 or header[0] != "ibm1":
        raise CorpusFormatError("bad table header", 1)
    direction = header[1]
    if direction not in DIRECTIONS:
        raise CorpusFormatError(f"unknown direction {direction!r}", 1)
    try:
        n_cond, n_emit = int(header[2]), int(header[3])
    except ValueError:
        raise CorpusFormatError("bad vocabulary sizes in header", 1) from None

    t: dict[str, dict[str, float]] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw:
            continue
        fields = raw.split("\t")
        if len(fields) != 3:
            raise CorpusFormatError(
                f"expected 'cond<TAB>emit<TAB>prob', got {len(fields)} fields", line_no
            )
        cond, emit, prob_text = fields
        try:
            p = float(prob_text)
        except ValueError:
            raise CorpusFormatError(f"bad probability {prob_text!r}", line_no) from None
        if cond in t and emit in t[cond]:
            raise CorpusFormatError(f"duplicate entry for ({cond!r}, {emit!r})", line_no)
        t.setdefault(cond, {})[emit] = p

    null_word = NULL_WORD if NULL_WORD in t else None
    cond_vocab = frozenset(c for c in t if c != NULL_WORD)
    emit_vocab = frozenset(e for row in t.values() for e in row)
    if len(cond_vocab) != n_cond or len(emit_vocab) != n_emit:
        raise CorpusFormatError(
            f"header claims {n_cond}/{n_emit} vocabulary entries, "
            f"found {len(cond_vocab)}/{len(emit_vocab)}"
        )
    try:
        return TranslationTable(
            direction=direction,
            t=t,
            cond_vocab=cond_vocab,
            emit_vocab=emit_vocab,
            null_word=null_word,
        )
    except ValueError as exc:
        raise CorpusFormatError(str(exc)) from None
