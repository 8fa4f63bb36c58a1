"""Scoring: exact-match span F1 (micro-averaged, with per-type breakdown)
and token-level Cohen's kappa for inter-annotator agreement.

A predicted span counts only if type, start and end all match a gold span in
the same sentence; there is no partial credit, so boundary mistakes (an
entity bleeding into following tokens) register as both a false positive and
a false negative. Kappa is computed over the full IOB tag inventory
including O, which penalizes boundary disagreement as well as type
disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus_io import ENTITY_TYPES, LabeledSentence

#: Full tag inventory for agreement statistics.
TAG_INVENTORY = ("O",) + tuple(
    f"{prefix}-{etype}" for etype in ENTITY_TYPES for prefix in ("B", "I")
)


@dataclass(frozen=True)
class TypeScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    per_type: Mapping[str, TypeScore]
    overall: TypeScore
    counts: Mapping[str, tuple[int, int, int]]  # etype -> (tp, fp, fn)

    @property
    def overall_counts(self) -> tuple[int, int, int]:
        tp = sum(c[0] for c in self.counts.values())
        fp = sum(c[1] for c in self.counts.values())
        fn = sum(c[2] for c in self.counts.values())
        return tp, fp, fn


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    p_o: float
    p_e: float
    contingency: Mapping[str, Mapping[str, int]]
    degenerate: bool = False
    basis: str = "token-iob"


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def _pair_by_id(
    a: Sequence[LabeledSentence], b: Sequence[LabeledSentence], what: str
) -> list[tuple[LabeledSentence, LabeledSentence]]:
    """Match sentences by id so corpus order does not matter."""
    if len(a) != len(b):
        raise ValueError(f"{what}: {len(a)} vs {len(b)} sentences")
    index = {}
    for sentence in a:
        if sentence.id in index:
            raise ValueError(f"{what}: duplicate sentence id {sentence.id!r}")
        index[sentence.id] = sentence
    pairs = []
    for sentence in b:
        other = index.pop(sentence.id, None)
        if other is None:
            raise ValueError(f"{what}: sentence id {sentence.id!r} unmatched")
        pairs.append((other, sentence))
    return pairs


def span_f1(
    gold: Sequence[LabeledSentence], pred: Sequence[LabeledSentence]
) -> EvalReport:
    """Micro-averaged exact-match span F1 with a per-type breakdown.

    Sentences are matched by id; every gold sentence needs a same-length
    prediction. Swapping the arguments swaps precision and recall exactly.
    """
    counts = {etype: [0, 0, 0] for etype in ENTITY_TYPES}
    for gold_sentence, pred_sentence in _pair_by_id(gold, pred, "span_f1"):
        if len(gold_sentence.tokens) != len(pred_sentence.tokens):
            raise ValueError(
                f"span_f1: sentence {gold_sentence.id!r} has "
                f"{len(gold_sentence.tokens)} gold vs "
                f"{len(pred_sentence.tokens)} predicted tokens"
            )
        gold_spans = {(s.etype, s.start, s.end) for s in gold_sentence.spans()}
        pred_spans = {(s.etype, s.start, s.end) for s in pred_sentence.spans()}
        for etype in ENTITY_TYPES:
            g = {s for s in gold_spans if s[0] == etype}
            p = {s for s in pred_spans if s[0] == etype}
            counts[etype][0] += len(g & p)
            counts[etype][1] += len(p - g)
            counts[etype][2] += len(g - p)

    per_type = {}
    for etype, (tp, fp, fn) in counts.items():
        precision, recall, f1 = _prf(tp, fp, fn)
        per_type[etype] = TypeScore(precision, recall, f1, support=tp + fn)
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    precision, recall, f1 = _prf(tp, fp, fn)
    overall = TypeScore(precision, recall, f1, support=tp + fn)
    return EvalReport(
        per_type=per_type,
        overall=overall,
        counts={etype: tuple(c) for etype, c in counts.items()},
    )


def cohens_kappa(
    ann1: Sequence[LabeledSentence], ann2: Sequence[LabeledSentence]
) -> AgreementReport:
    """Token-level kappa over the IOB inventory.

    p_o is the fraction of tokens with identical tags; p_e comes from the
    two annotators' marginal tag distributions. When p_e is 1 (both
    annotators constant) the ratio is 0/0; the report then says 1.0 for
    identical annotations, 0.0 otherwise, with the degenerate flag set.
    """
    contingency = {t1: {t2: 0 for t2 in TAG_INVENTORY} for t1 in TAG_INVENTORY}
    total = 0
    for s1, s2 in _pair_by_id(ann1, ann2, "cohens_kappa"):
        if s1.tokens != s2.tokens:
            raise ValueError(
                f"cohens_kappa: sentence {s1.id!r} tokenized differently"
            )
        for t1, t2 in zip(s1.tags, s2.tags):
            contingency[t1][t2] += 1
            total += 1
    if total == 0:
        raise ValueError("cohens_kappa: no tokens to compare")

    p_o = sum(contingency[t][t] for t in TAG_INVENTORY) / total
    marginal1 = {t: sum(contingency[t].values()) / total for t in TAG_INVENTORY}
    marginal2 = {
        t2: sum(contingency[t1][t2] for t1 in TAG_INVENTORY) / total
        for t2 in TAG_INVENTORY
    }
    p_e = sum(marginal1[t] * marginal2[t] for t in TAG_INVENTORY)

    if p_e >= 1.0:
        kappa = 1.0 if p_o == 1.0 else 0.0
        return AgreementReport(kappa, p_o, p_e, contingency, degenerate=True)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(kappa, p_o, p_e, contingency)


# ---------------------------------------------------------------------------
# Report serialization


def format_eval_report(report: EvalReport) -> str:
    """Per-type table plus the micro-averaged overall row."""
    lines = [f"{'type':<10}{'precision':>11}{'recall':>11}{'f1':>11}{'support':>9}"]
    rows = [(etype, report.per_type[etype]) for etype in ENTITY_TYPES]
    rows.append(("overall", report.overall))
    for name, score in rows:
        lines.append(
            f"{name:<10}{score.precision:>11.4f}{score.recall:>11.4f}"
            f"{score.f1:>11.4f}{score.support:>9}"
        )
    return "\n".join(lines) + "\n"


def eval_keyvalues(report: EvalReport) -> str:
    lines = []
    for etype in ENTITY_TYPES:
        score = report.per_type[etype]
        lines += [
            f"{etype}_precision={score.precision:.17g}",
            f"{etype}_recall={score.recall:.17g}",
            f"{etype}_f1={score.f1:.17g}",
            f"{etype}_support={score.support}",
        ]
    lines += [
        f"overall_precision={report.overall.precision:.17g}",
        f"overall_recall={report.overall.recall:.17g}",
        f"overall_f1={report.overall.f1:.17g}",
        f"overall_support={report.overall.support}",
    ]
    return "\n".join(lines) + "\n"


def format_agreement(report: AgreementReport) -> str:
    lines = [
        f"basis: {report.basis}",
        f"kappa={report.kappa:.6f}",
        f"observed_agreement={report.p_o:.6f}",
        f"expected_agreement={report.p_e:.6f}",
    ]
    if report.degenerate:
        lines.append("degenerate=true")
    return "\n".join(lines) + "\n"
