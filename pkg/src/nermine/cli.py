"""Command-line pipeline driver.

Subcommands mirror the workflow stages: align-train fits the two lexical
tables, align extracts and symmetrizes per-pair links and scores them,
project moves the English annotations across, filter-split produces the
train/dev/test files, and stats/eval/serve-review support inspection,
scoring and human verification. Every stage reads and writes only declared
files under --workdir, so stages can be rerun or swapped out (e.g. external
alignments via Pharaoh files) without hidden state.

Exit codes: 0 success, 1 usage/config error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import shlex
import subprocess
import sys
from contextlib import contextmanager
from pathlib import Path

from .aligner import (
    BACKWARD,
    FORWARD,
    align_viterbi,
    parse_table,
    quality_score,
    symmetrize_intersection,
    train_ibm1,
    write_table,
)
from .config import KEY_PARSERS, ConfigError, PipelineConfig, build_config, load_config
from .corpus_io import (
    AlignmentLinks,
    CorpusFormatError,
    LabeledSentence,
    parse_bitext,
    parse_conll,
    parse_conll_result,
    parse_parallel,
    parse_pharaoh,
    write_conll,
    write_pharaoh,
)
from .evaluation import format_agreement, format_eval_report, span_f1
from .filtering import (
    ScoredSentence,
    corpus_stats,
    downsample_no_entity,
    filter_top_fraction,
    format_stats_table,
    split_corpus,
    stats_keyvalues,
)
from .projection import drop_stats, project_corpus, write_drop_log
from .review import ReviewStore, serve_review

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOCK_NAME = ".nermine.lock"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve 2
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared plumbing


def _alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


@contextmanager
def workdir_lock(workdir: Path):
    """One pipeline command at a time per working directory. A lock left by
    a dead process (crash, kill -9) is detected by pid and taken over."""
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / LOCK_NAME
    while True:
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            break
        except FileExistsError:
            try:
                pid = int(lock.read_text(encoding="ascii").strip() or "0")
            except (ValueError, FileNotFoundError):
                pid = 0
            if pid and _alive(pid):
                raise DataError(
                    f"workdir {workdir} is locked by running process {pid} "
                    f"(remove {lock} if that is wrong)"
                )
            lock.unlink(missing_ok=True)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def _read_text(path: Path | str, hint: str = "") -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        suffix = f" ({hint})" if hint else ""
        raise DataError(f"cannot read {path}: {exc.strerror or exc}{suffix}") from None


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_pairs(cfg: PipelineConfig):
    if cfg.bitext:
        return parse_bitext(_read_text(cfg.bitext))
    if cfg.source and cfg.target:
        return parse_parallel(_read_text(cfg.source), _read_text(cfg.target))
    raise UsageError("no parallel corpus configured: set bitext= or source=/target=")


def _relabel(sentences, ids):
    return [
        LabeledSentence(new_id, s.tokens, s.tags) for new_id, s in zip(ids, sentences)
    ]


def _pipeline_config(args) -> PipelineConfig:
    file_values = load_config(args.config) if args.config else {}
    overrides = {
        key: getattr(args, key) for key in KEY_PARSERS if hasattr(args, key)
    }
    return build_config(file_values, overrides)


def _parse_alignment_lines(text: str, pairs, path) -> list[AlignmentLinks]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != len(pairs):
        raise DataError(
            f"{path}: {len(lines)} alignment lines for {len(pairs)} sentence pairs"
        )
    links = []
    for line, pair in zip(lines, pairs):
        try:
            links.append(parse_pharaoh(line, pair))
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    return links


def _parse_scores(text: str, path) -> dict[str, float]:
    scores: dict[str, float] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path} line {line_no}: expected 'pair_id<TAB>score'")
        pair_id, raw = parts
        if pair_id in scores:
            raise DataError(f"{path} line {line_no}: duplicate pair id {pair_id!r}")
        try:
            scores[pair_id] = float(raw)
        except ValueError:
            raise DataError(f"{path} line {line_no}: bad score {raw!r}") from None
    return scores


def _run_tagger(command: str, pairs) -> list[LabeledSentence]:
    """Feed the English side (one space-joined sentence per line) to an
    external tagger command; expect CoNLL on stdout."""
    text = "\n".join(" ".join(p.src_tokens) for p in pairs) + "\n"
    try:
        proc = subprocess.run(
            shlex.split(command), input=text, capture_output=True, text=True
        )
    except OSError as exc:
        raise DataError(f"external tagger failed to start: {exc}") from None
    if proc.returncode != 0:
        raise DataError(
            f"external tagger exited {proc.returncode}: {proc.stderr.strip()}"
        )
    return parse_conll(proc.stdout)


# ---------------------------------------------------------------------------
# subcommands


def cmd_align_train(args) -> int:
    cfg = _pipeline_config(args)
    with workdir_lock(Path(cfg.workdir)):
        pairs = _load_pairs(cfg)
        em = cfg.em_config()
        for direction, name in ((FORWARD, "forward"), (BACKWARD, "backward")):
            table = train_ibm1(pairs, direction, em, jobs=cfg.jobs)
            for iteration, loglik in enumerate(table.log_likelihood, start=1):
                print(f"{name}: iteration {iteration} loglik {loglik:.6f}")
            out = cfg.workpath(f"{name}.table")
            _write_text(out, write_table(table))
            print(f"{name}: wrote {out} ({len(table.cond_vocab)} conditioning words)")
    return EXIT_OK


def cmd_align(args) -> int:
    cfg = _pipeline_config(args)
    with workdir_lock(Path(cfg.workdir)):
        pairs = _load_pairs(cfg)
        tables = {}
        for name in ("forward", "backward"):
            path = cfg.workpath(f"{name}.table")
            tables[name] = parse_table(
                _read_text(path, hint="run align-train first")
            )
        fwd_lines, bwd_lines, int_lines, score_lines = [], [], [], []
        for pair in pairs:
            forward_links = align_viterbi(tables["forward"], pair)
            backward_links = align_viterbi(tables["backward"], pair)
            intersected = symmetrize_intersection(forward_links, backward_links)
            fwd_lines.append(write_pharaoh(forward_links))
            bwd_lines.append(write_pharaoh(backward_links))
            int_lines.append(write_pharaoh(intersected))
            chosen = intersected if cfg.mode == "intersected" else forward_links
            score_lines.append(f"{pair.id}\t{quality_score(pair, chosen):.17g}")
        _write_text(cfg.workpath("forward.pharaoh"), "\n".join(fwd_lines) + "\n")
        _write_text(cfg.workpath("backward.pharaoh"), "\n".join(bwd_lines) + "\n")
        _write_text(cfg.workpath("intersected.pharaoh"), "\n".join(int_lines) + "\n")
        _write_text(cfg.workpath("scores.tsv"), "\n".join(score_lines) + "\n")
        print(f"aligned {len(pairs)} pairs (scores follow mode={cfg.mode})")
    return EXIT_OK


def cmd_project(args) -> int:
    cfg = _pipeline_config(args)
    with workdir_lock(Path(cfg.workdir)):
        pairs = _load_pairs(cfg)
        if cfg.english_conll:
            english = parse_conll(_read_text(cfg.english_conll))
        elif cfg.external_tagger:
            english = _run_tagger(cfg.external_tagger, pairs)
        else:
            raise UsageError(
                "no English annotations configured: set english_conll= or external_tagger="
            )
        if len(english) != len(pairs):
            raise DataError(
                f"English side has {len(english)} sentences but the bitext has "
                f"{len(pairs)} pairs"
            )
        english = _relabel(english, [p.id for p in pairs])

        fwd_path = (
            Path(cfg.forward_alignments)
            if cfg.forward_alignments != "builtin"
            else cfg.workpath("forward.pharaoh")
        )
        bwd_path = (
            Path(cfg.backward_alignments)
            if cfg.backward_alignments != "builtin"
            else cfg.workpath("backward.pharaoh")
        )
        forward = _parse_alignment_lines(
            _read_text(fwd_path, hint="run align first"), pairs, fwd_path
        )
        if cfg.mode == "forward_only" and not bwd_path.exists():
            # the backward side is unused in this mode; a missing file just
            # means a forward-only external aligner
            backward = [AlignmentLinks(frozenset()) for _ in pairs]
        else:
            backward = _parse_alignment_lines(
                _read_text(bwd_path, hint="run align first"), pairs, bwd_path
            )

        results = project_corpus(pairs, english, forward, backward, cfg.mode)
        _write_text(
            cfg.workpath("projected.conll"),
            write_conll([r.labeled for r in results]),
        )
        _write_text(
            cfg.workpath("projected.ids"), "".join(p.id + "\n" for p in pairs)
        )
        _write_text(cfg.workpath("drops.tsv"), write_drop_log(results))
        stats = drop_stats(results)
        dropped = sum(stats.values())
        print(
            f"projected {len(results)} sentences, dropped {dropped} spans "
            + " ".join(f"{reason}={count}" for reason, count in sorted(stats.items()))
        )
    return EXIT_OK


def cmd_filter_split(args) -> int:
    cfg = _pipeline_config(args)
    with workdir_lock(Path(cfg.workdir)):
        projected_path = cfg.workpath("projected.conll")
        sentences = parse_conll(_read_text(projected_path, hint="run project first"))
        ids_path = cfg.workpath("projected.ids")
        if ids_path.exists():
            ids = _read_text(ids_path).splitlines()
            if len(ids) != len(sentences):
                raise DataError(
                    f"{ids_path}: {len(ids)} ids for {len(sentences)} sentences"
                )
            sentences = _relabel(sentences, ids)
        scores_path = cfg.workpath("scores.tsv")
        scores = _parse_scores(
            _read_text(scores_path, hint="run align first"), scores_path
        )
        scored = []
        for sentence in sentences:
            score = scores.get(sentence.id)
            if score is None:
                raise DataError(f"missing score for pair id {sentence.id!r}")
            scored.append(ScoredSentence.from_labeled(sentence, score))

        fc = cfg.filter_config()
        kept = downsample_no_entity(scored, fc.no_entity_rate, fc.seed)
        kept = filter_top_fraction(kept, fc.keep_fraction)
        # distinct seed stream for the shuffle so it is independent of the
        # Bernoulli draws above
        parts = split_corpus(kept, cfg.split_ratios(), cfg.seed + 1)

        named = []
        for name, part in zip(("train", "dev", "test"), parts):
            _write_text(
                cfg.workpath(f"{name}.conll"),
                write_conll([s.labeled for s in part]),
            )
            named.append((name, corpus_stats([s.labeled for s in part])))
        named.append(("total", corpus_stats([s.labeled for s in kept])))
        table = format_stats_table(named)
        _write_text(cfg.workpath("stats.txt"), table)
        kv_lines = []
        for name, stats in named:
            for line in stats_keyvalues(stats).splitlines():
                kv_lines.append(f"{name}_{line}")
        _write_text(cfg.workpath("stats.kv"), "\n".join(kv_lines) + "\n")
        print(table, end="")
        print(
            f"kept {len(kept)}/{len(scored)} sentences "
            f"(no_entity_rate={fc.no_entity_rate}, keep_fraction={fc.keep_fraction})"
        )
    return EXIT_OK


def cmd_stats(args) -> int:
    named = []
    for path in args.inputs:
        result = parse_conll_result(_read_text(path))
        if result.repaired_tags:
            print(
                f"note: {path}: repaired {result.repaired_tags} dangling I- tags",
                file=sys.stderr,
            )
        named.append((Path(path).stem, corpus_stats(result.sentences)))
    print(format_stats_table(named), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    gold = parse_conll(_read_text(args.gold))
    pred = parse_conll(_read_text(args.pred))
    report = span_f1(gold, pred)
    print(format_eval_report(report), end="")
    return EXIT_OK


def cmd_serve_review(args) -> int:
    annotators = [a.strip() for a in args.annotators.split(",") if a.strip()]
    if not annotators:
        raise UsageError("--annotators needs a comma-separated list of ids")
    if len(set(annotators)) != len(annotators):
        raise UsageError("--annotators contains duplicates")
    if args.adjudicator and args.adjudicator not in annotators:
        raise UsageError(
            f"--adjudicator {args.adjudicator!r} is not in --annotators"
        )
    workdir = Path(args.workdir)
    with workdir_lock(workdir):
        corpus = parse_conll(_read_text(args.corpus))
        log_path = Path(args.log) if args.log else workdir / "reviews.jsonl"
        store = ReviewStore(corpus, annotators, args.adjudicator, log_path)
        server = serve_review(store, args.host, args.port, args.ui_dir)
        host, port = server.server_address
        print(f"listening on http://{host}:{port}", flush=True)
        print(f"review log: {log_path}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
            store.close()
    return EXIT_OK


def cmd_iaa(args) -> int:
    # offline agreement between two exported annotator files
    a = parse_conll(_read_text(args.first))
    b = parse_conll(_read_text(args.second))
    from .evaluation import cohens_kappa

    print(format_agreement(cohens_kappa(a, b)), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--bitext", help="tab-separated bitext file")
    parser.add_argument("--source", help="English side, one sentence per line")
    parser.add_argument("--target", help="target side, one sentence per line")
    parser.add_argument("--english-conll", dest="english_conll")
    parser.add_argument("--workdir")
    parser.add_argument("--mode", choices=("forward_only", "intersected"))
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--prob-floor", dest="prob_floor", type=float)
    parser.add_argument(
        "--use-null",
        dest="use_null",
        type=lambda raw: raw.lower() in ("true", "yes", "1"),
    )
    parser.add_argument("--vocab-cap", dest="vocab_cap", type=int)
    parser.add_argument("--keep-fraction", dest="keep_fraction", type=float)
    parser.add_argument("--no-entity-rate", dest="no_entity_rate", type=float)
    parser.add_argument("--split-train", dest="split_train", type=float)
    parser.add_argument("--split-dev", dest="split_dev", type=float)
    parser.add_argument("--split-test", dest="split_test", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--forward-alignments", dest="forward_alignments")
    parser.add_argument("--backward-alignments", dest="backward_alignments")
    parser.add_argument("--external-tagger", dest="external_tagger")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="nermine",
        description="Mine NER training data from parallel text by projecting "
        "English annotations through word alignments.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    for name, func, help_text in (
        ("align-train", cmd_align_train, "fit the two lexical translation tables"),
        ("align", cmd_align, "extract, symmetrize and score per-pair links"),
        ("project", cmd_project, "move English entity spans onto the target side"),
        ("filter-split", cmd_filter_split, "filter by quality and emit train/dev/test"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_pipeline_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="print per-type corpus statistics")
    p.add_argument("inputs", nargs="+", metavar="conll_file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="span-level exact-match F1")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("iaa", help="token-level agreement between two CoNLL files")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_iaa)

    p = sub.add_parser("serve-review", help="serve sentences for human verification")
    p.add_argument("--corpus", required=True, help="projected CoNLL file to review")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--annotators", required=True, help="comma-separated ids")
    p.add_argument("--adjudicator")
    p.add_argument("--log", help="review log path (default workdir/reviews.jsonl)")
    p.add_argument("--ui-dir", dest="ui_dir", help="static files for the browser UI")
    p.add_argument("--workdir", default=".")
    p.set_defaults(func=cmd_serve_review)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CorpusFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
