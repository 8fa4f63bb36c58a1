"""Human verification service for projected annotations.

Annotators pull sentences, accept or rectify the projected tags, and every
verdict is appended to a JSON-lines log before it is acknowledged, so
replaying the log reconstructs the exact service state after a crash. The
HTTP layer is a thin translation onto ReviewStore; all policy (assignment,
superseding, adjudication) lives in the store and is unit-testable without
sockets.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import parse_qs, urlparse

from .corpus_io import LabeledSentence, iob_problem, write_conll
from .evaluation import AgreementReport, cohens_kappa

VERDICTS = ("accepted", "edited")


class ReviewError(ValueError):
    """Validation failure on a review operation; maps to HTTP 422/400."""


@dataclass(frozen=True)
class ReviewRecord:
    sentence_id: str
    annotator_id: str
    verdict: str
    final_tags: tuple[str, ...]
    timestamp: str

    def __post_init__(self):
        object.__setattr__(self, "final_tags", tuple(self.final_tags))
        if self.verdict not in VERDICTS:
            raise ReviewError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "sentence_id": self.sentence_id,
                "annotator_id": self.annotator_id,
                "verdict": self.verdict,
                "final_tags": list(self.final_tags),
                "timestamp": self.timestamp,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "ReviewRecord":
        raw = json.loads(text)
        return cls(
            sentence_id=raw["sentence_id"],
            annotator_id=raw["annotator_id"],
            verdict=raw["verdict"],
            final_tags=tuple(raw["final_tags"]),
            timestamp=raw["timestamp"],
        )


@dataclass(frozen=True)
class ReviewBatch:
    sentences: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...]
    assignment: str

    def __post_init__(self):
        ids = [sid for sid, _, _ in self.sentences]
        if len(ids) != len(set(ids)):
            raise ReviewError("duplicate sentence ids in batch")


def _id_order(sentence_id: str):
    """Numeric order for ordinal ids, lexicographic otherwise."""
    if sentence_id.isdigit():
        return (0, int(sentence_id), sentence_id)
    return (1, 0, sentence_id)


class ReviewStore:
    """All review state plus its durable log.

    Writes are serialized by a lock and become visible by swapping an
    immutable records dict, so readers never block and never see a
    half-applied submission. Every append is flushed and fsynced before the
    caller gets its acknowledgment.
    """

    def __init__(
        self,
        corpus: Sequence[LabeledSentence],
        annotators: Sequence[str],
        adjudicator: str | None,
        log_path: str | Path,
    ):
        if not annotators:
            raise ValueError("at least one annotator must be registered")
        if len(set(annotators)) != len(annotators):
            raise ValueError("duplicate annotator ids")
        if adjudicator is not None and adjudicator not in annotators:
            raise ValueError(f"adjudicator {adjudicator!r} is not a registered annotator")
        ids = [s.id for s in corpus]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus has duplicate sentence ids")

        self.annotators = tuple(annotators)
        self.adjudicator = adjudicator
        self._sentences = {s.id: s for s in corpus}
        self._order = sorted(self._sentences, key=_id_order)
        # (sentence_id, annotator_id) -> latest record; replaced wholesale
        # on each write (copy-on-write snapshot for lock-free reads)
        self._records: dict[tuple[str, str], ReviewRecord] = {}
        self._write_lock = threading.Lock()
        self._log_path = Path(log_path)
        self._replay()
        self._log = open(self._log_path, "a", encoding="utf-8")

    def _replay(self) -> None:
        """Rebuild state from the log. A torn final line (crash mid-write,
        never acknowledged) is dropped; corruption anywhere else is fatal."""
        if not self._log_path.exists():
            return
        text = self._log_path.read_text(encoding="utf-8")
        lines = text.split("\n")
        complete, tail = lines[:-1], lines[-1]
        records = {}
        for line_no, line in enumerate(complete, start=1):
            if not line:
                continue
            try:
                record = ReviewRecord.from_json(line)
            except (json.JSONDecodeError, KeyError, ReviewError) as exc:
                raise ValueError(
                    f"{self._log_path}: corrupt record on line {line_no}: {exc}"
                ) from None
            records[(record.sentence_id, record.annotator_id)] = record
        if tail:
            # no trailing newline: the process died mid-append; the write
            # was never acknowledged, so discarding it is correct
            self._log_path.write_text(
                "\n".join(complete) + ("\n" if complete else ""), encoding="utf-8"
            )
        self._records = records

    # -- queries ----------------------------------------------------------

    @property
    def total(self) -> int:
        return len(self._sentences)

    def _check_annotator(self, annotator_id: str) -> None:
        if annotator_id not in self.annotators:
            raise ReviewError(f"unknown annotator {annotator_id!r}")

    def next_task(self, annotator_id: str):
        """Lowest-id sentence this annotator has not reviewed, or None."""
        self._check_annotator(annotator_id)
        records = self._records
        for sentence_id in self._order:
            if (sentence_id, annotator_id) not in records:
                sentence = self._sentences[sentence_id]
                return sentence.id, sentence.tokens, sentence.tags
        return None

    def next_batch(self, annotator_id: str, limit: int) -> ReviewBatch:
        """Up to limit pending sentences for one annotator, in id order."""
        self._check_annotator(annotator_id)
        if limit < 1:
            raise ReviewError(f"batch limit must be positive, got {limit}")
        records = self._records
        pending = []
        for sentence_id in self._order:
            if len(pending) >= limit:
                break
            if (sentence_id, annotator_id) not in records:
                sentence = self._sentences[sentence_id]
                pending.append((sentence.id, sentence.tokens, sentence.tags))
        return ReviewBatch(tuple(pending), annotator_id)

    def progress(self) -> dict[str, dict[str, int]]:
        records = self._records
        done: dict[str, int] = {a: 0 for a in self.annotators}
        for _, annotator_id in records:
            done[annotator_id] += 1
        return {
            a: {"reviewed": done[a], "total": self.total} for a in self.annotators
        }

    # -- writes -----------------------------------------------------------

    def submit_verdict(self, record: ReviewRecord) -> ReviewRecord:
        """Validate, durably append, then apply. Later submissions for the
        same (sentence, annotator) supersede earlier ones."""
        self._check_annotator(record.annotator_id)
        sentence = self._sentences.get(record.sentence_id)
        if sentence is None:
            raise ReviewError(f"unknown sentence {record.sentence_id!r}")
        if len(record.final_tags) != len(sentence.tokens):
            raise ReviewError(
                f"sentence {record.sentence_id}: {len(record.final_tags)} tags "
                f"for {len(sentence.tokens)} tokens"
            )
        problem = iob_problem(record.final_tags)
        if problem is not None:
            raise ReviewError(f"sentence {record.sentence_id}: {problem}")
        if record.verdict == "accepted" and record.final_tags != sentence.tags:
            raise ReviewError(
                f"sentence {record.sentence_id}: verdict 'accepted' must echo "
                "the projected tags; use 'edited' for changes"
            )
        with self._write_lock:
            self._log.write(record.to_json() + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())
            updated = dict(self._records)
            updated[(record.sentence_id, record.annotator_id)] = record
            self._records = updated
        return record

    # -- aggregation ------------------------------------------------------

    def _annotator_corpus(self, annotator_id: str, ids: Sequence[str]) -> list[LabeledSentence]:
        records = self._records
        return [
            LabeledSentence(
                sid,
                self._sentences[sid].tokens,
                records[(sid, annotator_id)].final_tags,
            )
            for sid in ids
        ]

    def reviewed_ids(self, annotator_id: str) -> set[str]:
        self._check_annotator(annotator_id)
        return {sid for sid, aid in self._records if aid == annotator_id}

    def iaa_report(self, annotator_a: str, annotator_b: str) -> AgreementReport:
        shared = sorted(
            self.reviewed_ids(annotator_a) & self.reviewed_ids(annotator_b),
            key=_id_order,
        )
        if not shared:
            raise ReviewError(
                f"no co-annotated sentences for {annotator_a!r} and {annotator_b!r}"
            )
        return cohens_kappa(
            self._annotator_corpus(annotator_a, shared),
            self._annotator_corpus(annotator_b, shared),
        )

    def adjudication_policy(self) -> str:
        if self.adjudicator is not None:
            return f"adjudicator={self.adjudicator}"
        return "first-annotator=" + ",".join(self.annotators)

    def export_gold(self) -> str:
        """CoNLL text of every reviewed sentence, ordered by id. Conflicts
        resolve to the adjudicator's verdict, else to the earliest annotator
        in registration order; the policy travels in the HTTP header, never
        inside the file, so the export stays plain CoNLL."""
        records = self._records
        exported = []
        for sentence_id in self._order:
            chosen = None
            if self.adjudicator is not None:
                chosen = records.get((sentence_id, self.adjudicator))
            if chosen is None:
                for annotator_id in self.annotators:
                    chosen = records.get((sentence_id, annotator_id))
                    if chosen is not None:
                        break
            if chosen is None:
                continue
            exported.append(
                LabeledSentence(
                    sentence_id, self._sentences[sentence_id].tokens, chosen.final_tags
                )
            )
        return write_conll(exported)

    def close(self) -> None:
        self._log.close()


# ---------------------------------------------------------------------------
# HTTP layer


class _ReviewHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def store(self) -> ReviewStore:
        return self.server.store  # type: ignore[attr-defined]

    @property
    def ui_dir(self) -> Path | None:
        return self.server.ui_dir  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("NERMINE_HTTP_LOG"):
            super().log_message(fmt, *args)

    def _send_json(self, status: int, payload, headers: Mapping[str, str] = ()) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        for key, value in dict(headers).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_text(self, status: int, text: str, content_type: str, headers=()) -> None:
        body = text.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", f"{content_type}; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        for key, value in dict(headers).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _query(self) -> dict[str, str]:
        parsed = parse_qs(urlparse(self.path).query)
        return {key: values[0] for key, values in parsed.items()}

    def do_GET(self):
        route = urlparse(self.path).path
        try:
            if route == "/api/tasks/next":
                annotator = self._query().get("annotator")
                if not annotator:
                    return self._send_error(400, "missing annotator parameter")
                task = self.store.next_task(annotator)
                if task is None:
                    self.send_response(204)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                sentence_id, tokens, tags = task
                return self._send_json(
                    200,
                    {
                        "sentence_id": sentence_id,
                        "tokens": list(tokens),
                        "projected_tags": list(tags),
                    },
                )
            if route == "/api/iaa":
                query = self._query()
                a, b = query.get("a"), query.get("b")
                if not a or not b:
                    return self._send_error(400, "missing annotator ids a and b")
                report = self.store.iaa_report(a, b)
                return self._send_json(
                    200,
                    {
                        "kappa": report.kappa,
                        "observed_agreement": report.p_o,
                        "expected_agreement": report.p_e,
                        "degenerate": report.degenerate,
                        "basis": report.basis,
                        "contingency": {
                            t1: dict(row) for t1, row in report.contingency.items()
                        },
                    },
                )
            if route == "/api/export":
                return self._send_text(
                    200,
                    self.store.export_gold(),
                    "text/plain",
                    {"X-Adjudication-Policy": self.store.adjudication_policy()},
                )
            if route == "/api/progress":
                return self._send_json(200, self.store.progress())
            if self.ui_dir is not None:
                return self._serve_static(route)
            return self._send_error(404, f"no such endpoint: {route}")
        except ReviewError as exc:
            return self._send_error(400, str(exc))

    def do_POST(self):
        route = urlparse(self.path).path
        if route != "/api/verdicts":
            return self._send_error(404, f"no such endpoint: {route}")
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            payload = json.loads(raw)
            record = ReviewRecord(
                sentence_id=str(payload["sentence_id"]),
                annotator_id=str(payload["annotator_id"]),
                verdict=str(payload["verdict"]),
                final_tags=tuple(payload["final_tags"]),
                timestamp=str(
                    payload.get("timestamp")
                    or datetime.now(timezone.utc).isoformat()
                ),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            return self._send_error(422, f"malformed verdict body: {exc}")
        except ReviewError as exc:
            return self._send_error(422, str(exc))
        try:
            stored = self.store.submit_verdict(record)
        except ReviewError as exc:
            return self._send_error(422, str(exc))
        self._send_json(201, json.loads(stored.to_json()))

    def _serve_static(self, route: str) -> None:
        if route == "/":
            route = "/index.html"
        base = self.ui_dir.resolve()
        candidate = (base / route.lstrip("/")).resolve()
        if base not in candidate.parents and candidate != base:
            return self._send_error(404, "not found")
        if not candidate.is_file():
            return self._send_error(404, f"not found: {route}")
        content_types = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".mjs": "text/javascript",
            ".css": "text/css",
            ".map": "application/json",
        }
        content_type = content_types.get(candidate.suffix, "application/octet-stream")
        self._send_text(200, candidate.read_text(encoding="utf-8"), content_type)


def serve_review(
    store: ReviewStore,
    host: str = "127.0.0.1",
    port: int = 0,
    ui_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build the HTTP server (not yet serving; call serve_forever). Port 0
    picks a free port; read it back from server.server_address."""
    server = ThreadingHTTPServer((host, port), _ReviewHandler)
    server.store = store  # type: ignore[attr-defined]
    server.ui_dir = Path(ui_dir) if ui_dir is not None else None  # type: ignore[attr-defined]
    return server
