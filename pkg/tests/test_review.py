import json
import threading
import urllib.error
import urllib.request

import pytest

from nermine.corpus_io import LabeledSentence, parse_conll_result
from nermine.evaluation import cohens_kappa
from nermine.review import (
    ReviewBatch,
    ReviewError,
    ReviewRecord,
    ReviewStore,
    serve_review,
)


def corpus3():
    return [
        LabeledSentence("1", ("a", "b"), ("B-PER", "O")),
        LabeledSentence("2", ("c",), ("O",)),
        LabeledSentence("3", ("d", "e", "f"), ("O", "B-LOC", "I-LOC")),
    ]


def record(sid, annotator, tags, verdict="edited", ts="2024-01-01T00:00:00+00:00"):
    return ReviewRecord(sid, annotator, verdict, tuple(tags), ts)


def make_store(tmp_path, corpus=None, annotators=("ann1", "ann2"), adjudicator=None):
    return ReviewStore(
        corpus if corpus is not None else corpus3(),
        annotators,
        adjudicator,
        tmp_path / "reviews.jsonl",
    )


# ---------------------------------------------------------------------------
# store construction


def test_store_rejects_bad_setup(tmp_path):
    with pytest.raises(ValueError):
        make_store(tmp_path, annotators=())
    with pytest.raises(ValueError):
        make_store(tmp_path, annotators=("a", "a"))
    with pytest.raises(ValueError):
        make_store(tmp_path, adjudicator="ghost")
    dupes = [corpus3()[0], corpus3()[0]]
    with pytest.raises(ValueError):
        make_store(tmp_path, corpus=dupes)


def test_review_batch_rejects_duplicate_ids():
    with pytest.raises(ReviewError):
        ReviewBatch((("1", ("a",), ("O",)), ("1", ("b",), ("O",))), "ann1")


# ---------------------------------------------------------------------------
# task assignment


def test_next_task_lowest_id_first(tmp_path):
    store = make_store(tmp_path)
    sid, tokens, tags = store.next_task("ann1")
    assert sid == "1"
    assert tokens == ("a", "b")
    assert tags == ("B-PER", "O")


def test_next_task_numeric_id_order(tmp_path):
    corpus = [
        LabeledSentence("10", ("x",), ("O",)),
        LabeledSentence("2", ("y",), ("O",)),
    ]
    store = make_store(tmp_path, corpus=corpus)
    assert store.next_task("ann1")[0] == "2"


def test_next_task_exhausted_returns_none(tmp_path):
    store = make_store(tmp_path)
    for sentence in corpus3():
        store.submit_verdict(
            record(sentence.id, "ann1", sentence.tags, verdict="accepted")
        )
    assert store.next_task("ann1") is None
    assert store.next_task("ann2") is not None  # independent queues


def test_next_task_unknown_annotator(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ReviewError):
        store.next_task("ghost")


def test_two_annotators_complete_independently(tmp_path):
    store = make_store(tmp_path)
    for annotator in ("ann1", "ann2"):
        seen = []
        while (task := store.next_task(annotator)) is not None:
            seen.append(task[0])
            store.submit_verdict(record(task[0], annotator, task[2], "accepted"))
        assert seen == ["1", "2", "3"]
    assert store.progress() == {
        "ann1": {"reviewed": 3, "total": 3},
        "ann2": {"reviewed": 3, "total": 3},
    }


def test_next_batch(tmp_path):
    store = make_store(tmp_path)
    batch = store.next_batch("ann1", 2)
    assert batch.assignment == "ann1"
    assert [sid for sid, _, _ in batch.sentences] == ["1", "2"]
    with pytest.raises(ReviewError):
        store.next_batch("ann1", 0)


# ---------------------------------------------------------------------------
# verdict submission


def test_submit_accepted_echoes_tags(tmp_path):
    store = make_store(tmp_path)
    stored = store.submit_verdict(record("1", "ann1", ("B-PER", "O"), "accepted"))
    assert stored.verdict == "accepted"
    assert store.next_task("ann1")[0] == "2"


def test_submit_accepted_with_changes_rejected(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ReviewError, match="edited"):
        store.submit_verdict(record("1", "ann1", ("O", "O"), "accepted"))


def test_submit_rejects_bad_records(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ReviewError):  # wrong length
        store.submit_verdict(record("1", "ann1", ("O",)))
    with pytest.raises(ReviewError):  # dangling I-
        store.submit_verdict(record("1", "ann1", ("O", "I-PER")))
    with pytest.raises(ReviewError):  # unknown sentence
        store.submit_verdict(record("99", "ann1", ("O",)))
    with pytest.raises(ReviewError):  # unknown annotator
        store.submit_verdict(record("1", "ghost", ("O", "O")))
    with pytest.raises(ReviewError):  # bad verdict enum
        record("1", "ann1", ("O", "O"), verdict="maybe")
    # nothing was stored by the failed attempts
    assert store.next_task("ann1")[0] == "1"
    assert store.progress()["ann1"]["reviewed"] == 0


def test_resubmission_latest_wins(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann1", ("O", "O"), ts="t1"))
    store.submit_verdict(record("1", "ann1", ("B-LOC", "O"), ts="t2"))
    exported = parse_conll_result(store.export_gold())
    assert exported.sentences[0].tags == ("B-LOC", "O")
    assert store.progress()["ann1"]["reviewed"] == 1


# ---------------------------------------------------------------------------
# durability and replay


def test_replay_reconstructs_state(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann1", ("O", "O")))
    store.submit_verdict(record("2", "ann1", ("O",), verdict="accepted"))
    store.submit_verdict(record("1", "ann2", ("B-PER", "O"), verdict="accepted"))
    before_export = store.export_gold()
    before_progress = store.progress()
    store.close()

    reopened = make_store(tmp_path)
    assert reopened.export_gold() == before_export
    assert reopened.progress() == before_progress
    assert reopened.next_task("ann1")[0] == "3"


def test_replay_drops_torn_final_line(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann1", ("O", "O")))
    store.close()
    log = tmp_path / "reviews.jsonl"
    with open(log, "a", encoding="utf-8") as fh:
        fh.write('{"sentence_id": "2", "annotator')  # torn write, no newline

    reopened = make_store(tmp_path)
    assert reopened.progress()["ann1"]["reviewed"] == 1
    assert reopened.next_task("ann1")[0] == "2"
    # the torn bytes are gone; a new submission appends cleanly
    reopened.submit_verdict(record("2", "ann1", ("O",), verdict="accepted"))
    reopened.close()
    final = make_store(tmp_path)
    assert final.progress()["ann1"]["reviewed"] == 2


def test_replay_rejects_mid_file_corruption(tmp_path):
    log = tmp_path / "reviews.jsonl"
    log.write_text('{"broken": true}\n', encoding="utf-8")
    with pytest.raises(ValueError, match="line 1"):
        make_store(tmp_path)


# ---------------------------------------------------------------------------
# agreement and export


def test_iaa_identical_verdicts(tmp_path):
    store = make_store(tmp_path)
    for annotator in ("ann1", "ann2"):
        store.submit_verdict(record("1", annotator, ("B-PER", "O"), "accepted"))
        store.submit_verdict(record("3", annotator, ("O", "B-LOC", "I-LOC"), "accepted"))
    report = store.iaa_report("ann1", "ann2")
    assert report.kappa == 1.0


def test_iaa_hand_fixture(tmp_path):
    tokens = tuple(f"w{k}" for k in range(100))
    corpus = [LabeledSentence("1", tokens, ("O",) * 100)]
    store = make_store(tmp_path, corpus=corpus)
    ann1 = ["O"] * 60 + ["B-PER"] * 40
    ann2 = ["O"] * 45 + ["B-PER"] * 15 + ["O"] * 5 + ["B-PER"] * 35
    store.submit_verdict(record("1", "ann1", ann1))
    store.submit_verdict(record("1", "ann2", ann2))
    report = store.iaa_report("ann1", "ann2")
    assert report.kappa == pytest.approx(0.6)


def test_iaa_disjoint_sets_error(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann1", ("O", "O")))
    store.submit_verdict(record("2", "ann2", ("O",), verdict="accepted"))
    with pytest.raises(ReviewError, match="no co-annotated"):
        store.iaa_report("ann1", "ann2")


def test_iaa_matches_library_call(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann1", ("B-PER", "O")))
    store.submit_verdict(record("1", "ann2", ("B-LOC", "O")))
    store.submit_verdict(record("3", "ann1", ("O", "B-LOC", "I-LOC"), "accepted"))
    store.submit_verdict(record("3", "ann2", ("O", "O", "O")))
    report = store.iaa_report("ann1", "ann2")
    direct = cohens_kappa(
        [
            LabeledSentence("1", ("a", "b"), ("B-PER", "O")),
            LabeledSentence("3", ("d", "e", "f"), ("O", "B-LOC", "I-LOC")),
        ],
        [
            LabeledSentence("1", ("a", "b"), ("B-LOC", "O")),
            LabeledSentence("3", ("d", "e", "f"), ("O", "O", "O")),
        ],
    )
    assert report == direct


def test_export_empty(tmp_path):
    assert make_store(tmp_path).export_gold() == ""


def test_export_parses_with_zero_repairs(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("2", "ann1", ("O",), verdict="accepted"))
    store.submit_verdict(record("1", "ann1", ("B-PER", "I-PER")))
    result = parse_conll_result(store.export_gold())
    assert result.repaired_tags == 0
    assert [s.tokens for s in result.sentences] == [("a", "b"), ("c",)]
    assert result.sentences[0].tags == ("B-PER", "I-PER")


def test_export_adjudicator_wins(tmp_path):
    store = make_store(tmp_path, adjudicator="ann2")
    store.submit_verdict(record("1", "ann1", ("O", "O")))
    store.submit_verdict(record("1", "ann2", ("B-ORG", "O")))
    exported = parse_conll_result(store.export_gold()).sentences
    assert exported[0].tags == ("B-ORG", "O")
    assert store.adjudication_policy() == "adjudicator=ann2"


def test_export_without_adjudicator_first_annotator_wins(tmp_path):
    store = make_store(tmp_path)
    store.submit_verdict(record("1", "ann2", ("B-ORG", "O")))
    store.submit_verdict(record("1", "ann1", ("O", "O")))
    exported = parse_conll_result(store.export_gold()).sentences
    assert exported[0].tags == ("O", "O")  # ann1 is first in config order
    assert store.adjudication_policy() == "first-annotator=ann1,ann2"


# ---------------------------------------------------------------------------
# HTTP layer


@pytest.fixture
def http_server(tmp_path):
    store = make_store(tmp_path, adjudicator="ann1")
    server = serve_review(store, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}", store
    server.shutdown()
    server.server_close()
    store.close()


def get(url):
    try:
        with urllib.request.urlopen(url) as response:
            return response.status, response.read(), dict(response.headers)
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read(), dict(exc.headers)


def post_json(url, payload):
    data = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read() or b"{}")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"{}")


def test_http_task_cycle(http_server):
    base, _ = http_server
    status, body, _ = get(f"{base}/api/tasks/next?annotator=ann1")
    assert status == 200
    task = json.loads(body)
    assert task["sentence_id"] == "1"
    assert task["tokens"] == ["a", "b"]
    assert task["projected_tags"] == ["B-PER", "O"]

    status, body = post_json(
        f"{base}/api/verdicts",
        {
            "sentence_id": "1",
            "annotator_id": "ann1",
            "verdict": "accepted",
            "final_tags": ["B-PER", "O"],
        },
    )
    assert status == 201
    assert body["sentence_id"] == "1"
    assert body["timestamp"]  # server fills one in

    status, body, _ = get(f"{base}/api/tasks/next?annotator=ann1")
    assert status == 200
    assert json.loads(body)["sentence_id"] == "2"


def test_http_204_when_exhausted(http_server):
    base, store = http_server
    for sentence in corpus3():
        store.submit_verdict(
            record(sentence.id, "ann1", sentence.tags, verdict="accepted")
        )
    status, body, _ = get(f"{base}/api/tasks/next?annotator=ann1")
    assert status == 204
    assert body == b""


def test_http_validation_failures(http_server):
    base, _ = http_server
    status, body = post_json(
        f"{base}/api/verdicts",
        {
            "sentence_id": "1",
            "annotator_id": "ann1",
            "verdict": "edited",
            "final_tags": ["O", "I-LOC"],
        },
    )
    assert status == 422
    assert "I-LOC" in body["error"]

    status, body = post_json(f"{base}/api/verdicts", {"sentence_id": "1"})
    assert status == 422

    status, _, _ = get(f"{base}/api/tasks/next?annotator=ghost")
    assert status == 400

    status, _, _ = get(f"{base}/api/nope")
    assert status == 404


def test_http_iaa_and_progress(http_server):
    base, store = http_server
    for annotator in ("ann1", "ann2"):
        store.submit_verdict(record("1", annotator, ("B-PER", "O"), "accepted"))
    status, body, _ = get(f"{base}/api/iaa?a=ann1&b=ann2")
    assert status == 200
    report = json.loads(body)
    assert report["kappa"] == 1.0
    assert report["basis"] == "token-iob"
    assert report["contingency"]["B-PER"]["B-PER"] == 1

    status, _, _ = get(f"{base}/api/iaa?a=ann1")
    assert status == 400

    status, body, _ = get(f"{base}/api/progress")
    assert status == 200
    assert json.loads(body)["ann1"] == {"reviewed": 1, "total": 3}


def test_http_export_with_policy_header(http_server):
    base, store = http_server
    store.submit_verdict(record("1", "ann1", ("B-PER", "O"), "accepted"))
    status, body, headers = get(f"{base}/api/export")
    assert status == 200
    assert headers["X-Adjudication-Policy"] == "adjudicator=ann1"
    parsed = parse_conll_result(body.decode("utf-8"))
    assert parsed.repaired_tags == 0
    assert parsed.sentences[0].tags == ("B-PER", "O")


def test_http_concurrent_submissions(http_server):
    base, store = http_server
    errors = []

    def submit(annotator):
        try:
            for sentence in corpus3():
                status, _ = post_json(
                    f"{base}/api/verdicts",
                    {
                        "sentence_id": sentence.id,
                        "annotator_id": annotator,
                        "verdict": "accepted",
                        "final_tags": list(sentence.tags),
                    },
                )
                assert status == 201
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [
        threading.Thread(target=submit, args=(a,)) for a in ("ann1", "ann2")
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    progress = store.progress()
    assert progress["ann1"]["reviewed"] == 3
    assert progress["ann2"]["reviewed"] == 3


def test_http_static_ui_serving(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html>review</html>", encoding="utf-8")
    (ui / "app.js").write_text("console.log(1)", encoding="utf-8")
    store = make_store(tmp_path)
    server = serve_review(store, port=0, ui_dir=ui)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        host, port = server.server_address
        base = f"http://{host}:{port}"
        status, body, headers = get(f"{base}/")
        assert status == 200
        assert b"review" in body
        assert headers["Content-Type"].startswith("text/html")
        status, _, headers = get(f"{base}/app.js")
        assert status == 200
        assert headers["Content-Type"].startswith("text/javascript")
        status, _, _ = get(f"{base}/../secrets")
        assert status == 404
        status, _, _ = get(f"{base}/missing.js")
        assert status == 404
    finally:
        server.shutdown()
        server.server_close()
        store.close()
