"""Тесты поиска, метрик, латентности, чтения корпуса и пайплайна оценки."""
import random
import time

import numpy as np
import pytest

from chunking.baselines import chunk_fixed
from chunking.chunkers import FixedChunker, QascChunker
from chunking.models import QascConfig, TextChunk
from chunking.qasc import build_chunk_set
from chunking.segmenter import segment_document
from embedding.providers import deterministic_test_embed, embed_batch
from embedding.similarity import SimilarityProfile
from evaluation.complexity import DocumentComplexity, assign_tiers, corpus_complexity, document_complexity
from evaluation.corpus import (
    filter_documents,
    load_corpus,
    load_gold,
    load_queries,
    validate_gold,
)
from evaluation.metrics import (
    StageTimer,
    compute_metrics,
    f1_score,
    judge_relevance,
    measure_latency,
)
from evaluation.models import GoldAnnotation, QueryRecord, RetrievalConfig
from evaluation.retrieval import ChunkIndex, index_and_retrieve
from evaluation.runner import EvaluationRunner, assign_folds, build_summary, query_tiers, results_frame
from utils.errors import ConfigurationError, CorpusIOError, DataValidationError

from conftest import write_ndjson


def text_chunk(start, end, doc_id="d", index=0, text=None, segments=None):
    return TextChunk(
        doc_id=doc_id,
        chunk_index=index,
        start_sentence=start,
        end_sentence=end,
        text=text or f"Chunk {doc_id} {index} covering {start} to {end}.",
        strategy="test",
        segments=segments or [],
    )


def gold_of(*sentences, doc_id="d"):
    return GoldAnnotation(query_id="q", doc_id=doc_id, relevant_sentences=frozenset(sentences))


# Поиск

def test_index_returns_all_when_fewer_than_k():
    index = ChunkIndex()
    chunks = [text_chunk(i, i, index=i) for i in (1, 2, 3)]
    index.add(chunks, [deterministic_test_embed(c.text) for c in chunks])
    results = index.search(deterministic_test_embed("Chunk d 1 covering 2 to 2."), 5)
    assert len(results) == 3
    assert [r.rank for r in results] == [1, 2, 3]
    assert results[0].chunk.chunk_index == 1
    assert results[0].score >= results[1].score >= results[2].score


async def test_identical_embedding_ranks_first(provider):
    chunks = [
        text_chunk(1, 2, index=0, text="Glaciers carve deep valleys over centuries."),
        text_chunk(3, 4, index=1, text="Tax forms arrive every spring."),
        text_chunk(5, 6, index=2, text="Violins need fresh strings."),
    ]
    [query_vector] = await embed_batch(provider, ["Tax forms arrive every spring."])
    results = await index_and_retrieve(chunks, query_vector, 5, provider)
    assert results[0].chunk.chunk_index == 1
    assert results[0].score == pytest.approx(1.0, abs=1e-6)


async def test_index_and_retrieve_errors(provider):
    vector = deterministic_test_embed("anything")
    with pytest.raises(ConfigurationError):
        await index_and_retrieve([text_chunk(1, 1)], vector, 0, provider)
    with pytest.raises(DataValidationError):
        await index_and_retrieve([], vector, 5, provider)


def oracle_ranking(chunks, vectors, query, k):
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    scored = []
    for chunk, vector in zip(chunks, vectors):
        row = np.asarray(vector, dtype=np.float64)
        scored.append((float(np.dot(row / np.linalg.norm(row), q)), chunk))
    scored.sort(key=lambda item: (-item[0], item[1].start_sentence, item[1].doc_id, item[1].chunk_index))
    return scored[:k]


def test_search_matches_full_sort_oracle():
    rng = random.Random(13)
    for instance in range(100):
        count = rng.randint(1, 10)
        texts = [f"passage {rng.randint(0, 6)} about {rng.choice(['rivers', 'taxes', 'orbits'])}" for _ in range(count)]
        chunks = [
            text_chunk(rng.randint(1, 20), 25, doc_id=rng.choice(["a", "b"]), index=i, text=text)
            for i, text in enumerate(texts)
        ]
        # Одинаковые тексты дают одинаковые векторы и проверяют порядок при равенстве
        vectors = [deterministic_test_embed(t, 32, instance) for t in texts]
        query = deterministic_test_embed(f"passage about {rng.choice(['rivers', 'taxes'])}", 32, instance)

        index = ChunkIndex()
        index.add(chunks, vectors)
        actual = index.search(query, 5)
        expected = oracle_ranking(chunks, vectors, query, 5)

        assert [(r.chunk.doc_id, r.chunk.chunk_index) for r in actual] == \
               [(c.doc_id, c.chunk_index) for _, c in expected]
        for result, (score, _) in zip(actual, expected):
            assert result.score == pytest.approx(score, abs=1e-9)


def test_index_rejects_dimension_mismatch():
    index = ChunkIndex()
    index.add([text_chunk(1, 1)], [np.ones(4, dtype=np.float32)])
    with pytest.raises(ConfigurationError):
        index.add([text_chunk(2, 2)], [np.ones(5, dtype=np.float32)])
    with pytest.raises(ConfigurationError):
        index.search(np.ones(3, dtype=np.float32), 1)


# Релевантность и метрики

def test_judge_relevance_examples():
    assert judge_relevance(text_chunk(3, 7), gold_of(5))
    assert not judge_relevance(text_chunk(3, 7), gold_of(9))
    assert not judge_relevance(text_chunk(3, 7, doc_id="other"), gold_of(5))


def test_judge_relevance_on_severed_sentence():
    doc = segment_document("d", " ".join(
        f"Sentence {i} has exactly six tokens." if i != 5 else "Sentence five is much longer than the others here."
        for i in range(1, 9)
    ))
    chunks = chunk_fixed(doc, 27)
    severing = [c for c in chunks if c.start_sentence == 5 or c.end_sentence == 5]
    assert any(c.start_sentence < 5 for c in severing)
    assert all(judge_relevance(c, gold_of(5)) for c in severing)


def test_judge_relevance_uses_summary_segments():
    summary = text_chunk(1, 9, segments=[(1, 3), (8, 9)])
    assert not judge_relevance(summary, gold_of(5))
    assert judge_relevance(summary, gold_of(8))


def test_metric_examples():
    relevant = [text_chunk(i, i, index=i) for i in range(1, 9)]
    irrelevant = [text_chunk(20, 20, index=20)]
    gold = gold_of(*range(1, 9))

    precision, _, _ = compute_metrics(relevant[:4] + irrelevant, relevant + irrelevant, gold)
    assert precision == pytest.approx(0.8)

    _, recall, _ = compute_metrics(relevant[:4], relevant + irrelevant, gold)
    assert recall == pytest.approx(0.5)

    assert f1_score(0.8, 0.5) == pytest.approx(0.61538, abs=1e-5)
    assert f1_score(0.0, 0.0) == 0.0


def test_degenerate_metrics():
    gold = gold_of(5)
    assert compute_metrics([], [text_chunk(5, 5)], gold) == (0.0, 0.0, 0.0)
    assert compute_metrics([text_chunk(1, 1)], [text_chunk(1, 1)], gold) == (0.0, 0.0, 0.0)


def test_perfect_retrieval():
    chunks = [text_chunk(1, 3, index=0), text_chunk(4, 6, index=1)]
    assert compute_metrics(chunks, chunks, gold_of(2, 5)) == (1.0, 1.0, 1.0)


def test_metric_bounds():
    rng = random.Random(17)
    for _ in range(500):
        chunks = [text_chunk(s, s + rng.randint(0, 3), index=i) for i, s in enumerate(rng.sample(range(1, 40), 10))]
        retrieved = rng.sample(chunks, rng.randint(0, 10))
        gold = gold_of(*rng.sample(range(1, 45), rng.randint(1, 6)))
        precision, recall, f1 = compute_metrics(retrieved, chunks, gold)
        assert all(0.0 <= value <= 1.0 for value in (precision, recall, f1))
        if precision > 0 and recall > 0:
            assert min(precision, recall) - 1e-12 <= f1 <= max(precision, recall) + 1e-12


def test_metrics_across_documents():
    gold = {"a": gold_of(2, doc_id="a"), "b": gold_of(7, doc_id="b")}
    chunks = [text_chunk(1, 3, doc_id="a"), text_chunk(6, 8, doc_id="b"), text_chunk(6, 8, doc_id="c")]
    assert compute_metrics(chunks[:1] + chunks[2:], chunks, gold) == pytest.approx((0.5, 0.5, 0.5))


# Латентность

def test_measure_latency_sums_stages():
    report = measure_latency([{"chunking": 300.0, "retrieval": 80.0}])
    assert report.total_ms == 380.0
    assert report.per_stage_ms == {"chunking": 300.0, "retrieval": 80.0}

    report = measure_latency([{"chunking": 300.0, "retrieval": 80.0}, {"chunking": 100.0, "retrieval": 20.0}])
    assert report.average_total_ms == 250.0
    assert report.average_per_stage_ms["chunking"] == 200.0


def test_measure_latency_empty():
    report = measure_latency([])
    assert report.is_empty
    assert report.total_ms == 0.0 and report.average_total_ms == 0.0


def test_stage_timer():
    timer = StageTimer()
    with timer.stage("chunking"):
        time.sleep(0.01)
    timer.add("chunking", 5.0)
    assert timer.timings["chunking"] >= 10.0

    disabled = StageTimer(enabled=False)
    with disabled.stage("retrieval"):
        time.sleep(0.005)
    disabled.add("chunking", 5.0)
    assert disabled.timings == {"retrieval": 0.0, "chunking": 0.0}


def test_chunking_time_grows_linearly():
    rng = random.Random(21)
    config = QascConfig()

    def best_time(n):
        doc = segment_document("d", " ".join(f"Sentence {i}." for i in range(1, n + 1)))
        profile = SimilarityProfile(scores=[rng.uniform(0, 1) for _ in range(n)])
        timings = []
        for _ in range(10):
            started = time.perf_counter()
            build_chunk_set(doc, profile, config)
            timings.append(time.perf_counter() - started)
        return min(timings)

    times = [best_time(n) for n in (200, 400, 800)]
    for smaller, larger in zip(times, times[1:]):
        assert larger <= 2.5 * smaller


# Корпус, запросы и разметка

async def test_load_inputs(tmp_path):
    corpus = write_ndjson(tmp_path / "corpus.jsonl", [{"id": "d1", "text": "One. Two.", "source": "x"}])
    queries = write_ndjson(tmp_path / "queries.jsonl", [{"id": "q1", "text": "What?"}])
    gold = write_ndjson(tmp_path / "gold.jsonl", [{"query_id": "q1", "doc_id": "d1", "relevant_sentences": [2]}])

    [doc] = await load_corpus(corpus)
    assert doc.n == 2
    [query] = await load_queries(queries)
    assert query.type == "factoid"
    [annotation] = await load_gold(gold)
    validate_gold([annotation], [doc], [query])


async def test_load_errors(tmp_path):
    with pytest.raises(CorpusIOError):
        await load_corpus(str(tmp_path / "missing.jsonl"))

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"id": "d1", "text": "Fine."}\n{not json}\n', encoding="utf-8")
    with pytest.raises(DataValidationError, match="broken.jsonl:2"):
        await load_corpus(str(broken))

    duplicated = write_ndjson(tmp_path / "dup.jsonl", [{"id": "q", "text": "a?"}, {"id": "q", "text": "b?"}])
    with pytest.raises(DataValidationError) as error:
        await load_queries(duplicated)
    assert error.value.offenders == ["q"]

    bad_type = write_ndjson(tmp_path / "types.jsonl", [{"id": "q", "text": "a?", "type": "opinion"}])
    with pytest.raises(DataValidationError):
        await load_queries(bad_type)

    empty_gold = write_ndjson(tmp_path / "gold.jsonl", [{"query_id": "q", "doc_id": "d", "relevant_sentences": []}])
    with pytest.raises(DataValidationError):
        await load_gold(empty_gold)


def test_validate_gold_lists_every_offender():
    doc = segment_document("d1", "One. Two. Three.")
    queries = [QueryRecord(id="q1", text="What?")]
    gold = [
        GoldAnnotation(query_id="q1", doc_id="d1", relevant_sentences=frozenset({1})),
        GoldAnnotation(query_id="q9", doc_id="d1", relevant_sentences=frozenset({1})),
        GoldAnnotation(query_id="q1", doc_id="d9", relevant_sentences=frozenset({1})),
        GoldAnnotation(query_id="q1", doc_id="d1", relevant_sentences=frozenset({2, 4})),
    ]
    with pytest.raises(DataValidationError) as error:
        validate_gold(gold, [doc], queries)
    offenders = error.value.offenders
    assert len(offenders) == 3
    assert any("q9" in o for o in offenders)
    assert any("d9" in o for o in offenders)
    assert any("4" in o and "1..3" in o for o in offenders)


def test_filter_documents():
    short = segment_document("short", "One. Two.")
    long = segment_document("long", " ".join(f"Sentence {i}." for i in range(1, 60)))
    assert [d.id for d in filter_documents([short, long], 50)] == ["long"]
    assert len(filter_documents([short, long], 0)) == 2


# Сложность документов

def test_document_complexity_features():
    doc = segment_document("d", "Cats purr. Cats nap.\n\nDogs bark.")
    item = document_complexity(doc, segment_count=2)
    assert item.sentence_count == 3
    assert item.paragraph_count == 2
    assert item.type_token_ratio == pytest.approx(5 / 6)


def test_assign_tiers_by_tertiles():
    items = [
        DocumentComplexity(doc_id=f"d{i}", sentence_count=10 * i, type_token_ratio=0.1 * i,
                           paragraph_count=i, segment_count=i)
        for i in range(1, 7)
    ]
    tiered = assign_tiers(items)
    assert [t.doc_id for t in tiered] == [f"d{i}" for i in range(1, 7)]
    assert [t.tier for t in tiered] == ["low", "low", "medium", "medium", "high", "high"]
    assert tiered[0].score == 0.0 and tiered[-1].score == pytest.approx(1.0)
    assert assign_tiers([]) == []


async def test_corpus_complexity_and_query_tiers(provider):
    documents = [
        segment_document(f"d{i}", "\n\n".join(" ".join(f"Word{j} topic{i} line." for j in range(i + 1))
                                               for _ in range(i + 1)))
        for i in range(3)
    ]
    complexity = await corpus_complexity(documents, provider)
    assert set(complexity) == {"d0", "d1", "d2"}
    assert complexity["d0"].tier == "low" and complexity["d2"].tier == "high"

    gold = [
        GoldAnnotation(query_id="q1", doc_id="d0", relevant_sentences=frozenset({1})),
        GoldAnnotation(query_id="q1", doc_id="d2", relevant_sentences=frozenset({1})),
        GoldAnnotation(query_id="q2", doc_id="d1", relevant_sentences=frozenset({1})),
    ]
    assert query_tiers(gold, complexity) == {"q1": "high", "q2": "medium"}


def test_assign_folds_is_seeded_and_balanced():
    ids = [f"q{i:02d}" for i in range(10)]
    folds = assign_folds(ids, 3, seed=5)
    assert folds == assign_folds(list(reversed(ids)), 3, seed=5)
    assert sorted(list(folds.values()).count(f) for f in range(3)) == [3, 3, 4]


# Пайплайн оценки

async def load_cluster(paths):
    documents = await load_corpus(paths["corpus"])
    queries = await load_queries(paths["queries"])
    gold = await load_gold(paths["gold"])
    validate_gold(gold, documents, queries)
    return documents, queries, gold


async def test_qasc_beats_fixed_on_contiguous_cluster(cluster_corpus, provider):
    documents, queries, gold = await load_cluster(cluster_corpus)
    runner = EvaluationRunner(documents, queries, gold, provider, RetrievalConfig(top_k=5), timing=False)

    results = await runner.run([QascChunker(provider), FixedChunker(150)])
    qasc = [r for r in results if r.strategy == "qasc"]
    fixed = [r for r in results if r.strategy == "fixed:150"]
    assert len(qasc) == len(fixed) == 10

    assert all(r.f1 == 1.0 for r in qasc)
    assert all(r.chunk_count == 1 for r in qasc)
    assert all(r.f1 < 1.0 for r in fixed)
    assert all((r.precision, r.recall) == (0.25, 1.0) for r in fixed)
    assert all(r.latency_ms == {"chunking": 0.0, "retrieval": 0.0} for r in results)


async def test_corpus_scope_searches_every_document(cluster_corpus, provider):
    documents, queries, gold = await load_cluster(cluster_corpus)
    runner = EvaluationRunner(documents, queries[:2], gold, provider, RetrievalConfig(top_k=3, scope="corpus"))
    results = await runner.evaluate_strategy(FixedChunker(150))
    assert all(r.chunk_count == 40 for r in results)
    assert all(len(r.retrieved) == 3 for r in results)
    assert all(r.relevant_available == 1 for r in results)


async def test_query_agnostic_strategy_is_chunked_once_per_document(cluster_corpus, counting_provider):
    documents, queries, gold = await load_cluster(cluster_corpus)
    runner = EvaluationRunner(documents, queries, gold, counting_provider, RetrievalConfig(scope="corpus"))
    await runner.evaluate_strategy(FixedChunker(150))
    chunk_texts = [t for t in counting_provider.texts_embedded if not t.startswith("How do")]
    assert len(chunk_texts) == 40


async def test_summary_breakdowns(cluster_corpus, provider):
    documents, queries, gold = await load_cluster(cluster_corpus)
    runner = EvaluationRunner(documents, queries, gold, provider, timing=False)
    results = await runner.run([FixedChunker(150)])

    tiers = {q.id: ("low" if i < 5 else "high") for i, q in enumerate(runner.queries)}
    summary = build_summary(results, runner.retrieval_config, tiers, folds=2, fold_seed=1)

    assert summary["strategies"] == ["fixed:150"]
    assert summary["retrieval"] == {"top_k": 5, "scope": "document"}
    per_strategy = summary["per_strategy"]["fixed:150"]
    assert per_strategy["f1"] == pytest.approx(0.4)
    assert per_strategy["latency_ms"] == {"chunking": 0.0, "retrieval": 0.0, "total": 0.0}
    assert set(summary["per_query_type"]["fixed:150"]) == {"factoid", "topical", "comparative", "multi_hop"}
    assert set(summary["per_complexity_tier"]["fixed:150"]) == {"low", "high"}
    folds = summary["folds"]["per_strategy"]["fixed:150"]
    assert len(folds["f1_per_fold"]) == 2
    assert folds["f1_std"] == 0.0

    frame = results_frame(results)
    assert list(frame.columns) == [
        "strategy", "query_id", "query_type", "precision", "recall", "f1",
        "chunk_count", "latency_chunking_ms", "latency_retrieval_ms",
    ]
    assert list(frame["query_id"]) == sorted(frame["query_id"])
