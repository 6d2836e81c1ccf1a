"""Тесты шагов QASC на разобранных вручную примерах."""
import math

import pytest
from pydantic import ValidationError

from chunking.models import CandidateChunk, ChunkSet, QascConfig
from chunking.qasc import (
    adjust_boundaries,
    aggregate_score,
    build_chunk_set,
    compose_summary,
    expand_window_adaptive,
    expand_window_fixed,
    filter_candidates,
    merge_chunks,
    percentile,
    positional_weights,
    run_qasc,
    select_seeds,
    select_seeds_topk,
    to_text_chunks,
)
from chunking.segmenter import segment_document
from embedding.similarity import SimilarityProfile
from utils.errors import ConfigurationError, DataValidationError, EmptyDocumentError


def profile_of(*scores):
    return SimilarityProfile(doc_id="d", query_id="q", scores=list(scores))


def numbered_doc(n, paragraph_starts=(1,)):
    """Документ из n предложений "Sentence i." с абзацами, начинающимися в paragraph_starts"""
    paragraphs, current = [], []
    for i in range(1, n + 1):
        if i in paragraph_starts and current:
            paragraphs.append(" ".join(current))
            current = []
        current.append(f"Sentence {i}.")
    paragraphs.append(" ".join(current))
    return segment_document("d", "\n\n".join(paragraphs))


def chunk(start, end, seeds, score=0.0):
    return CandidateChunk(start=start, end=end, seed_indices=tuple(seeds), aggregate_score=score)


def test_config_defaults_and_validation():
    config = QascConfig()
    assert (config.seed_percentile, config.window_radius, config.decay) == (75.0, 3, 0.3)
    assert (config.gap_tolerance, config.chunk_threshold_factor) == (2, 0.6)
    assert (config.boundary_percentile, config.max_boundary_shift) == (40.0, 2)
    with pytest.raises(ValidationError):
        QascConfig(seed_percentile=101)
    with pytest.raises(ValidationError):
        QascConfig(boundary_percentile=-1)
    with pytest.raises(ValidationError):
        QascConfig(seed_strategy="top_k")
    with pytest.raises(ValidationError):
        QascConfig(unknown_field=1)


def test_percentile_examples():
    assert percentile([0.5], 37) == 0.5
    assert percentile([0.1, 0.2, 0.3, 0.4, 0.5], 0) == 0.1
    assert percentile([0.1, 0.2, 0.3, 0.4, 0.5], 100) == 0.5
    assert percentile([0.1, 0.2, 0.8, 0.9], 75) == pytest.approx(0.825, abs=1e-12)
    with pytest.raises(DataValidationError):
        percentile([], 50)
    with pytest.raises(ConfigurationError):
        percentile([1.0], 150)


def test_select_seeds_examples():
    seeds = select_seeds(profile_of(0.9, 0.2, 0.8, 0.1), 75)
    assert seeds.threshold == pytest.approx(0.825)
    assert seeds.indices == [1]

    assert select_seeds(profile_of(0.5, 0.5, 0.5, 0.5), 90).indices == [1, 2, 3, 4]
    assert select_seeds(profile_of(0.3, 0.1, 0.7), 0).indices == [1, 2, 3]


def test_select_seeds_topk_examples():
    assert select_seeds_topk(profile_of(0.9, 0.2, 0.8, 0.1), 2).indices == [1, 3]
    assert select_seeds_topk(profile_of(0.9, 0.2, 0.8, 0.1), 2).threshold == 0.8
    assert select_seeds_topk(profile_of(0.3, 0.1, 0.7), 3).indices == [1, 2, 3]
    assert select_seeds_topk(profile_of(0.5, 0.5, 0.5), 2).indices == [1, 2]
    with pytest.raises(ConfigurationError):
        select_seeds_topk(profile_of(0.5, 0.5), 3)


def test_expand_window_fixed_examples():
    assert expand_window_fixed(5, 3, 100) == (2, 8)
    assert expand_window_fixed(1, 3, 100) == (1, 4)
    assert expand_window_fixed(100, 3, 100) == (97, 100)


def test_expand_window_adaptive_examples():
    profile = profile_of(0.1, 0.7, 0.9, 0.8, 0.2)
    assert expand_window_adaptive(3, profile, 0.5) == (2, 4)
    assert expand_window_adaptive(2, profile_of(0.6, 0.7, 0.9), 0.5) == (1, 3)
    assert expand_window_adaptive(2, profile_of(0.1, 0.9, 0.2), 0.5) == (2, 2)


def test_positional_weights_examples():
    assert positional_weights((2, 6), 4, 0.0).tolist() == [1.0] * 5
    weights = positional_weights((2, 4), 3, 0.3)
    assert weights[0] == pytest.approx(0.74081822, abs=1e-8)
    assert weights[1] == 1.0
    assert positional_weights((5, 5), 5, 2.0).tolist() == [1.0]


def test_aggregate_score_examples():
    profile = profile_of(0.1, 0.7, 0.9, 0.8, 0.2)
    assert aggregate_score((2, 4), profile, positional_weights((2, 4), 3, 0.0)) == pytest.approx(0.8, abs=1e-12)
    assert aggregate_score((3, 3), profile, positional_weights((3, 3), 3, 0.3)) == 0.9
    alpha = math.exp(-0.3)
    expected = (alpha * 0.7 + 0.9 + alpha * 0.8) / (2 * alpha + 1)
    assert aggregate_score((2, 4), profile, positional_weights((2, 4), 3, 0.3)) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.81045, abs=1e-4)


def test_filter_candidates_examples():
    kept = chunk(1, 2, [1], score=0.5)
    dropped = chunk(4, 5, [4], score=0.49)
    assert filter_candidates([kept, dropped], 0.825, 0.6) == [kept]
    assert filter_candidates([kept, dropped], 0.825, 0.0) == [kept, dropped]
    with pytest.raises(DataValidationError):
        filter_candidates([kept], math.nan, 0.6)


def test_merge_examples():
    profile = profile_of(*[0.5] * 12)
    merged = merge_chunks([chunk(3, 7, [5]), chunk(9, 12, [10])], 2, profile, 0.3)
    assert merged.spans == [(3, 12)]
    assert merged.chunks[0].seed_indices == (5, 10)

    unchanged = merge_chunks([chunk(3, 7, [5]), chunk(10, 12, [11])], 2, profile, 0.3)
    assert unchanged.spans == [(3, 7), (10, 12)]

    chained = merge_chunks([chunk(3, 7, [5]), chunk(5, 9, [7]), chunk(11, 12, [12])], 1, profile, 0.3)
    assert chained.spans == [(3, 9), (11, 12)]


def test_merge_rescores_with_all_seeds():
    profile = profile_of(0.9, 0.1, 0.1, 0.1, 0.9)
    merged = merge_chunks([chunk(1, 2, [1]), chunk(4, 5, [5])], 2, profile, 1.0)
    [only] = merged.chunks
    weights = [1.0, math.exp(-1), math.exp(-2), math.exp(-1), 1.0]
    expected = sum(w * s for w, s in zip(weights, profile.scores)) / sum(weights)
    assert only.aggregate_score == pytest.approx(expected, abs=1e-12)


def test_adjust_boundaries_moves_start_to_paragraph():
    doc = numbered_doc(12, paragraph_starts=(1, 5, 10))
    assert doc.paragraph_starts == {1, 5, 10}
    profile = profile_of(*[0.5] * 12)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(4, 9, [6])])
    assert adjust_boundaries(chunks, doc, 2, profile, 0.3).spans == [(5, 9)]


def test_adjust_boundaries_without_nearby_paragraph():
    doc = numbered_doc(20, paragraph_starts=(1, 15))
    profile = profile_of(*[0.5] * 20)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(6, 8, [7])])
    assert adjust_boundaries(chunks, doc, 2, profile, 0.3).spans == [(6, 8)]


def test_adjust_boundaries_respects_previous_chunk():
    doc = numbered_doc(12, paragraph_starts=(1, 4))
    profile = profile_of(*[0.5] * 12)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(1, 3, [2]), chunk(6, 9, [7])])
    adjusted = adjust_boundaries(chunks, doc, 2, profile, 0.3, gap_tolerance=2)
    assert adjusted.spans == [(1, 3), (6, 9)]


def test_adjust_boundaries_tie_prefers_shrinking():
    doc = numbered_doc(12, paragraph_starts=(1, 4, 6))
    profile = profile_of(*[0.5] * 12)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(5, 9, [8])])
    assert adjust_boundaries(chunks, doc, 2, profile, 0.3).spans[0][0] == 6


def test_adjust_boundaries_keeps_seeds_inside():
    doc = numbered_doc(12, paragraph_starts=(1, 6))
    profile = profile_of(*[0.5] * 12)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(4, 9, [4])])
    assert adjust_boundaries(chunks, doc, 2, profile, 0.3).spans[0][0] == 4


async def test_run_qasc_single_matching_sentence(provider):
    doc = segment_document("d", "Bananas ripen in warm kitchens. Tax forms arrive in spring. "
                                "Glaciers carve deep valleys. Violins need fresh strings.")
    result = await run_qasc(doc, "Glaciers carve deep valleys.", provider)
    assert len(result.chunks) == 1
    [only] = result.chunks
    assert only.start <= 3 <= only.end
    assert only.end - only.start + 1 <= 7
    assert only.seed_indices == (3,)


async def test_run_qasc_identical_sentences_merge_to_whole_document(provider):
    doc = segment_document("d", " ".join(["Same words here."] * 10))
    result = await run_qasc(doc, "Same words here.", provider)
    assert result.spans == [(1, 10)]


async def test_run_qasc_single_sentence(provider):
    doc = segment_document("d", "Only one sentence exists.")
    result = await run_qasc(doc, "anything at all", provider)
    assert result.spans == [(1, 1)]
    assert result.chunks[0].seed_indices == (1,)


async def test_run_qasc_empty_document(provider):
    with pytest.raises(EmptyDocumentError):
        await run_qasc(segment_document("d", ""), "query", provider)


def test_everything_filtered_gives_empty_set():
    doc = numbered_doc(5)
    profile = profile_of(0.9, 0.9, 0.9, 0.9, 0.9)
    config = QascConfig(chunk_threshold_factor=1.5)
    assert build_chunk_set(doc, profile, config).chunks == []


def test_ablation_switches():
    doc = numbered_doc(10, paragraph_starts=(1, 5))
    profile = profile_of(0.1, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1)
    config = QascConfig(window_radius=1, seed_percentile=90)
    assert build_chunk_set(doc, profile, config).spans == [(5, 6)]
    assert build_chunk_set(doc, profile, config.copy(update={"enable_boundary_adjustment": False})).spans == [(4, 6)]

    low = QascConfig(window_radius=0, seed_percentile=0, chunk_threshold_factor=2.0, enable_filtering=False)
    assert build_chunk_set(doc, profile, low).spans == [(1, 10)]


def test_compose_summary_examples():
    doc = numbered_doc(10)
    adjacent = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(1, 3, [1]), chunk(4, 6, [5])])
    assert compose_summary(adjacent, doc) == " ".join(f"Sentence {i}." for i in range(1, 7))

    gapped = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(1, 3, [1]), chunk(8, 9, [8])])
    assert compose_summary(gapped, doc) == "Sentence 1. Sentence 2. Sentence 3. [...] Sentence 8. Sentence 9."

    single = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(2, 4, [3])])
    assert compose_summary(single, doc) == "Sentence 2. Sentence 3. Sentence 4."
    assert compose_summary(ChunkSet(doc_id="d", query_id="q"), doc) == ""


def test_marker_only_between_non_adjacent_chunks():
    doc = numbered_doc(12)
    chunks = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(1, 2, [1]), chunk(3, 4, [3]), chunk(7, 7, [7]), chunk(9, 12, [9])])
    summary = compose_summary(chunks, doc)
    assert summary.count(" [...] ") == 2
    assert "Sentence 2. Sentence 3." in summary
    assert "Sentence 4. [...] Sentence 7. [...] Sentence 9." in summary


def test_text_chunks_and_records():
    doc = numbered_doc(10)
    chunk_set = ChunkSet(doc_id="d", query_id="q", chunks=[chunk(1, 3, [2], 0.7), chunk(8, 9, [8], 0.9)])

    units = to_text_chunks(chunk_set, doc, "chunk_set")
    assert [u.chunk_index for u in units] == [0, 1]
    assert units[1].text == "Sentence 8. Sentence 9."
    record = units[0].to_record()
    assert set(record) == {"doc_id", "query_id", "chunk_index", "start_sentence", "end_sentence",
                           "text", "score", "seeds", "mode"}
    assert record["mode"] == "chunk_set" and record["seeds"] == [2]

    [summary] = to_text_chunks(chunk_set, doc, "composed_summary")
    assert summary.mode == "composed_summary"
    assert summary.score == 0.9
    assert summary.covered_sentences() == {1, 2, 3, 8, 9}
    assert to_text_chunks(ChunkSet(doc_id="d", query_id="q"), doc, "composed_summary") == []
