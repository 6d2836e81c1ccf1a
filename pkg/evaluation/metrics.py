"""Метрики релевантности и латентность."""
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Mapping, Sequence, Tuple, Union
import logging

from chunking.models import TextChunk
from evaluation.models import GoldAnnotation, LatencyReport

logger = logging.getLogger(__name__)

GoldLookup = Union[GoldAnnotation, Mapping[str, GoldAnnotation]]


def judge_relevance(chunk: TextChunk, gold: GoldAnnotation) -> bool:
    """
    Чанк релевантен, если его предложения пересекаются с размеченными

    Args:
        chunk: Чанк (того же документа, что и разметка)
        gold: Разметка

    Returns:
        bool: True при непустом пересечении
    """
    if chunk.doc_id != gold.doc_id:
        return False
    return not chunk.covered_sentences().isdisjoint(gold.relevant_sentences)


def _is_relevant(chunk: TextChunk, gold: GoldLookup) -> bool:
    if isinstance(gold, GoldAnnotation):
        return judge_relevance(chunk, gold)
    annotation = gold.get(chunk.doc_id)
    return annotation is not None and judge_relevance(chunk, annotation)


def count_relevant(chunks: Sequence[TextChunk], gold: GoldLookup) -> int:
    """Число релевантных чанков"""
    return sum(1 for c in chunks if _is_relevant(c, gold))


def f1_score(precision: float, recall: float) -> float:
    """Гармоническое среднее; 0, если оба нулевые"""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_metrics(
    retrieved: Sequence[TextChunk],
    all_chunks: Sequence[TextChunk],
    gold: GoldLookup,
) -> Tuple[float, float, float]:
    """
    Precision, recall и F1 для одного запроса

    Знаменатель recall: число релевантных чанков в наборе самой стратегии.

    Args:
        retrieved: Найденные чанки (подмножество all_chunks)
        all_chunks: Все чанки стратегии в пуле поиска
        gold: Разметка одного документа или словарь doc_id -> разметка

    Returns:
        Tuple[float, float, float]: (precision, recall, f1)
    """
    relevant_retrieved = count_relevant(retrieved, gold)
    relevant_available = count_relevant(all_chunks, gold)

    precision = relevant_retrieved / len(retrieved) if retrieved else 0.0
    recall = min(1.0, relevant_retrieved / relevant_available) if relevant_available else 0.0
    return precision, recall, f1_score(precision, recall)


class StageTimer:
    """Замер этапов по монотонным часам"""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            elapsed_ms = (time.perf_counter() - started) * 1000.0 if self.enabled else 0.0
            self.timings[name] = self.timings.get(name, 0.0) + elapsed_ms

    def add(self, name: str, milliseconds: float) -> None:
        if self.enabled:
            self.timings[name] = self.timings.get(name, 0.0) + milliseconds
        else:
            self.timings.setdefault(name, 0.0)


def measure_latency(stage_timings: Sequence[Mapping[str, float]]) -> LatencyReport:
    """
    Суммы и средние по этапам для набора запросов

    Args:
        stage_timings: Для каждого запроса словарь этап -> миллисекунды

    Returns:
        LatencyReport: Пустой отчёт, если запросов нет
    """
    if not stage_timings:
        return LatencyReport()

    per_stage: Dict[str, float] = {}
    for timings in stage_timings:
        for stage, ms in timings.items():
            per_stage[stage] = per_stage.get(stage, 0.0) + ms

    count = len(stage_timings)
    total = sum(per_stage.values())
    return LatencyReport(
        query_count=count,
        per_stage_ms=per_stage,
        total_ms=total,
        average_per_stage_ms={stage: ms / count for stage, ms in per_stage.items()},
        average_total_ms=total / count,
    )
