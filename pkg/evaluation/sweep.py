"""
Перебор гиперпараметров QASC.

Профили сходства и эмбеддинги запросов считаются один раз и переиспользуются
во всех точках сетки; ошибка в точке записывается в колонку error.
"""
import itertools
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd
from pydantic import ValidationError

from chunking.models import Document, QascConfig, TextChunk
from chunking.qasc import build_chunk_set, compute_profile, to_text_chunks
from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import EmbeddingVector, SimilarityProfile
from evaluation.models import GoldAnnotation, QueryRecord, RetrievalConfig, RetrievalScope
from evaluation.retrieval import ChunkIndex
from evaluation.runner import build_result, group_gold
from utils.errors import ConfigurationError, QascError, UsageError

logger = logging.getLogger(__name__)

SWEEP_AXES = [
    "seed_percentile",
    "window_radius",
    "decay",
    "gap_tolerance",
    "chunk_threshold_factor",
    "boundary_percentile",
    "window_mode",
    "enable_filtering",
    "enable_boundary_adjustment",
]

ONE_AT_A_TIME = "one_at_a_time"
GRID = "grid"

ROW_METRICS = ["precision", "recall", "f1", "chunk_count", "mean_chunk_score"]


def build_points(grid: Mapping[str, Sequence[Any]], mode: str = ONE_AT_A_TIME) -> List[Dict[str, Any]]:
    """
    Точки перебора

    Args:
        grid: Ось -> значения
        mode: one_at_a_time (меняется одна ось, остальные по умолчанию) или grid (декартово произведение)

    Returns:
        List[Dict[str, Any]]: Переопределения параметров для каждой точки
    """
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise UsageError("пустая сетка перебора")
    unknown = sorted(set(grid) - set(SWEEP_AXES))
    if unknown:
        raise UsageError(f"неизвестные оси перебора: {', '.join(unknown)}")

    if mode == ONE_AT_A_TIME:
        return [{axis: value} for axis, values in grid.items() for value in values]
    if mode == GRID:
        axes = list(grid)
        return [dict(zip(axes, combo)) for combo in itertools.product(*(grid[a] for a in axes))]
    raise UsageError(f"неизвестный режим перебора: {mode}")


def point_config(base: QascConfig, overrides: Mapping[str, Any]) -> QascConfig:
    """Конфигурация точки; значения вне допустимых диапазонов -> ConfigurationError"""
    try:
        return QascConfig(**{**base.dict(), **overrides})
    except ValidationError as e:
        raise ConfigurationError(f"недопустимая точка {dict(overrides)}: {e.errors()[0]['msg']}")


async def sweep_hyperparameters(
    documents: Sequence[Document],
    queries: Sequence[QueryRecord],
    gold: Sequence[GoldAnnotation],
    grid: Mapping[str, Sequence[Any]],
    provider: EmbeddingProvider,
    base_config: Optional[QascConfig] = None,
    retrieval_config: Optional[RetrievalConfig] = None,
    mode: str = ONE_AT_A_TIME,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Оценка QASC во всех точках сетки

    Args:
        documents: Документы
        queries: Запросы
        gold: Разметка
        grid: Ось -> значения
        provider: Провайдер эмбеддингов
        base_config: Значения осей, не входящих в точку
        retrieval_config: Параметры поиска
        mode: one_at_a_time или grid

    Returns:
        Tuple[pd.DataFrame, pd.DataFrame]: Строки (точка x запрос) и агрегаты по точкам
    """
    base = base_config or QascConfig()
    retrieval = retrieval_config or RetrievalConfig()
    points = build_points(grid, mode)
    configs: List[Optional[QascConfig]] = []
    config_errors: Dict[int, str] = {}
    for point_id, overrides in enumerate(points):
        try:
            configs.append(point_config(base, overrides))
        except ConfigurationError as e:
            logger.warning(f"⚠️ Точка {point_id}: {e}")
            configs.append(None)
            config_errors[point_id] = str(e)
    axes = list(grid)

    docs_by_id = {d.id: d for d in documents}
    gold_by_query = group_gold(gold)
    ordered_queries = sorted(queries, key=lambda q: q.id)

    def pool_for(query: QueryRecord) -> List[Document]:
        if retrieval.scope == RetrievalScope.CORPUS:
            return sorted(documents, key=lambda d: d.id)
        return [docs_by_id[d] for d in sorted(gold_by_query.get(query.id, {})) if d in docs_by_id]

    logger.info(f"🚀 Перебор: {len(points)} точек ({mode}), {len(ordered_queries)} запросов")

    # Профили и эмбеддинги запросов считаются один раз
    profiles: Dict[Tuple[str, str], SimilarityProfile] = {}
    query_vectors: Dict[str, EmbeddingVector] = {}
    for query in ordered_queries:
        query_vectors[query.id] = (await embed_batch(provider, [query.text]))[0]
        for doc in pool_for(query):
            if doc.n:
                profiles[(doc.id, query.id)] = await compute_profile(doc, query.text, provider, query.id)

    chunk_vectors: Dict[str, EmbeddingVector] = {}

    async def vectors_for(chunks: Sequence[TextChunk]) -> List[EmbeddingVector]:
        missing = sorted({c.text for c in chunks if c.text not in chunk_vectors})
        if missing:
            chunk_vectors.update(zip(missing, await embed_batch(provider, missing)))
        return [chunk_vectors[c.text] for c in chunks]

    rows = []
    for point_id, (overrides, config) in enumerate(zip(points, configs)):
        axis_values = {axis: overrides.get(axis, getattr(base, axis)) for axis in axes}
        for query in ordered_queries:
            row = {"point_id": point_id, **axis_values, "query_id": query.id, "query_type": query.type}
            try:
                if config is None:
                    raise ConfigurationError(config_errors[point_id])
                chunks: List[TextChunk] = []
                for doc in pool_for(query):
                    if not doc.n:
                        continue
                    chunk_set = build_chunk_set(doc, profiles[(doc.id, query.id)], config, query.id)
                    chunks.extend(to_text_chunks(chunk_set, doc, config.output_mode))
                index = ChunkIndex()
                index.add(chunks, await vectors_for(chunks))
                retrieved = index.search(query_vectors[query.id], retrieval.top_k) if chunks else []
                result = build_result(query, "qasc", chunks, retrieved, gold_by_query.get(query.id, {}), {})
                scores = [c.score for c in chunks if c.score is not None]
                row.update({
                    "precision": result.precision,
                    "recall": result.recall,
                    "f1": result.f1,
                    "chunk_count": result.chunk_count,
                    "mean_chunk_score": float(np.mean(scores)) if scores else 0.0,
                    "error": "",
                })
            except QascError as e:
                logger.warning(f"⚠️ Точка {point_id} {overrides}, запрос {query.id}: {e}")
                row.update({metric: np.nan for metric in ROW_METRICS})
                row["error"] = str(e)
            rows.append(row)

    columns = ["point_id", *axes, "query_id", "query_type", *ROW_METRICS, "error"]
    frame = pd.DataFrame(rows, columns=columns)
    summary = summarize_sweep(frame, points, axes, base)
    logger.info(f"✅ Перебор завершён: {len(summary)} точек, ошибок {int((frame['error'] != '').sum())}")
    return frame, summary


def summarize_sweep(
    frame: pd.DataFrame,
    points: Sequence[Mapping[str, Any]],
    axes: Sequence[str],
    base: QascConfig,
) -> pd.DataFrame:
    """Одна строка агрегатов на точку сетки"""
    summary_rows = []
    for point_id, overrides in enumerate(points):
        rows = frame[frame["point_id"] == point_id]
        ok = rows[rows["error"] == ""]
        summary_rows.append({
            "point_id": point_id,
            "varied": ",".join(overrides),
            **{axis: overrides.get(axis, getattr(base, axis)) for axis in axes},
            "queries": int(len(rows)),
            "precision": float(ok["precision"].mean()) if len(ok) else np.nan,
            "recall": float(ok["recall"].mean()) if len(ok) else np.nan,
            "f1": float(ok["f1"].mean()) if len(ok) else np.nan,
            "chunk_count": float(ok["chunk_count"].mean()) if len(ok) else np.nan,
            "errors": int(len(rows) - len(ok)),
        })
    return pd.DataFrame(summary_rows)
