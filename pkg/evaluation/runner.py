"""
Пайплайн оценки: чанкинг -> индекс -> top-k поиск -> метрики, для каждой стратегии
и каждого запроса. Запросы обрабатываются параллельно через ConcurrencyLimiter,
результаты собираются и сортируются одним сборщиком.
"""
import json
import os
import random
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import aiofiles
import numpy as np
import pandas as pd

from config.constants import REPORT_COLUMNS
from config.settings import settings
from chunking.chunkers import Chunker
from chunking.models import Document, TextChunk
from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import EmbeddingVector
from evaluation.complexity import TIERS, DocumentComplexity
from evaluation.metrics import StageTimer, compute_metrics, count_relevant, measure_latency
from evaluation.models import EvalResult, GoldAnnotation, QueryRecord, RetrievalConfig, RetrievedChunk, RetrievalScope
from evaluation.retrieval import ChunkIndex
from utils.concurrency import ConcurrencyLimiter
from utils.errors import CorpusIOError

logger = logging.getLogger(__name__)

# Чанки документа, их эмбеддинги и время чанкинга (мс)
PreparedDocument = Tuple[List[TextChunk], List[EmbeddingVector], float]


def group_gold(gold: Sequence[GoldAnnotation]) -> Dict[str, Dict[str, GoldAnnotation]]:
    """Разметка по запросам: query_id -> doc_id -> разметка"""
    grouped: Dict[str, Dict[str, GoldAnnotation]] = {}
    for g in gold:
        grouped.setdefault(g.query_id, {})[g.doc_id] = g
    return grouped


def build_result(
    query: QueryRecord,
    strategy: str,
    chunks: Sequence[TextChunk],
    retrieved: Sequence[RetrievedChunk],
    gold: Dict[str, GoldAnnotation],
    latency_ms: Dict[str, float],
) -> EvalResult:
    """Метрики одного запроса по найденным чанкам"""
    precision, recall, f1 = compute_metrics([r.chunk for r in retrieved], chunks, gold)
    return EvalResult(
        query_id=query.id,
        strategy=strategy,
        query_type=query.type,
        retrieved=list(retrieved),
        precision=precision,
        recall=recall,
        f1=f1,
        chunk_count=len(chunks),
        relevant_available=count_relevant(chunks, gold),
        latency_ms=latency_ms,
    )


class EvaluationRunner:
    def __init__(
        self,
        documents: Sequence[Document],
        queries: Sequence[QueryRecord],
        gold: Sequence[GoldAnnotation],
        provider: EmbeddingProvider,
        retrieval_config: Optional[RetrievalConfig] = None,
        parallelism: Optional[int] = None,
        timing: bool = True,
    ):
        self.documents = sorted(documents, key=lambda d: d.id)
        self.docs_by_id = {d.id: d for d in self.documents}
        self.queries = sorted(queries, key=lambda q: q.id)
        self.gold_by_query = group_gold(gold)
        self.provider = provider
        self.retrieval_config = retrieval_config or RetrievalConfig()
        self.timing = timing
        self.limiter = ConcurrencyLimiter(parallelism or settings.PARALLELISM)
        self._query_vectors: Dict[str, EmbeddingVector] = {}

    def pool_for(self, query: QueryRecord) -> List[Document]:
        """Документы, среди чанков которых ищем ответ на запрос"""
        if self.retrieval_config.scope == RetrievalScope.CORPUS:
            return list(self.documents)
        doc_ids = sorted(self.gold_by_query.get(query.id, {}))
        return [self.docs_by_id[d] for d in doc_ids if d in self.docs_by_id]

    async def query_vector(self, query: QueryRecord) -> EmbeddingVector:
        if query.id not in self._query_vectors:
            self._query_vectors[query.id] = (await embed_batch(self.provider, [query.text]))[0]
        return self._query_vectors[query.id]

    async def _prepare_document(self, chunker: Chunker, doc: Document) -> PreparedDocument:
        timer = StageTimer(self.timing)
        with timer.stage("chunking"):
            chunks = await chunker.chunk(doc)
        vectors = await embed_batch(self.provider, [c.text for c in chunks]) if chunks else []
        return chunks, vectors, timer.timings["chunking"]

    async def _prepare_index(self, chunker: Chunker) -> Dict[str, PreparedDocument]:
        """Чанки и эмбеддинги документов для стратегий, не зависящих от запроса"""
        needed = sorted({d.id for q in self.queries for d in self.pool_for(q)})
        prepared = await self.limiter.map(
            f"index:{chunker.label}",
            [lambda doc_id=doc_id: self._prepare_document(chunker, self.docs_by_id[doc_id]) for doc_id in needed],
        )
        return dict(zip(needed, prepared))

    async def evaluate_query(
        self,
        chunker: Chunker,
        query: QueryRecord,
        prepared: Optional[Dict[str, PreparedDocument]] = None,
    ) -> EvalResult:
        """
        Оценка одной стратегии на одном запросе

        Args:
            chunker: Стратегия
            query: Запрос
            prepared: Подготовленный индекс (для стратегий, не зависящих от запроса)

        Returns:
            EvalResult: Метрики и латентность
        """
        timer = StageTimer(self.timing)
        pool = self.pool_for(query)
        gold = self.gold_by_query.get(query.id, {})
        index = ChunkIndex()
        chunks: List[TextChunk] = []

        if chunker.query_dependent:
            with timer.stage("chunking"):
                for doc in pool:
                    chunks.extend(await chunker.chunk(doc, query.text, query.id))
            with timer.stage("retrieval"):
                await index.add_texts(chunks, self.provider)
                retrieved = await self._search(index, query)
        else:
            prepared = prepared if prepared is not None else await self._prepare_index(chunker)
            for doc in pool:
                doc_chunks, vectors, chunking_ms = prepared[doc.id]
                index.add(doc_chunks, vectors)
                chunks.extend(doc_chunks)
                timer.add("chunking", chunking_ms)
            with timer.stage("retrieval"):
                retrieved = await self._search(index, query)

        if not pool:
            logger.warning(f"⚠️ {query.id}: нет документов для поиска")
        return build_result(query, chunker.label, chunks, retrieved, gold, dict(timer.timings))

    async def _search(self, index: ChunkIndex, query: QueryRecord) -> List[RetrievedChunk]:
        if not len(index):
            return []
        return index.search(await self.query_vector(query), self.retrieval_config.top_k)

    async def evaluate_strategy(self, chunker: Chunker) -> List[EvalResult]:
        """Оценка стратегии на всех запросах"""
        await chunker.prepare()
        logger.info(f"🚀 Оценка стратегии {chunker.label}: {len(self.queries)} запросов")
        prepared = None if chunker.query_dependent else await self._prepare_index(chunker)
        results = await self.limiter.map(
            f"eval:{chunker.label}",
            [lambda query=query: self.evaluate_query(chunker, query, prepared) for query in self.queries],
        )
        results.sort(key=lambda r: r.query_id)

        relevant_total = sum(r.relevant_available for r in results)
        logger.info(
            f"📊 {chunker.label}: знаменатель recall = релевантные чанки самой стратегии "
            f"({relevant_total} по всем запросам)"
        )
        return results

    async def run(self, chunkers: Sequence[Chunker]) -> List[EvalResult]:
        """Оценка всех стратегий по порядку"""
        results: List[EvalResult] = []
        for chunker in chunkers:
            results.extend(await self.evaluate_strategy(chunker))
        logger.info(f"✅ Оценка завершена: {len(results)} строк, статистика пула {self.limiter.get_stats()}")
        return results


def assign_folds(query_ids: Sequence[str], folds: int, seed: int) -> Dict[str, int]:
    """Перемешивает запросы генератором с seed и раскладывает по фолдам по кругу"""
    ordered = sorted(query_ids)
    random.Random(seed).shuffle(ordered)
    return {query_id: position % folds for position, query_id in enumerate(ordered)}


def query_tiers(
    gold: Sequence[GoldAnnotation],
    complexity: Dict[str, DocumentComplexity],
) -> Dict[str, str]:
    """Уровень запроса: наивысший уровень среди его размеченных документов"""
    rank = {t.value: i for i, t in enumerate(TIERS)}
    tiers: Dict[str, str] = {}
    for g in gold:
        item = complexity.get(g.doc_id)
        if item is None:
            continue
        current = tiers.get(g.query_id)
        if current is None or rank[item.tier] > rank[current]:
            tiers[g.query_id] = item.tier
    return tiers


def results_frame(results: Sequence[EvalResult]) -> pd.DataFrame:
    """Таблица отчёта в порядке стратегий и запросов"""
    return pd.DataFrame([r.to_row() for r in results], columns=REPORT_COLUMNS)


def _aggregate(frame: pd.DataFrame) -> Dict[str, float]:
    return {
        "queries": int(len(frame)),
        "precision": round(float(frame["precision"].mean()), 6),
        "recall": round(float(frame["recall"].mean()), 6),
        "f1": round(float(frame["f1"].mean()), 6),
        "chunk_count": round(float(frame["chunk_count"].mean()), 6),
    }


def build_summary(
    results: Sequence[EvalResult],
    retrieval_config: RetrievalConfig,
    tiers_by_query: Optional[Dict[str, str]] = None,
    folds: int = 1,
    fold_seed: int = 0,
) -> dict:
    """
    Сводка по стратегиям, типам запросов, уровням сложности и фолдам

    Args:
        results: Результаты оценки
        retrieval_config: Параметры поиска
        tiers_by_query: Уровень сложности каждого запроса
        folds: Число фолдов (1 = без разбиения)
        fold_seed: Seed перемешивания запросов

    Returns:
        dict: JSON-совместимая сводка
    """
    frame = results_frame(results)
    strategies = list(dict.fromkeys(r.strategy for r in results))
    summary = {
        "retrieval": {"top_k": retrieval_config.top_k, "scope": retrieval_config.scope},
        "strategies": strategies,
        "per_strategy": {},
        "per_query_type": {},
    }

    for strategy in strategies:
        subset = [r for r in results if r.strategy == strategy]
        rows = frame[frame["strategy"] == strategy]
        latency = measure_latency([r.latency_ms for r in subset])
        summary["per_strategy"][strategy] = {
            **_aggregate(rows),
            "relevant_available": sum(r.relevant_available for r in subset),
            "latency_ms": {
                "chunking": round(latency.average_per_stage_ms.get("chunking", 0.0), 6),
                "retrieval": round(latency.average_per_stage_ms.get("retrieval", 0.0), 6),
                "total": round(latency.average_total_ms, 6),
            },
        }
        summary["per_query_type"][strategy] = {
            query_type: _aggregate(group)
            for query_type, group in rows.groupby("query_type", sort=True)
        }

    if tiers_by_query is not None:
        tiered = frame.assign(tier=frame["query_id"].map(tiers_by_query)).dropna(subset=["tier"])
        summary["per_complexity_tier"] = {
            strategy: {
                tier.value: _aggregate(tiered[(tiered["strategy"] == strategy) & (tiered["tier"] == tier.value)])
                for tier in TIERS
                if ((tiered["strategy"] == strategy) & (tiered["tier"] == tier.value)).any()
            }
            for strategy in strategies
        }

    if folds > 1:
        fold_of = assign_folds(frame["query_id"].unique().tolist(), folds, fold_seed)
        with_folds = frame.assign(fold=frame["query_id"].map(fold_of))
        summary["folds"] = {"k": folds, "seed": fold_seed, "per_strategy": {}}
        for strategy in strategies:
            per_fold = (
                with_folds[with_folds["strategy"] == strategy]
                .groupby("fold", sort=True)["f1"].mean()
            )
            values = per_fold.to_numpy(dtype=np.float64)
            summary["folds"]["per_strategy"][strategy] = {
                "f1_per_fold": [round(float(v), 6) for v in values],
                "f1_mean": round(float(values.mean()), 6),
                "f1_std": round(float(values.std(ddof=0)), 6),
            }

    return summary


async def write_text(path: str, content: str) -> None:
    """Записывает файл целиком"""
    try:
        async with aiofiles.open(path, "w", encoding="utf-8", newline="\n") as f:
            await f.write(content)
    except OSError as e:
        raise CorpusIOError(path, e.strerror or str(e))


async def write_reports(results: Sequence[EvalResult], summary: dict, output_dir: str) -> Tuple[str, str]:
    """
    Пишет CSV-отчёт и JSON-сводку

    Returns:
        Tuple[str, str]: Пути к report.csv и summary.json
    """
    csv_path = os.path.join(output_dir, "report.csv")
    json_path = os.path.join(output_dir, "summary.json")
    await write_text(csv_path, results_frame(results).to_csv(index=False, float_format="%.6f"))
    await write_text(json_path, json.dumps(summary, ensure_ascii=False, indent=2) + "\n")
    logger.info(f"💾 Отчёты: {csv_path}, {json_path}")
    return csv_path, json_path
