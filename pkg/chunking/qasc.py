"""
Query-Adaptive Semantic Chunking.

Пайплайн: эмбеддинги -> профиль σ -> порог τ -> опорные предложения ->
окна -> взвешенная оценка -> фильтр β·τ -> слияние -> выравнивание границ.
"""
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from config.constants import OMISSION_MARKER
from chunking.models import (
    CandidateChunk,
    ChunkSet,
    Document,
    OutputMode,
    QascConfig,
    SeedSet,
    SeedStrategy,
    TextChunk,
    WindowMode,
)
from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import SimilarityProfile, similarity_profile
from utils.errors import ConfigurationError, DataValidationError, EmptyDocumentError

logger = logging.getLogger(__name__)

Span = Tuple[int, int]


def percentile(values: Sequence[float], p: float) -> float:
    """
    Перцентиль с линейной интерполяцией между ближайшими рангами

    Args:
        values: Непустой список конечных чисел
        p: Перцентиль в [0, 100]

    Returns:
        float: v[⌊rank⌋] + frac(rank)·(v[⌊rank⌋+1] − v[⌊rank⌋]), rank = p/100·(n−1)
    """
    if len(values) == 0:
        raise DataValidationError("перцентиль от пустого списка")
    if not 0 <= p <= 100:
        raise ConfigurationError(f"перцентиль {p} вне [0, 100]")
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise DataValidationError("перцентиль от нечисловых значений")
    ordered = np.sort(array)
    rank = p / 100.0 * (len(ordered) - 1)
    lower = int(math.floor(rank))
    upper = min(lower + 1, len(ordered) - 1)
    return float(ordered[lower] + (rank - lower) * (ordered[upper] - ordered[lower]))


def select_seeds(profile: SimilarityProfile, p: float) -> SeedSet:
    """
    Опорные предложения: все, чьё сходство не ниже τ = Percentile(σ, p)

    Args:
        profile: Профиль сходства
        p: Перцентиль

    Returns:
        SeedSet: Порог и опорные предложения по возрастанию индекса
    """
    tau = percentile(profile.scores, p)
    seeds = [(i, score) for i, score in enumerate(profile.scores, start=1) if score >= tau]
    return SeedSet(threshold=tau, seeds=seeds)


def select_seeds_topk(profile: SimilarityProfile, k: int) -> SeedSet:
    """
    k предложений с наибольшим сходством; при равенстве выигрывает меньший индекс

    Args:
        profile: Профиль сходства
        k: Число опорных предложений, 1 <= k <= n

    Returns:
        SeedSet: τ равен наименьшему выбранному сходству
    """
    n = profile.n
    if not 1 <= k <= n:
        raise ConfigurationError(f"top-k = {k} вне [1, {n}]")
    ranked = sorted(range(1, n + 1), key=lambda i: (-profile.score(i), i))[:k]
    seeds = [(i, profile.score(i)) for i in sorted(ranked)]
    return SeedSet(threshold=min(score for _, score in seeds), seeds=seeds)


def expand_window_fixed(seed: int, m: int, n: int) -> Span:
    """Окно радиуса m вокруг опорного предложения, обрезанное границами документа"""
    if not 1 <= seed <= n:
        raise DataValidationError(f"опорное предложение {seed} вне [1, {n}]")
    return max(1, seed - m), min(n, seed + m)


def expand_window_adaptive(seed: int, profile: SimilarityProfile, tau_boundary: float) -> Span:
    """
    Окно расширяется, пока соседние предложения не ниже τ_boundary

    Args:
        seed: Индекс опорного предложения
        profile: Профиль сходства
        tau_boundary: Порог границы

    Returns:
        Span: [a, b]; без остановки до края документа окно доходит до края
    """
    n = profile.n
    if not 1 <= seed <= n:
        raise DataValidationError(f"опорное предложение {seed} вне [1, {n}]")

    end = seed
    while end < n and profile.score(end + 1) >= tau_boundary:
        end += 1
    start = seed
    while start > 1 and profile.score(start - 1) >= tau_boundary:
        start -= 1
    return start, end


def positional_weights(span: Span, seed: int, decay: float) -> np.ndarray:
    """
    Позиционные веса α_i = exp(−λ·|i − r|) для i в [a, b]

    Args:
        span: Отрезок [a, b]
        seed: Опорное предложение r, a <= r <= b
        decay: λ >= 0

    Returns:
        np.ndarray: Веса α_a..α_b
    """
    start, end = span
    if not start <= seed <= end:
        raise DataValidationError(f"опорное предложение {seed} вне [{start}, {end}]")
    return multi_seed_weights(span, [seed], decay)


def multi_seed_weights(span: Span, seeds: Iterable[int], decay: float) -> np.ndarray:
    """Для нескольких опорных предложений берётся максимальный вес"""
    start, end = span
    positions = np.arange(start, end + 1)
    ordered = np.unique(np.asarray(list(seeds)))
    # Ближайшее опорное предложение слева и справа от каждой позиции
    right = np.clip(np.searchsorted(ordered, positions), 0, len(ordered) - 1)
    left = np.clip(right - 1, 0, len(ordered) - 1)
    distances = np.minimum(np.abs(positions - ordered[left]), np.abs(positions - ordered[right]))
    return np.exp(-decay * distances.astype(np.float64))


def aggregate_score(span: Span, profile: SimilarityProfile, weights: np.ndarray) -> float:
    """
    Взвешенное среднее сходств на отрезке

    Args:
        span: Отрезок [a, b]
        profile: Профиль сходства
        weights: Веса, выровненные с отрезком

    Returns:
        float: Σ(α_i·σ_i) / Σ(α_i)
    """
    start, end = span
    scores = np.asarray(profile.scores[start - 1:end], dtype=np.float64)
    if scores.shape != weights.shape:
        raise DataValidationError("веса не выровнены с отрезком")
    return float(np.dot(weights, scores) / np.sum(weights))


def score_span(span: Span, seeds: Sequence[int], profile: SimilarityProfile, decay: float) -> float:
    """Оценка отрезка с весами от всех его опорных предложений"""
    return aggregate_score(span, profile, multi_seed_weights(span, seeds, decay))


def filter_candidates(candidates: List[CandidateChunk], tau: float, beta: float) -> List[CandidateChunk]:
    """Оставляет кандидатов с оценкой не ниже β·τ"""
    if not math.isfinite(tau):
        raise DataValidationError("порог τ не является конечным числом")
    threshold = beta * tau
    return [c for c in candidates if c.aggregate_score >= threshold]


def merge_chunks(
    candidates: List[CandidateChunk],
    gap_tolerance: int,
    profile: SimilarityProfile,
    decay: float,
    doc_id: str = "",
    query_id: str = "",
) -> ChunkSet:
    """
    Сливает пересекающиеся и близкие (a_l − b_j <= g) кандидаты

    Args:
        candidates: Кандидаты
        gap_tolerance: g
        profile: Профиль сходства для пересчёта оценок
        decay: λ
        doc_id: Идентификатор документа
        query_id: Идентификатор запроса

    Returns:
        ChunkSet: Непересекающиеся чанки, соседние разделены более чем g предложениями
    """
    ordered = sorted(candidates, key=lambda c: (c.start, c.end))
    groups: List[List[CandidateChunk]] = []

    # Один проход по отсортированным началам даёт неподвижную точку:
    # все последующие начала не меньше текущего.
    end = 0
    for candidate in ordered:
        if groups and candidate.start - end <= gap_tolerance:
            groups[-1].append(candidate)
            end = max(end, candidate.end)
        else:
            groups.append([candidate])
            end = candidate.end

    merged: List[CandidateChunk] = []
    for group in groups:
        if len(group) == 1:
            merged.append(group[0])
            continue
        span = (group[0].start, max(c.end for c in group))
        seeds = tuple(sorted({r for c in group for r in c.seed_indices}))
        merged.append(CandidateChunk(
            start=span[0],
            end=span[1],
            seed_indices=seeds,
            aggregate_score=score_span(span, seeds, profile, decay),
        ))

    return ChunkSet(doc_id=doc_id, query_id=query_id, chunks=merged)


def _nearest(current: int, eligible: Iterable[int], max_shift: int, shrink_sign: int) -> Optional[int]:
    """Ближайшая допустимая позиция; при равенстве выбирается сужающая чанк"""
    options = [x for x in eligible if 0 < abs(x - current) <= max_shift]
    if not options:
        return None
    return min(options, key=lambda x: (abs(x - current), 0 if (x - current) * shrink_sign > 0 else 1))


def adjust_boundaries(
    chunks: ChunkSet,
    doc: Document,
    max_shift: int,
    profile: SimilarityProfile,
    decay: float,
    gap_tolerance: int = 0,
) -> ChunkSet:
    """
    Сдвигает границы чанков к началам абзацев не более чем на max_shift предложений

    Args:
        chunks: Набор чанков после слияния
        doc: Документ
        max_shift: Максимальный сдвиг
        profile: Профиль сходства для пересчёта оценок
        decay: λ
        gap_tolerance: g; сдвиг не сближает соседние чанки до g и меньше

    Returns:
        ChunkSet: Набор с выровненными границами
    """
    n = doc.n
    starts = doc.paragraph_starts
    ends = {s - 1 for s in starts if s > 1} | {n}
    adjusted: List[CandidateChunk] = []

    for position, chunk in enumerate(chunks.chunks):
        first_seed, last_seed = chunk.seed_indices[0], chunk.seed_indices[-1]
        previous_end = adjusted[-1].end if adjusted else None
        next_start = chunks.chunks[position + 1].start if position + 1 < len(chunks.chunks) else None

        start = chunk.start
        if start not in starts:
            target = _nearest(start, (s for s in starts if s <= n), max_shift, shrink_sign=1)
            if target is not None:
                fits_left = previous_end is None or target - previous_end > gap_tolerance
                if fits_left and target <= first_seed:
                    start = target

        end = chunk.end
        if end not in ends:
            target = _nearest(end, ends, max_shift, shrink_sign=-1)
            if target is not None:
                fits_right = next_start is None or next_start - target > gap_tolerance
                if fits_right and target >= last_seed and target >= start:
                    end = target

        if (start, end) != chunk.span:
            adjusted.append(CandidateChunk(
                start=start,
                end=end,
                seed_indices=chunk.seed_indices,
                aggregate_score=score_span((start, end), chunk.seed_indices, profile, decay),
            ))
        else:
            adjusted.append(chunk)

    return ChunkSet(doc_id=chunks.doc_id, query_id=chunks.query_id, chunks=adjusted, threshold=chunks.threshold)


def build_chunk_set(
    doc: Document,
    profile: SimilarityProfile,
    config: QascConfig,
    query_id: str = "",
) -> ChunkSet:
    """
    Шаги 3–8 алгоритма по готовому профилю сходства

    Args:
        doc: Документ
        profile: Профиль сходства документа с запросом
        config: Гиперпараметры
        query_id: Идентификатор запроса

    Returns:
        ChunkSet: Итоговые чанки с оценками
    """
    n = doc.n
    if profile.n != n:
        raise DataValidationError(f"длина профиля {profile.n} не равна числу предложений {n}")

    if config.seed_strategy == SeedStrategy.TOP_K:
        seed_set = select_seeds_topk(profile, min(config.seed_top_k, n))
    else:
        seed_set = select_seeds(profile, config.seed_percentile)
    tau = seed_set.threshold

    adaptive = config.window_mode == WindowMode.ADAPTIVE
    tau_boundary = percentile(profile.scores, config.boundary_percentile) if adaptive else None

    windows: Dict[Span, List[int]] = {}
    for seed in seed_set.indices:
        if adaptive:
            span = expand_window_adaptive(seed, profile, tau_boundary)
        else:
            span = expand_window_fixed(seed, config.window_radius, n)
        windows.setdefault(span, []).append(seed)

    candidates = []
    for span, seeds in sorted(windows.items()):
        radii = (seeds[0] - span[0], span[1] - seeds[0]) if adaptive and len(seeds) == 1 else None
        candidates.append(CandidateChunk(
            start=span[0],
            end=span[1],
            seed_indices=tuple(seeds),
            aggregate_score=score_span(span, seeds, profile, config.decay),
            adaptive_radii=radii,
        ))

    retained = candidates
    if config.enable_filtering:
        retained = filter_candidates(candidates, tau, config.chunk_threshold_factor)

    chunk_set = merge_chunks(retained, config.gap_tolerance, profile, config.decay, doc.id, query_id)
    chunk_set.threshold = tau
    if config.enable_boundary_adjustment and chunk_set.chunks:
        chunk_set = adjust_boundaries(
            chunk_set,
            doc,
            config.max_boundary_shift,
            profile,
            config.decay,
            gap_tolerance=config.gap_tolerance,
        )

    logger.debug(
        f"🧩 {doc.id}/{query_id}: τ={tau:.4f}, опорных {len(seed_set.seeds)}, "
        f"кандидатов {len(candidates)}, после фильтра {len(retained)}, чанков {len(chunk_set.chunks)}"
    )
    return chunk_set


async def compute_profile(
    doc: Document,
    query_text: str,
    provider: EmbeddingProvider,
    query_id: str = "",
) -> SimilarityProfile:
    """Эмбеддинги предложений и запроса (шаг 1) и профиль сходства (шаг 2)"""
    if doc.n == 0:
        raise EmptyDocumentError(f"документ {doc.id} не содержит предложений")
    vectors = await embed_batch(provider, [s.text for s in doc.sentences] + [query_text])
    return similarity_profile(vectors[:-1], vectors[-1], doc_id=doc.id, query_id=query_id)


async def run_qasc(
    doc: Document,
    query_text: str,
    provider: EmbeddingProvider,
    config: Optional[QascConfig] = None,
    query_id: str = "",
) -> ChunkSet:
    """
    Полный пайплайн QASC для пары (документ, запрос)

    Args:
        doc: Документ, минимум одно предложение
        query_text: Текст запроса
        provider: Провайдер эмбеддингов
        config: Гиперпараметры (по умолчанию значения из constants)
        query_id: Идентификатор запроса

    Returns:
        ChunkSet: Чанки; пустой набор, если все кандидаты отфильтрованы
    """
    config = config or QascConfig()
    profile = await compute_profile(doc, query_text, provider, query_id)
    return build_chunk_set(doc, profile, config, query_id)


def compose_summary(chunks: ChunkSet, doc: Document) -> str:
    """
    Склеивает чанки в порядке документа; между несмежными вставляется " [...] "

    Args:
        chunks: Набор чанков
        doc: Документ

    Returns:
        str: Сводка (пустая строка для пустого набора)
    """
    parts: List[str] = []
    previous_end: Optional[int] = None
    for chunk in sorted(chunks.chunks, key=lambda c: c.start):
        text = doc.span_text(chunk.start, chunk.end)
        if previous_end is None:
            parts.append(text)
        elif chunk.start - previous_end > 1:
            parts.append(OMISSION_MARKER + text)
        else:
            parts.append(" " + text)
        previous_end = chunk.end
    return "".join(parts)


def to_text_chunks(chunk_set: ChunkSet, doc: Document, mode: str = OutputMode.CHUNK_SET) -> List[TextChunk]:
    """
    Представляет результат QASC как извлекаемые единицы

    Args:
        chunk_set: Набор чанков
        doc: Документ
        mode: chunk_set (по чанку на единицу) или composed_summary (одна сводка)

    Returns:
        List[TextChunk]: Единицы (пустой набор в режиме сводки даёт пустой список)
    """
    if mode == OutputMode.COMPOSED_SUMMARY:
        if not chunk_set.chunks:
            return []
        seeds = sorted({r for c in chunk_set.chunks for r in c.seed_indices})
        return [TextChunk(
            doc_id=doc.id,
            query_id=chunk_set.query_id,
            chunk_index=0,
            start_sentence=chunk_set.chunks[0].start,
            end_sentence=chunk_set.chunks[-1].end,
            text=compose_summary(chunk_set, doc),
            score=max(c.aggregate_score for c in chunk_set.chunks),
            seeds=seeds,
            strategy="qasc",
            mode=OutputMode.COMPOSED_SUMMARY.value,
            token_count=sum(doc.span_tokens(c.start, c.end) for c in chunk_set.chunks),
            segments=chunk_set.spans,
        )]

    return [
        TextChunk(
            doc_id=doc.id,
            query_id=chunk_set.query_id,
            chunk_index=i,
            start_sentence=c.start,
            end_sentence=c.end,
            text=doc.span_text(c.start, c.end),
            score=c.aggregate_score,
            seeds=list(c.seed_indices),
            strategy="qasc",
            mode=OutputMode.CHUNK_SET.value,
            token_count=doc.span_tokens(c.start, c.end),
        )
        for i, c in enumerate(chunk_set.chunks)
    ]
