"""
Базовые стратегии чанкинга, не зависящие от запроса:
фиксированный размер, рекурсивное разбиение, семантические границы.
"""
import re
from typing import List, NamedTuple, Sequence, Tuple
import logging

from config.constants import SEMANTIC_BOUNDARY_PERCENTILE
from chunking.models import Document, Sentence, TextChunk
from chunking.qasc import percentile
from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import cosine_similarity
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Token(NamedTuple):
    """Токен, номер его предложения и смещения в raw_text"""
    text: str
    sentence: int
    start: int
    end: int


_TOKEN_RE = re.compile(r"\S+")


def sentence_tokens(sentence: Sentence) -> List[Token]:
    offset = sentence.char_span[0]
    return [
        Token(m.group(), sentence.index, offset + m.start(), offset + m.end())
        for m in _TOKEN_RE.finditer(sentence.text)
    ]


def token_stream(doc: Document) -> List[Token]:
    """Поток токенов документа с привязкой к предложениям"""
    return [token for s in doc.sentences for token in sentence_tokens(s)]


def _token_chunk(doc: Document, chunk_index: int, tokens: Sequence[Token], strategy: str) -> TextChunk:
    # Текст берётся из исходника, пробелы и переносы абзацев сохраняются
    return TextChunk(
        doc_id=doc.id,
        chunk_index=chunk_index,
        start_sentence=tokens[0].sentence,
        end_sentence=tokens[-1].sentence,
        text=doc.raw_text[tokens[0].start:tokens[-1].end],
        strategy=strategy,
        token_count=len(tokens),
    )


def chunk_fixed(doc: Document, size_tokens: int) -> List[TextChunk]:
    """
    Режет поток токенов каждые size_tokens токенов, не глядя на границы предложений

    Args:
        doc: Документ
        size_tokens: Размер чанка в токенах

    Returns:
        List[TextChunk]: Чанки; последний содержит остаток
    """
    if size_tokens < 1:
        raise ConfigurationError("size_tokens должен быть >= 1")
    tokens = token_stream(doc)
    strategy = f"fixed:{size_tokens}"
    return [
        _token_chunk(doc, i, tokens[start:start + size_tokens], strategy)
        for i, start in enumerate(range(0, len(tokens), size_tokens))
    ]


def _paragraph_ranges(doc: Document) -> List[Tuple[int, int]]:
    """Отрезки предложений [start, end] каждого абзаца"""
    starts = sorted(doc.paragraph_starts)
    return [
        (start, (starts[i + 1] - 1) if i + 1 < len(starts) else doc.n)
        for i, start in enumerate(starts)
    ]


def chunk_recursive(doc: Document, target: int, overlap: int) -> List[TextChunk]:
    """
    Рекурсивное разбиение по иерархии разделителей: абзацы, предложения, слова

    Args:
        doc: Документ
        target: Максимальный размер куска в токенах (без перекрытия)
        overlap: Сколько хвостовых токенов предыдущего куска добавить в начало следующего

    Returns:
        List[TextChunk]: Чанки с перекрытием
    """
    if not 0 <= overlap < target:
        raise ConfigurationError("нужно 0 <= overlap < target")

    pieces: List[List[Token]] = []
    for start, end in _paragraph_ranges(doc):
        paragraph = [t for s in doc.sentences[start - 1:end] for t in sentence_tokens(s)]
        if len(paragraph) <= target:
            pieces.append(paragraph)
            continue

        # Абзац слишком велик: режем по предложениям, длинные предложения по словам
        units: List[List[Token]] = []
        for sentence in doc.sentences[start - 1:end]:
            words = sentence_tokens(sentence)
            if len(words) <= target:
                units.append(words)
            else:
                units.extend(words[i:i + target] for i in range(0, len(words), target))

        current: List[Token] = []
        for unit in units:
            if current and len(current) + len(unit) > target:
                pieces.append(current)
                current = []
            current = current + unit
        if current:
            pieces.append(current)

    strategy = f"recursive:{target}:{overlap}"
    chunks = []
    for i, piece in enumerate(pieces):
        prefix = pieces[i - 1][-overlap:] if i > 0 and overlap > 0 else []
        chunks.append(_token_chunk(doc, i, prefix + piece, strategy))
    return chunks


def semantic_boundaries(adjacent_similarities: Sequence[float], boundary_percentile: float) -> List[int]:
    """
    Индексы предложений, после которых ставится граница (d_i < t)

    Args:
        adjacent_similarities: d_1..d_{n-1}, сходство соседних предложений
        boundary_percentile: Перцентиль порога t

    Returns:
        List[int]: Индексы i (с 1), где d_i строго меньше t
    """
    if not adjacent_similarities:
        return []
    threshold = percentile(adjacent_similarities, boundary_percentile)
    return [i for i, value in enumerate(adjacent_similarities, start=1) if value < threshold]


def segments_from_boundaries(n: int, boundaries: Sequence[int]) -> List[Tuple[int, int]]:
    """Максимальные отрезки [start, end] между границами"""
    segments = []
    start = 1
    for boundary in boundaries:
        segments.append((start, boundary))
        start = boundary + 1
    if n >= start:
        segments.append((start, n))
    return segments


async def chunk_semantic(
    doc: Document,
    provider: EmbeddingProvider,
    boundary_percentile: float = SEMANTIC_BOUNDARY_PERCENTILE,
) -> List[TextChunk]:
    """
    Границы там, где сходство соседних предложений падает ниже перцентиля

    Args:
        doc: Документ
        provider: Провайдер эмбеддингов
        boundary_percentile: Перцентиль распределения сходств соседних предложений

    Returns:
        List[TextChunk]: Непересекающиеся чанки, покрывающие документ
    """
    if doc.n == 0:
        return []

    boundaries: List[int] = []
    if doc.n > 1:
        vectors = await embed_batch(provider, [s.text for s in doc.sentences])
        similarities = [cosine_similarity(vectors[i], vectors[i + 1]) for i in range(doc.n - 1)]
        boundaries = semantic_boundaries(similarities, boundary_percentile)

    strategy = f"semantic:{boundary_percentile:g}"
    return [
        TextChunk(
            doc_id=doc.id,
            chunk_index=i,
            start_sentence=start,
            end_sentence=end,
            text=doc.span_text(start, end),
            strategy=strategy,
            token_count=doc.span_tokens(start, end),
        )
        for i, (start, end) in enumerate(segments_from_boundaries(doc.n, boundaries))
    ]
