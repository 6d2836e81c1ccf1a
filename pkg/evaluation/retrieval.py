"""
Точный top-k поиск по скалярному произведению L2-нормированных эмбеддингов чанков.
"""
from typing import List, Optional, Sequence
import logging

import numpy as np

from chunking.models import TextChunk
from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import EmbeddingVector
from evaluation.models import RetrievedChunk
from utils.errors import ConfigurationError, DataValidationError

logger = logging.getLogger(__name__)


def l2_normalize(vector: EmbeddingVector) -> np.ndarray:
    """Нормирует вектор (float64); нулевой вектор остаётся нулевым"""
    v = np.asarray(vector, dtype=np.float64)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def ranking_key(chunk: TextChunk, score: float):
    """Порядок выдачи: сходство по убыванию, затем начало чанка, документ, номер чанка"""
    return -score, chunk.start_sentence, chunk.doc_id, chunk.chunk_index


class ChunkIndex:
    """Индекс чанков с полным перебором"""

    def __init__(self):
        self.chunks: List[TextChunk] = []
        self._rows: List[np.ndarray] = []
        self.dim: Optional[int] = None

    def __len__(self) -> int:
        return len(self.chunks)

    def add(self, chunks: Sequence[TextChunk], vectors: Sequence[EmbeddingVector]) -> None:
        """Добавляет чанки с готовыми эмбеддингами"""
        if len(chunks) != len(vectors):
            raise DataValidationError(f"чанков {len(chunks)}, эмбеддингов {len(vectors)}")
        for chunk, vector in zip(chunks, vectors):
            row = l2_normalize(vector)
            if self.dim is None:
                self.dim = row.shape[0]
            elif row.shape[0] != self.dim:
                raise ConfigurationError(f"размерность {row.shape[0]} вместо {self.dim}")
            self.chunks.append(chunk)
            self._rows.append(row)

    async def add_texts(self, chunks: Sequence[TextChunk], provider: EmbeddingProvider) -> None:
        """Эмбеддит полный текст каждого чанка и добавляет в индекс"""
        if not chunks:
            return
        vectors = await embed_batch(provider, [c.text for c in chunks])
        self.add(chunks, vectors)

    def search(self, query_vector: EmbeddingVector, k: int) -> List[RetrievedChunk]:
        """
        Top-k чанков по скалярному произведению с нормированным запросом

        Args:
            query_vector: Эмбеддинг запроса
            k: Число результатов, k >= 1

        Returns:
            List[RetrievedChunk]: Не более k результатов по убыванию сходства
        """
        if k < 1:
            raise ConfigurationError("top_k должен быть >= 1")
        q = l2_normalize(query_vector)
        if self.dim is not None and q.shape[0] != self.dim:
            raise ConfigurationError(f"размерность запроса {q.shape[0]} вместо {self.dim}")

        scored = [(chunk, float(np.dot(row, q))) for chunk, row in zip(self.chunks, self._rows)]
        scored.sort(key=lambda item: ranking_key(*item))
        return [
            RetrievedChunk(chunk=chunk, score=score, rank=rank)
            for rank, (chunk, score) in enumerate(scored[:k], start=1)
        ]


async def index_and_retrieve(
    chunks: Sequence[TextChunk],
    query_vector: EmbeddingVector,
    k: int,
    provider: EmbeddingProvider,
) -> List[RetrievedChunk]:
    """
    Индексирует чанки активным провайдером и возвращает top-k для запроса

    Args:
        chunks: Непустой список чанков
        query_vector: Эмбеддинг запроса
        k: Число результатов
        provider: Провайдер для эмбеддингов чанков

    Returns:
        List[RetrievedChunk]: Ранжированные чанки; все, если их меньше k
    """
    if k < 1:
        raise ConfigurationError("top_k должен быть >= 1")
    if not chunks:
        raise DataValidationError("нет чанков для индексации")
    index = ChunkIndex()
    await index.add_texts(chunks, provider)
    return index.search(query_vector, k)
