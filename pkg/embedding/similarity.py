"""Косинусное сходство и профиль сходства документа с запросом."""
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, validator

from utils.errors import ConfigurationError, DegenerateVectorError

# Векторы хранятся в float32 (как в кэше), арифметика ведётся в float64
EmbeddingVector = np.ndarray

SCORE_TOLERANCE = 1e-9


class SimilarityProfile(BaseModel):
    """Профиль σ: сходство каждого предложения с запросом"""
    doc_id: str = ""
    query_id: str = ""
    scores: List[float]

    @validator('scores')
    def scores_in_range(cls, v):
        for score in v:
            if not (-1 - SCORE_TOLERANCE <= score <= 1 + SCORE_TOLERANCE):
                raise ValueError(f"сходство {score} вне [-1, 1]")
        return v

    @property
    def n(self) -> int:
        return len(self.scores)

    def score(self, index: int) -> float:
        """Сходство предложения по индексу с 1"""
        return self.scores[index - 1]


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """
    Косинусное сходство двух векторов, ограниченное отрезком [-1, 1]

    Args:
        u: Первый вектор
        v: Второй вектор

    Returns:
        float: (u·v) / (‖u‖·‖v‖)
    """
    u64 = np.asarray(u, dtype=np.float64)
    v64 = np.asarray(v, dtype=np.float64)
    if u64.shape != v64.shape:
        raise ConfigurationError(f"размерности не совпадают: {u64.shape} и {v64.shape}")

    norm_u = float(np.linalg.norm(u64))
    norm_v = float(np.linalg.norm(v64))
    if norm_u == 0.0 or norm_v == 0.0:
        raise DegenerateVectorError("вектор нулевой нормы")

    value = float(np.dot(u64, v64)) / (norm_u * norm_v)
    return min(1.0, max(-1.0, value))


def similarity_profile(
    doc_vectors: Sequence[EmbeddingVector],
    query_vector: EmbeddingVector,
    doc_id: str = "",
    query_id: str = "",
) -> SimilarityProfile:
    """
    Строит профиль сходства предложений документа с запросом

    Args:
        doc_vectors: Векторы предложений в порядке документа
        query_vector: Вектор запроса
        doc_id: Идентификатор документа
        query_id: Идентификатор запроса

    Returns:
        SimilarityProfile: Профиль той же длины, что и doc_vectors
    """
    if len(doc_vectors) == 0:
        raise ConfigurationError("пустой список векторов документа")

    matrix = np.asarray(doc_vectors, dtype=np.float64)
    query = np.asarray(query_vector, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != query.shape[0]:
        raise ConfigurationError(
            f"размерность предложений {matrix.shape} не совпадает с запросом {query.shape}"
        )

    query_norm = float(np.linalg.norm(query))
    if query_norm == 0.0:
        raise DegenerateVectorError("вектор запроса нулевой нормы")

    norms = np.linalg.norm(matrix, axis=1)
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise DegenerateVectorError("вектор нулевой нормы", sentence_index=int(zero_rows[0]) + 1)

    scores = np.clip((matrix @ query) / (norms * query_norm), -1.0, 1.0)
    return SimilarityProfile(doc_id=doc_id, query_id=query_id, scores=scores.tolist())
