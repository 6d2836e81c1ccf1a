"""
Сложность документов: длина, лексическое разнообразие, структура и число тем.
Документы делятся на три уровня по терцилям составной оценки.
"""
from enum import Enum
from typing import Dict, List, Sequence
import logging

import numpy as np
from pydantic import BaseModel

from chunking.baselines import chunk_semantic
from chunking.models import Document
from embedding.providers import EmbeddingProvider

logger = logging.getLogger(__name__)

FEATURES = ["sentence_count", "type_token_ratio", "paragraph_count", "segment_count"]


class ComplexityTier(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


TIERS = [ComplexityTier.LOW, ComplexityTier.MEDIUM, ComplexityTier.HIGH]


class DocumentComplexity(BaseModel):
    doc_id: str
    sentence_count: int
    type_token_ratio: float
    paragraph_count: int
    segment_count: int
    score: float = 0.0
    tier: ComplexityTier = ComplexityTier.LOW

    class Config:
        use_enum_values = True


def document_complexity(doc: Document, segment_count: int) -> DocumentComplexity:
    """
    Признаки сложности одного документа

    Args:
        doc: Документ
        segment_count: Число сегментов семантической стратегии (разнообразие тем)
    """
    tokens = [t.lower() for s in doc.sentences for t in s.text.split()]
    return DocumentComplexity(
        doc_id=doc.id,
        sentence_count=doc.n,
        type_token_ratio=len(set(tokens)) / len(tokens) if tokens else 0.0,
        paragraph_count=len(doc.paragraph_starts),
        segment_count=segment_count,
    )


def assign_tiers(items: Sequence[DocumentComplexity]) -> List[DocumentComplexity]:
    """
    Составная оценка (среднее min-max нормированных признаков) и уровень по терцилям

    Returns:
        List[DocumentComplexity]: Копии с заполненными score и tier, в исходном порядке
    """
    if not items:
        return []

    matrix = np.array([[getattr(item, f) for f in FEATURES] for item in items], dtype=np.float64)
    low, high = matrix.min(axis=0), matrix.max(axis=0)
    spread = np.where(high > low, high - low, 1.0)
    scores = ((matrix - low) / spread).mean(axis=1)

    order = sorted(range(len(items)), key=lambda i: (scores[i], items[i].doc_id))
    tiers: Dict[int, ComplexityTier] = {
        i: TIERS[rank * len(TIERS) // len(items)] for rank, i in enumerate(order)
    }
    return [
        item.copy(update={"score": float(scores[i]), "tier": tiers[i].value})
        for i, item in enumerate(items)
    ]


async def corpus_complexity(documents: Sequence[Document], provider: EmbeddingProvider) -> Dict[str, DocumentComplexity]:
    """Уровни сложности всех документов корпуса"""
    items = []
    for doc in documents:
        segments = await chunk_semantic(doc, provider)
        items.append(document_complexity(doc, len(segments)))
    tiered = assign_tiers(items)
    counts = {t.value: sum(1 for c in tiered if c.tier == t.value) for t in TIERS}
    logger.info(f"📊 Уровни сложности документов: {counts}")
    return {c.doc_id: c for c in tiered}
