from enum import Enum
from typing import Dict, FrozenSet, List

from pydantic import BaseModel, Field, validator

from config.constants import TOP_K
from chunking.models import TextChunk


class QueryType(str, Enum):
    """Типы запросов"""
    FACTOID = "factoid"
    TOPICAL = "topical"
    COMPARATIVE = "comparative"
    MULTI_HOP = "multi_hop"


class RetrievalScope(str, Enum):
    """Пул чанков для поиска"""
    DOCUMENT = "document"  # документы из разметки запроса
    CORPUS = "corpus"      # весь корпус


class CorpusRecord(BaseModel):
    """Строка манифеста корпуса"""
    id: str
    text: str

    class Config:
        extra = "ignore"


class QueryRecord(BaseModel):
    """Строка файла запросов"""
    id: str
    text: str
    type: QueryType = QueryType.FACTOID

    class Config:
        use_enum_values = True
        extra = "ignore"

    @validator('text')
    def text_not_blank(cls, v):
        if not v.strip():
            raise ValueError("пустой текст запроса")
        return v


class GoldAnnotation(BaseModel):
    """Предложения, необходимые для ответа на запрос"""
    query_id: str
    doc_id: str
    relevant_sentences: FrozenSet[int]

    class Config:
        extra = "ignore"

    @validator('relevant_sentences')
    def non_empty_positive(cls, v):
        if not v:
            raise ValueError("relevant_sentences пуст")
        if min(v) < 1:
            raise ValueError("индексы предложений начинаются с 1")
        return v


class RetrievalConfig(BaseModel):
    """Параметры поиска"""
    top_k: int = Field(TOP_K, ge=1)
    scope: RetrievalScope = RetrievalScope.DOCUMENT

    class Config:
        use_enum_values = True
        extra = "forbid"


class RetrievedChunk(BaseModel):
    """Найденный чанк и его скалярное произведение с запросом"""
    chunk: TextChunk
    score: float
    rank: int


class EvalResult(BaseModel):
    """Результат одной пары (стратегия, запрос)"""
    query_id: str
    strategy: str
    query_type: str = QueryType.FACTOID.value
    retrieved: List[RetrievedChunk] = Field(default_factory=list)
    precision: float = Field(0.0, ge=0, le=1)
    recall: float = Field(0.0, ge=0, le=1)
    f1: float = Field(0.0, ge=0, le=1)
    chunk_count: int = 0
    relevant_available: int = 0
    latency_ms: Dict[str, float] = Field(default_factory=dict)

    def to_row(self) -> Dict[str, object]:
        """Строка CSV-отчёта"""
        return {
            "strategy": self.strategy,
            "query_id": self.query_id,
            "query_type": self.query_type,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "chunk_count": self.chunk_count,
            "latency_chunking_ms": self.latency_ms.get("chunking", 0.0),
            "latency_retrieval_ms": self.latency_ms.get("retrieval", 0.0),
        }


class LatencyReport(BaseModel):
    """Сводка латентности по этапам"""
    query_count: int = 0
    per_stage_ms: Dict[str, float] = Field(default_factory=dict)
    total_ms: float = 0.0
    average_per_stage_ms: Dict[str, float] = Field(default_factory=dict)
    average_total_ms: float = 0.0

    @property
    def is_empty(self) -> bool:
        return self.query_count == 0
