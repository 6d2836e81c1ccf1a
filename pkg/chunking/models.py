from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

from pydantic import BaseModel, Field, validator

from config.constants import (
    BOUNDARY_PERCENTILE,
    CHUNK_THRESHOLD_FACTOR,
    DECAY,
    FIXED_SIZE_TOKENS,
    GAP_TOLERANCE,
    MAX_BOUNDARY_SHIFT,
    RECURSIVE_OVERLAP_TOKENS,
    RECURSIVE_TARGET_TOKENS,
    SEED_PERCENTILE,
    SEMANTIC_BOUNDARY_PERCENTILE,
    WINDOW_RADIUS,
)


class WindowMode(str, Enum):
    """Режимы контекстного окна"""
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class OutputMode(str, Enum):
    """Режимы вывода"""
    CHUNK_SET = "chunk_set"
    COMPOSED_SUMMARY = "composed_summary"


class SeedStrategy(str, Enum):
    """Способ выбора опорных предложений"""
    PERCENTILE = "percentile"
    TOP_K = "top_k"


class BaselineStrategy(str, Enum):
    """Базовые стратегии, не зависящие от запроса"""
    FIXED = "fixed"
    RECURSIVE = "recursive"
    SEMANTIC = "semantic"


class Sentence(BaseModel):
    """Предложение документа; индексы с 1"""
    index: int = Field(..., ge=1)
    text: str
    char_span: Tuple[int, int]
    token_count: int = Field(..., ge=1)

    class Config:
        frozen = True

    @validator('text')
    def text_not_blank(cls, v):
        if not v.strip():
            raise ValueError("текст предложения пуст")
        return v


class Document(BaseModel):
    """Сегментированный документ"""
    id: str
    raw_text: str
    sentences: List[Sentence] = Field(default_factory=list)
    paragraph_starts: FrozenSet[int] = Field(default_factory=frozenset)

    class Config:
        frozen = True

    @property
    def n(self) -> int:
        return len(self.sentences)

    def span_text(self, start: int, end: int) -> str:
        """Тексты предложений [start, end], склеенные одним пробелом"""
        return " ".join(s.text for s in self.sentences[start - 1:end])

    def span_tokens(self, start: int, end: int) -> int:
        return sum(s.token_count for s in self.sentences[start - 1:end])


class QascConfig(BaseModel):
    """Гиперпараметры QASC"""
    seed_percentile: float = Field(SEED_PERCENTILE, ge=0, le=100)
    seed_strategy: SeedStrategy = SeedStrategy.PERCENTILE
    seed_top_k: Optional[int] = Field(None, ge=1)
    window_mode: WindowMode = WindowMode.FIXED
    window_radius: int = Field(WINDOW_RADIUS, ge=0)
    boundary_percentile: float = Field(BOUNDARY_PERCENTILE, ge=0, le=100)
    decay: float = Field(DECAY, ge=0)
    gap_tolerance: int = Field(GAP_TOLERANCE, ge=0)
    chunk_threshold_factor: float = Field(CHUNK_THRESHOLD_FACTOR, gt=0)
    output_mode: OutputMode = OutputMode.CHUNK_SET
    max_boundary_shift: int = Field(MAX_BOUNDARY_SHIFT, ge=0)
    enable_filtering: bool = True
    enable_boundary_adjustment: bool = True

    class Config:
        use_enum_values = True
        extra = "forbid"
        validate_assignment = True

    @validator('seed_top_k', always=True)
    def top_k_required(cls, v, values):
        if values.get('seed_strategy') == SeedStrategy.TOP_K and v is None:
            raise ValueError("seed_top_k обязателен при seed_strategy=top_k")
        return v


class SeedSet(BaseModel):
    """Опорные предложения и порог τ"""
    threshold: float
    seeds: List[Tuple[int, float]]

    @property
    def indices(self) -> List[int]:
        return [index for index, _ in self.seeds]


class CandidateChunk(BaseModel):
    """Кандидат в чанк: отрезок предложений [start, end] включительно"""
    start: int = Field(..., ge=1)
    end: int = Field(..., ge=1)
    seed_indices: Tuple[int, ...]
    aggregate_score: float = 0.0
    adaptive_radii: Optional[Tuple[int, int]] = None

    @validator('end')
    def end_after_start(cls, v, values):
        if 'start' in values and v < values['start']:
            raise ValueError("end < start")
        return v

    @validator('seed_indices')
    def seeds_inside(cls, v, values):
        if not v:
            raise ValueError("у чанка нет опорных предложений")
        start, end = values.get('start'), values.get('end')
        if start is not None and end is not None and any(r < start or r > end for r in v):
            raise ValueError("опорное предложение вне отрезка")
        return tuple(sorted(set(v)))

    @property
    def span(self) -> Tuple[int, int]:
        return self.start, self.end


class ChunkSet(BaseModel):
    """Итоговый набор чанков документа для запроса"""
    doc_id: str
    query_id: str
    chunks: List[CandidateChunk] = Field(default_factory=list)
    threshold: Optional[float] = None

    @property
    def spans(self) -> List[Tuple[int, int]]:
        return [c.span for c in self.chunks]


class BaselineConfig(BaseModel):
    """Параметры базовых стратегий"""
    strategy: BaselineStrategy = BaselineStrategy.FIXED
    fixed_size_tokens: int = Field(FIXED_SIZE_TOKENS, ge=1)
    recursive_target_tokens: int = Field(RECURSIVE_TARGET_TOKENS, ge=1)
    recursive_overlap_tokens: int = Field(RECURSIVE_OVERLAP_TOKENS, ge=0)
    semantic_boundary_percentile: float = Field(SEMANTIC_BOUNDARY_PERCENTILE, ge=0, le=100)

    class Config:
        use_enum_values = True
        extra = "forbid"

    @validator('recursive_overlap_tokens')
    def overlap_below_target(cls, v, values):
        target = values.get('recursive_target_tokens')
        if target is not None and v >= target:
            raise ValueError("overlap должен быть меньше target")
        return v


class TextChunk(BaseModel):
    """Извлекаемая единица текста, общая для всех стратегий"""
    doc_id: str
    query_id: Optional[str] = None
    chunk_index: int
    start_sentence: int
    end_sentence: int
    text: str
    score: Optional[float] = None
    seeds: List[int] = Field(default_factory=list)
    strategy: str
    mode: Optional[str] = None
    token_count: int = 0
    # Отрезки предложений, реально вошедшие в текст (для сводки с пропусками)
    segments: List[Tuple[int, int]] = Field(default_factory=list)

    def covered_sentences(self) -> Set[int]:
        """Индексы предложений, попавшие в текст единицы"""
        spans = self.segments or [(self.start_sentence, self.end_sentence)]
        return {i for start, end in spans for i in range(start, end + 1)}

    def to_record(self) -> Dict[str, Any]:
        """Запись для файла чанков (одна JSON-строка)"""
        if self.strategy == "qasc":
            return {
                "doc_id": self.doc_id,
                "query_id": self.query_id,
                "chunk_index": self.chunk_index,
                "start_sentence": self.start_sentence,
                "end_sentence": self.end_sentence,
                "text": self.text,
                "score": self.score,
                "seeds": list(self.seeds),
                "mode": self.mode,
            }
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "start_sentence": self.start_sentence,
            "end_sentence": self.end_sentence,
            "text": self.text,
            "token_count": self.token_count,
            "strategy": self.strategy,
        }
