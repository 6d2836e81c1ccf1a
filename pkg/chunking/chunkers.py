"""
Единый интерфейс стратегий чанкинга.

Стратегия задаётся строкой: qasc, fixed[:size], recursive[:target[:overlap]],
semantic[:percentile], external:<path>. Стратегия external читает готовые записи
чанков (формат файла chunk) и служит точкой расширения для внешних чанкеров.
"""
import json
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple
import logging

import aiofiles

from config.constants import (
    FIXED_SIZE_TOKENS,
    RECURSIVE_OVERLAP_TOKENS,
    RECURSIVE_TARGET_TOKENS,
    SEMANTIC_BOUNDARY_PERCENTILE,
)
from chunking.baselines import chunk_fixed, chunk_recursive, chunk_semantic
from chunking.models import BaselineConfig, Document, OutputMode, QascConfig, TextChunk
from chunking.qasc import build_chunk_set, compute_profile, to_text_chunks
from embedding.providers import EmbeddingProvider
from utils.errors import CorpusIOError, DataValidationError, UsageError

logger = logging.getLogger(__name__)


class Chunker(ABC):
    """Стратегия чанкинга"""
    label: str = "chunker"
    query_dependent: bool = False

    async def prepare(self) -> None:
        """Подготовка перед первым вызовом chunk"""

    @abstractmethod
    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        """Чанки документа (стратегии, зависящие от запроса, режут под данный запрос)"""


class QascChunker(Chunker):
    """QASC: чанкинг во время запроса"""
    query_dependent = True

    def __init__(self, provider: EmbeddingProvider, config: Optional[QascConfig] = None):
        self.provider = provider
        self.config = config or QascConfig()
        self.label = "qasc"

    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        if not query_text:
            raise UsageError("стратегии qasc нужен запрос (--queries)")
        if doc.n == 0:
            return []
        profile = await compute_profile(doc, query_text, self.provider, query_id or "")
        chunk_set = build_chunk_set(doc, profile, self.config, query_id or "")
        return to_text_chunks(chunk_set, doc, self.config.output_mode)


class FixedChunker(Chunker):
    def __init__(self, size_tokens: int = FIXED_SIZE_TOKENS):
        self.size_tokens = size_tokens
        self.label = f"fixed:{size_tokens}"

    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        return chunk_fixed(doc, self.size_tokens)


class RecursiveChunker(Chunker):
    def __init__(self, target: int = RECURSIVE_TARGET_TOKENS, overlap: int = RECURSIVE_OVERLAP_TOKENS):
        self.target = target
        self.overlap = overlap
        self.label = f"recursive:{target}:{overlap}"

    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        return chunk_recursive(doc, self.target, self.overlap)


class SemanticChunker(Chunker):
    def __init__(self, provider: EmbeddingProvider, boundary_percentile: float = SEMANTIC_BOUNDARY_PERCENTILE):
        self.provider = provider
        self.boundary_percentile = boundary_percentile
        self.label = f"semantic:{boundary_percentile:g}"

    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        return await chunk_semantic(doc, self.provider, self.boundary_percentile)


class ExternalChunker(Chunker):
    """Готовые чанки из NDJSON-файла записей"""

    def __init__(self, path: str):
        self.path = path
        self.label = f"external:{path}"
        self._by_key: Dict[Tuple[str, Optional[str]], List[TextChunk]] = {}
        self._loaded = False

    async def prepare(self) -> None:
        if not self._loaded:
            await self.load()

    async def load(self) -> None:
        """Читает записи чанков из файла"""
        try:
            async with aiofiles.open(self.path, "r", encoding="utf-8") as f:
                lines = await f.readlines()
        except OSError as e:
            raise CorpusIOError(self.path, str(e))

        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                chunk = TextChunk(
                    doc_id=record["doc_id"],
                    query_id=record.get("query_id"),
                    chunk_index=record["chunk_index"],
                    start_sentence=record["start_sentence"],
                    end_sentence=record["end_sentence"],
                    text=record["text"],
                    score=record.get("score"),
                    strategy=self.label,
                    token_count=len(record["text"].split()),
                )
            except (KeyError, ValueError, TypeError) as e:
                raise DataValidationError(f"{self.path}:{number}: некорректная запись чанка: {e}")
            self._by_key.setdefault((chunk.doc_id, chunk.query_id), []).append(chunk)

        self.query_dependent = any(query_id is not None for _, query_id in self._by_key)
        self._loaded = True
        logger.info(f"📥 {self.path}: загружено {sum(len(v) for v in self._by_key.values())} внешних чанков")

    async def chunk(self, doc: Document, query_text: Optional[str] = None, query_id: Optional[str] = None) -> List[TextChunk]:
        await self.prepare()
        key = (doc.id, query_id if self.query_dependent else None)
        return sorted(self._by_key.get(key, []), key=lambda c: c.chunk_index)


def parse_strategy(spec: str) -> Tuple[str, List[str]]:
    """Разбирает строку стратегии вида name[:arg[:arg]]"""
    name, _, rest = spec.strip().partition(":")
    if name == "external":
        return name, [rest] if rest else []
    return name, [part for part in rest.split(":") if part] if rest else []


def build_chunker(
    spec: str,
    provider: EmbeddingProvider,
    qasc_config: Optional[QascConfig] = None,
    baseline_config: Optional[BaselineConfig] = None,
) -> Chunker:
    """
    Создаёт стратегию по строке

    Args:
        spec: Строка стратегии
        provider: Провайдер эмбеддингов
        qasc_config: Гиперпараметры QASC
        baseline_config: Параметры базовых стратегий по умолчанию

    Returns:
        Chunker: Стратегия
    """
    baseline = baseline_config or BaselineConfig()
    name, args = parse_strategy(spec)
    try:
        if name == "qasc" and not args:
            return QascChunker(provider, qasc_config)
        if name == "fixed" and len(args) <= 1:
            size = int(args[0]) if args else baseline.fixed_size_tokens
            if size < 1:
                raise UsageError(f"fixed: размер должен быть >= 1 ({spec})")
            return FixedChunker(size)
        if name == "recursive" and len(args) <= 2:
            target = int(args[0]) if args else baseline.recursive_target_tokens
            overlap = int(args[1]) if len(args) > 1 else min(baseline.recursive_overlap_tokens, target - 1)
            if not 0 <= overlap < target:
                raise UsageError(f"recursive: нужно 0 <= overlap < target ({spec})")
            return RecursiveChunker(target, overlap)
        if name == "semantic" and len(args) <= 1:
            return SemanticChunker(provider, float(args[0]) if args else baseline.semantic_boundary_percentile)
        if name == "external" and len(args) == 1:
            return ExternalChunker(args[0])
    except ValueError as e:
        raise UsageError(f"некорректные параметры стратегии {spec}: {e}")
    raise UsageError(f"неизвестная стратегия: {spec}")


def output_mode_of(chunker: Chunker) -> Optional[str]:
    """Режим вывода QASC или None для остальных стратегий"""
    if isinstance(chunker, QascChunker):
        return chunker.config.output_mode
    return None


__all__ = [
    "Chunker",
    "QascChunker",
    "FixedChunker",
    "RecursiveChunker",
    "SemanticChunker",
    "ExternalChunker",
    "build_chunker",
    "parse_strategy",
    "output_mode_of",
    "OutputMode",
]
