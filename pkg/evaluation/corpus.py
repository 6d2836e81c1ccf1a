"""
Чтение корпуса, запросов и разметки из NDJSON-файлов.

Формат строк:
    корпус:   {"id": ..., "text": ...}
    запросы:  {"id": ..., "text": ..., "type": "factoid|topical|comparative|multi_hop"}
    разметка: {"query_id": ..., "doc_id": ..., "relevant_sentences": [int, ...]}
"""
import json
from typing import Iterable, List, Sequence, Tuple, Type, TypeVar
import logging

import aiofiles
from pydantic import BaseModel, ValidationError

from chunking.models import Document
from chunking.segmenter import segment_document
from evaluation.models import CorpusRecord, GoldAnnotation, QueryRecord
from utils.errors import CorpusIOError, DataValidationError

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


async def read_ndjson(path: str) -> List[Tuple[int, dict]]:
    """
    Читает NDJSON-файл; пустые строки пропускаются

    Args:
        path: Путь к файлу

    Returns:
        List[Tuple[int, dict]]: Пары (номер строки, объект)
    """
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            content = await f.read()
    except OSError as e:
        raise CorpusIOError(path, e.strerror or str(e))

    rows = []
    for number, line in enumerate(content.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataValidationError(f"{path}:{number}: некорректный JSON ({e.msg})")
        if not isinstance(obj, dict):
            raise DataValidationError(f"{path}:{number}: ожидался JSON-объект")
        rows.append((number, obj))
    return rows


async def _read_models(path: str, model: Type[M]) -> List[M]:
    records = []
    for number, obj in await read_ndjson(path):
        try:
            records.append(model.parse_obj(obj))
        except ValidationError as e:
            raise DataValidationError(f"{path}:{number}: {e.errors()[0]['msg']}")
    return records


def _check_unique(ids: Iterable[str], what: str) -> None:
    seen, duplicates = set(), []
    for item_id in ids:
        if item_id in seen:
            duplicates.append(item_id)
        seen.add(item_id)
    if duplicates:
        raise DataValidationError(f"повторяющиеся идентификаторы ({what})", sorted(set(duplicates)))


async def load_corpus(path: str) -> List[Document]:
    """Читает и сегментирует корпус"""
    records = await _read_models(path, CorpusRecord)
    _check_unique((r.id for r in records), "корпус")
    documents = [segment_document(r.id, r.text) for r in records]
    logger.info(f"📚 Корпус {path}: {len(documents)} документов, "
                f"{sum(d.n for d in documents)} предложений")
    return documents


async def load_queries(path: str) -> List[QueryRecord]:
    """Читает запросы"""
    queries = await _read_models(path, QueryRecord)
    _check_unique((q.id for q in queries), "запросы")
    logger.info(f"❓ Запросы {path}: {len(queries)}")
    return queries


async def load_gold(path: str) -> List[GoldAnnotation]:
    """Читает разметку"""
    gold = await _read_models(path, GoldAnnotation)
    _check_unique((f"{g.query_id}/{g.doc_id}" for g in gold), "разметка")
    logger.info(f"🏷️ Разметка {path}: {len(gold)} записей")
    return gold


def validate_gold(
    gold: Sequence[GoldAnnotation],
    documents: Sequence[Document],
    queries: Sequence[QueryRecord],
) -> None:
    """
    Проверяет ссылки разметки до начала работы

    Raises:
        DataValidationError: Со списком всех нарушителей
    """
    docs_by_id = {d.id: d for d in documents}
    query_ids = {q.id for q in queries}
    offenders = []
    for g in gold:
        if g.query_id not in query_ids:
            offenders.append(f"{g.query_id}/{g.doc_id}: неизвестный query_id {g.query_id}")
        doc = docs_by_id.get(g.doc_id)
        if doc is None:
            offenders.append(f"{g.query_id}/{g.doc_id}: неизвестный doc_id {g.doc_id}")
        elif max(g.relevant_sentences) > doc.n:
            offenders.append(
                f"{g.query_id}/{g.doc_id}: предложение {max(g.relevant_sentences)} вне 1..{doc.n}"
            )
    if offenders:
        raise DataValidationError(
            f"разметка ссылается на неизвестные данные ({len(offenders)})", offenders
        )


def filter_documents(documents: Sequence[Document], min_sentences: int) -> List[Document]:
    """Отбрасывает документы короче min_sentences предложений"""
    kept = [d for d in documents if d.n >= min_sentences]
    if len(kept) < len(documents):
        logger.info(f"⚠️ Отброшено {len(documents) - len(kept)} документов короче {min_sentences} предложений")
    return kept

