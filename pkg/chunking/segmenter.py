"""
Детерминированная сегментация текста на предложения и абзацы.

Предложение заканчивается на '.', '!' или '?' (с возможными закрывающими
кавычками/скобками), если дальше идёт пробел и заглавная буква или цифра,
либо конец абзаца. Пустая строка всегда завершает предложение и абзац.
"""
import re
from typing import Iterator, List, Tuple
import logging

from config.constants import ABBREVIATIONS
from chunking.models import Document, Sentence

logger = logging.getLogger(__name__)

# Одна или несколько пустых строк
_PARAGRAPH_BREAK = re.compile(r"\n[^\S\n]*\n(?:[^\S\n]*\n)*")
_TERMINATOR = re.compile(r"[.!?]+[\"'”’)\]]*")
_CLOSERS = "\"'”’)]"


def count_tokens(text: str) -> int:
    """
    Количество токенов (максимальных последовательностей непробельных символов)

    Args:
        text: Строка

    Returns:
        int: Число токенов
    """
    return len(text.split())


def _paragraph_blocks(raw_text: str) -> Iterator[Tuple[int, int]]:
    """Границы абзацев [start, end) в исходном тексте"""
    position = 0
    for match in _PARAGRAPH_BREAK.finditer(raw_text):
        yield position, match.start()
        position = match.end()
    yield position, len(raw_text)


def _is_abbreviation(text: str, term_start: int, term_end: int) -> bool:
    """Проверяет, что точка завершает сокращение из списка"""
    token_start = term_start
    while token_start > 0 and not text[token_start - 1].isspace():
        token_start -= 1
    token = text[token_start:term_end].rstrip(_CLOSERS).lower()
    return token in ABBREVIATIONS


def _sentence_spans(raw_text: str, start: int, end: int) -> List[Tuple[int, int]]:
    """Границы предложений внутри абзаца"""
    spans: List[Tuple[int, int]] = []
    block = raw_text[start:end]

    cursor = 0
    while cursor < len(block) and block[cursor].isspace():
        cursor += 1
    if cursor == len(block):
        return spans

    for match in _TERMINATOR.finditer(block):
        term_end = match.end()
        if term_end <= cursor:
            continue
        rest = block[term_end:]
        if not rest.strip():
            # Конец абзаца: закроется ниже
            break
        if not rest[0].isspace():
            continue
        following = rest.lstrip()[0]
        if not (following.isupper() or following.isdigit()):
            continue
        if "." in match.group() and _is_abbreviation(block, match.start(), term_end):
            continue

        spans.append((start + cursor, start + term_end))
        cursor = term_end
        while block[cursor].isspace():
            cursor += 1

    tail_end = len(block.rstrip())
    if tail_end > cursor:
        spans.append((start + cursor, start + tail_end))
    return spans


def segment_document(doc_id: str, raw_text: str) -> Document:
    """
    Разбивает текст документа на предложения

    Args:
        doc_id: Идентификатор документа
        raw_text: Исходный текст (может быть пустым)

    Returns:
        Document: Документ с предложениями (индексы с 1) и началами абзацев
    """
    sentences: List[Sentence] = []
    paragraph_starts = set()

    for block_start, block_end in _paragraph_blocks(raw_text):
        spans = _sentence_spans(raw_text, block_start, block_end)
        if spans:
            paragraph_starts.add(len(sentences) + 1)
        for span_start, span_end in spans:
            text = raw_text[span_start:span_end]
            index = len(sentences) + 1
            sentences.append(Sentence(
                index=index,
                text=text,
                char_span=(span_start, span_end),
                token_count=count_tokens(text),
            ))

    logger.debug(f"📄 {doc_id}: {len(sentences)} предложений, {len(paragraph_starts)} абзацев")
    return Document(
        id=doc_id,
        raw_text=raw_text,
        sentences=sentences,
        paragraph_starts=frozenset(paragraph_starts),
    )
