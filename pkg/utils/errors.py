"""Иерархия исключений пайплайна и коды выхода CLI."""
from typing import List, Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PROVIDER = 3


class QascError(Exception):
    """Базовое исключение пайплайна"""
    exit_code: int = EXIT_USAGE


class ConfigurationError(QascError):
    """Некорректная конфигурация (в т.ч. несовпадение размерности эмбеддингов)"""


class UsageError(QascError):
    """Ошибка использования CLI"""


class DataValidationError(QascError):
    """Некорректные входные данные: корпус, запросы, разметка"""

    def __init__(self, message: str, offenders: Optional[List[str]] = None):
        super().__init__(message)
        self.offenders = offenders or []


class CorpusIOError(QascError):
    """Ошибка чтения или записи файла"""
    exit_code = EXIT_IO

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class ProviderError(QascError):
    """Сбой провайдера эмбеддингов; батч можно повторить"""
    exit_code = EXIT_PROVIDER
    retriable: bool = True

    def __init__(self, message: str, batch: Optional[List[str]] = None):
        super().__init__(message)
        self.batch = list(batch or [])


class DegenerateVectorError(QascError):
    """Вектор нулевой нормы: косинусное сходство не определено"""

    def __init__(self, message: str, sentence_index: Optional[int] = None):
        if sentence_index is not None:
            message = f"{message} (предложение {sentence_index})"
        super().__init__(message)
        self.sentence_index = sentence_index


class EmptyDocumentError(QascError):
    """Документ без предложений"""
