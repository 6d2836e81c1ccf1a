"""Настройка логирования процесса."""
import logging
from typing import Optional

from config.settings import settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: Optional[str] = None) -> None:
    """
    Настраивает корневой логгер.

    Args:
        level: Уровень логирования (по умолчанию из settings.LOG_LEVEL)
    """
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
    )
