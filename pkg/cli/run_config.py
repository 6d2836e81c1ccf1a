"""
Конфигурация запуска.

Приоритет источников: флаг командной строки > файл --config > переменные окружения > значения по умолчанию.
"""
import json
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional
import logging

import aiofiles
from pydantic import BaseModel, Field, ValidationError, validator

from config.constants import ABLATION_RANGES, MIN_SENTENCES, TEST_EMBEDDING_DIM, TEST_EMBEDDING_SEED
from config.settings import settings
from chunking.models import BaselineConfig, QascConfig
from evaluation.models import RetrievalConfig
from evaluation.sweep import ONE_AT_A_TIME, GRID
from utils.errors import ConfigurationError, CorpusIOError

logger = logging.getLogger(__name__)

# Вложенные секции конфигурации
SECTIONS = ("qasc", "baseline", "retrieval")


class Command(str, Enum):
    CHUNK = "chunk"
    EVAL = "eval"
    SWEEP = "sweep"
    CACHE_WARM = "cache-warm"


class ProviderKind(str, Enum):
    TEST = "test"
    REMOTE = "remote"


class SweepMode(str, Enum):
    ONE_AT_A_TIME = ONE_AT_A_TIME
    GRID = GRID


class RunConfig(BaseModel):
    """Полностью разрешённая конфигурация запуска"""
    command: Command

    # Входы и выходы
    corpus: Optional[str] = None
    queries: Optional[str] = None
    gold: Optional[str] = None
    output_dir: str = "qasc_output"

    # Стратегии
    strategy: str = "qasc"
    strategies: List[str] = Field(default_factory=lambda: ["qasc"])
    qasc: QascConfig = Field(default_factory=QascConfig)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)

    # Эмбеддинги
    provider: ProviderKind = ProviderKind.TEST
    provider_url: str = ""
    embedding_dim: int = Field(TEST_EMBEDDING_DIM, ge=1)
    embedding_seed: int = TEST_EMBEDDING_SEED
    cache_path: Optional[str] = None

    # Оценка
    min_sentences: int = Field(MIN_SENTENCES, ge=0)
    parallelism: int = Field(default_factory=lambda: settings.PARALLELISM, ge=1)
    timing: bool = True
    folds: int = Field(1, ge=1)
    fold_seed: int = 0
    complexity: bool = True

    # Перебор
    sweep_mode: SweepMode = SweepMode.ONE_AT_A_TIME
    grid: Dict[str, List[Any]] = Field(default_factory=lambda: {k: list(v) for k, v in ABLATION_RANGES.items()})

    class Config:
        use_enum_values = True
        extra = "forbid"

    @validator('strategies')
    def strategies_not_empty(cls, v):
        v = [s.strip() for s in v if s.strip()]
        if not v:
            raise ValueError("не выбрано ни одной стратегии")
        return v


def _deep_merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if key in SECTIONS and isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def nest_flags(flags: Mapping[str, Any]) -> Dict[str, Any]:
    """Превращает ключи вида qasc__decay во вложенные словари"""
    nested: Dict[str, Any] = {}
    for key, value in flags.items():
        section, sep, field = key.partition("__")
        if sep:
            nested.setdefault(section, {})[field] = value
        else:
            nested[key] = value
    return nested


def environment_overrides() -> Dict[str, Any]:
    """URL провайдера и путь к кэшу из окружения"""
    overrides: Dict[str, Any] = {}
    if settings.PROVIDER_URL:
        overrides["provider_url"] = settings.PROVIDER_URL
    if settings.CACHE_PATH:
        overrides["cache_path"] = settings.CACHE_PATH
    return overrides


async def read_config_file(path: str) -> Dict[str, Any]:
    """Читает JSON-файл конфигурации"""
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            content = await f.read()
    except OSError as e:
        raise CorpusIOError(path, e.strerror or str(e))
    try:
        data = json.loads(content)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: некорректный JSON ({e.msg})")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: ожидался JSON-объект")
    return data


def build_run_config(
    command: str,
    flags: Mapping[str, Any],
    file_values: Optional[Mapping[str, Any]] = None,
    env_values: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Собирает конфигурацию из всех источников

    Args:
        command: Подкоманда
        flags: Явно заданные флаги (ключи секций через "__")
        file_values: Содержимое файла --config
        env_values: Переопределения из окружения

    Returns:
        RunConfig: Проверенная конфигурация
    """
    values: Dict[str, Any] = {}
    values = _deep_merge(values, env_values or {})
    values = _deep_merge(values, file_values or {})
    values = _deep_merge(values, nest_flags(flags))
    values["command"] = command
    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigurationError(f"некорректная конфигурация: {problems}")


async def resolve_run_config(command: str, flags: Mapping[str, Any], config_path: Optional[str] = None) -> RunConfig:
    """Конфигурация с учётом файла и окружения"""
    file_values = await read_config_file(config_path) if config_path else None
    return build_run_config(command, flags, file_values, environment_overrides())


def echo_run_config(config: RunConfig) -> str:
    """Текст resolved_config.json: все параметры, включая значения по умолчанию"""
    return json.dumps(json.loads(config.json()), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
