"""
Подкоманды CLI.

Библиотечный код только бросает исключения; здесь они логируются
и превращаются в коды выхода.
"""
import json
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

from pydantic import ValidationError

from chunking.chunkers import Chunker, build_chunker
from chunking.models import Document, TextChunk
from cli.parser import parse_args
from cli.run_config import Command, ProviderKind, RunConfig, echo_run_config, resolve_run_config
from embedding.cache import CachedEmbeddingProvider, EmbeddingCache
from embedding.providers import EmbeddingProvider, HashingEmbeddingProvider, RemoteEmbeddingProvider, embed_batch
from evaluation.complexity import corpus_complexity
from evaluation.corpus import filter_documents, load_corpus, load_gold, load_queries, validate_gold
from evaluation.models import GoldAnnotation, QueryRecord
from evaluation.runner import EvaluationRunner, build_summary, query_tiers, write_reports, write_text
from evaluation.sweep import sweep_hyperparameters
from utils.concurrency import ConcurrencyLimiter
from utils.errors import EXIT_OK, EXIT_USAGE, CorpusIOError, DataValidationError, QascError, UsageError
from utils.logger import setup_logging

logger = logging.getLogger(__name__)

CHUNKS_FILE = "chunks.jsonl"
RESOLVED_CONFIG_FILE = "resolved_config.json"


def create_provider(config: RunConfig) -> EmbeddingProvider:
    """
    Провайдер эмбеддингов по конфигурации

    Args:
        config: Конфигурация запуска

    Returns:
        EmbeddingProvider: Тестовый или удалённый провайдер, при заданном cache_path обёрнутый кэшем
    """
    if config.provider == ProviderKind.REMOTE:
        provider: EmbeddingProvider = RemoteEmbeddingProvider(config.provider_url, dim=config.embedding_dim)
    else:
        provider = HashingEmbeddingProvider(dim=config.embedding_dim, seed=config.embedding_seed)
    if config.cache_path:
        provider = CachedEmbeddingProvider(provider, EmbeddingCache(config.cache_path))
    logger.info(f"🔌 Провайдер эмбеддингов: {provider.name}" + (f", кэш {config.cache_path}" if config.cache_path else ""))
    return provider


def _require(value: Optional[str], flag: str, command: str) -> str:
    if not value:
        raise UsageError(f"{command}: не задан обязательный флаг {flag}")
    return value


def _prepare_output_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise CorpusIOError(path, e.strerror or str(e))


async def _echo_config(config: RunConfig) -> None:
    _prepare_output_dir(config.output_dir)
    await write_text(os.path.join(config.output_dir, RESOLVED_CONFIG_FILE), echo_run_config(config))


async def _load_inputs(config: RunConfig) -> Tuple[List[Document], List[QueryRecord], List[GoldAnnotation]]:
    """Корпус, запросы и проверенная разметка; разметка отфильтрованных документов отбрасывается"""
    command = config.command
    documents = await load_corpus(_require(config.corpus, "--corpus", command))
    queries = await load_queries(_require(config.queries, "--queries", command))
    gold = await load_gold(_require(config.gold, "--gold", command))
    validate_gold(gold, documents, queries)

    kept = filter_documents(documents, config.min_sentences)
    kept_ids = {d.id for d in kept}
    gold = [g for g in gold if g.doc_id in kept_ids]
    if config.folds > len(queries):
        raise UsageError(f"--folds {config.folds} больше числа запросов ({len(queries)})")
    return kept, queries, gold


def sort_chunks(chunks: Sequence[TextChunk]) -> List[TextChunk]:
    """Порядок записи: doc_id, query_id, chunk_index"""
    return sorted(chunks, key=lambda c: (c.doc_id, c.query_id or "", c.chunk_index))


async def cmd_chunk(config: RunConfig, provider: EmbeddingProvider) -> int:
    """Записи чанков для каждой пары (документ, запрос) или каждого документа"""
    chunker = build_chunker(config.strategy, provider, config.qasc, config.baseline)
    await chunker.prepare()
    if chunker.query_dependent and not config.queries:
        raise UsageError(f"стратегия {config.strategy} выполняется во время запроса: нужен --queries")

    documents = filter_documents(
        await load_corpus(_require(config.corpus, "--corpus", config.command)), config.min_sentences
    )
    queries = await load_queries(config.queries) if chunker.query_dependent else []

    limiter = ConcurrencyLimiter(config.parallelism)
    if chunker.query_dependent:
        jobs = [
            (lambda doc=doc, query=query: chunker.chunk(doc, query.text, query.id))
            for doc in documents if doc.n
            for query in queries
        ]
    else:
        jobs = [(lambda doc=doc: chunker.chunk(doc)) for doc in documents]
    logger.info(f"🚀 Чанкинг {chunker.label}: {len(jobs)} заданий, параллельно до {config.parallelism}")

    chunks = sort_chunks([c for batch in await limiter.map(f"chunk:{chunker.label}", jobs) for c in batch])
    await _echo_config(config)
    path = os.path.join(config.output_dir, CHUNKS_FILE)
    await write_text(path, "".join(json.dumps(c.to_record(), ensure_ascii=False) + "\n" for c in chunks))
    logger.info(f"✅ {len(chunks)} чанков записано в {path}")
    return EXIT_OK


async def cmd_eval(config: RunConfig, provider: EmbeddingProvider) -> int:
    """Сравнение стратегий: CSV-отчёт и JSON-сводка"""
    documents, queries, gold = await _load_inputs(config)
    chunkers: List[Chunker] = [
        build_chunker(spec, provider, config.qasc, config.baseline) for spec in config.strategies
    ]

    runner = EvaluationRunner(
        documents,
        queries,
        gold,
        provider,
        retrieval_config=config.retrieval,
        parallelism=config.parallelism,
        timing=config.timing,
    )
    results = await runner.run(chunkers)

    tiers = query_tiers(gold, await corpus_complexity(documents, provider)) if config.complexity else None
    summary = build_summary(results, config.retrieval, tiers, config.folds, config.fold_seed)

    await _echo_config(config)
    await write_reports(results, summary, config.output_dir)
    for strategy, row in summary["per_strategy"].items():
        logger.info(f"📊 {strategy}: P={row['precision']:.4f} R={row['recall']:.4f} F1={row['f1']:.4f}")
    return EXIT_OK


async def cmd_sweep(config: RunConfig, provider: EmbeddingProvider) -> int:
    """Перебор гиперпараметров QASC: sweep.csv и sweep_summary.csv"""
    documents, queries, gold = await _load_inputs(config)
    rows, summary = await sweep_hyperparameters(
        documents,
        queries,
        gold,
        config.grid,
        provider,
        base_config=config.qasc,
        retrieval_config=config.retrieval,
        mode=config.sweep_mode,
    )
    await _echo_config(config)
    await write_text(os.path.join(config.output_dir, "sweep.csv"), rows.to_csv(index=False, float_format="%.6f"))
    await write_text(
        os.path.join(config.output_dir, "sweep_summary.csv"), summary.to_csv(index=False, float_format="%.6f")
    )
    logger.info(f"✅ Перебор записан в {config.output_dir}")
    return EXIT_OK


async def cmd_cache_warm(config: RunConfig, provider: EmbeddingProvider) -> int:
    """Заранее считает эмбеддинги всех предложений корпуса (и запросов, если заданы)"""
    _require(config.cache_path, "--cache-path", config.command)
    documents = await load_corpus(_require(config.corpus, "--corpus", config.command))
    texts = [s.text for doc in documents for s in doc.sentences]
    if config.queries:
        texts.extend(q.text for q in await load_queries(config.queries))

    unique = list(dict.fromkeys(texts))
    if unique:
        await embed_batch(provider, unique)
    await _echo_config(config)
    logger.info(f"✅ Кэш прогрет: {len(unique)} уникальных текстов")
    return EXIT_OK


COMMANDS = {
    Command.CHUNK.value: cmd_chunk,
    Command.EVAL.value: cmd_eval,
    Command.SWEEP.value: cmd_sweep,
    Command.CACHE_WARM.value: cmd_cache_warm,
}


def _log_error(error: QascError) -> None:
    logger.error(f"❌ {error}")
    for offender in getattr(error, "offenders", []) or []:
        logger.error(f"   - {offender}")


async def run_command(config: RunConfig) -> int:
    """
    Выполняет подкоманду

    Returns:
        int: Код выхода (0 успех, 1 использование/валидация, 2 ввод-вывод, 3 провайдер)
    """
    provider: Optional[EmbeddingProvider] = None
    try:
        provider = create_provider(config)
        return await COMMANDS[config.command](config, provider)
    except QascError as e:
        _log_error(e)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"❌ Некорректные данные: {e}")
        return EXIT_USAGE
    finally:
        if provider is not None:
            await provider.close()


async def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Разбор аргументов, настройка логирования и запуск подкоманды"""
    try:
        command, flags, config_path, verbose = parse_args(argv)
        setup_logging("DEBUG" if verbose else None)
        config = await resolve_run_config(command, flags, config_path)
    except QascError as e:
        setup_logging()
        _log_error(e)
        return e.exit_code
    return await run_command(config)
