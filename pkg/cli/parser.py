"""Разбор аргументов командной строки."""
import argparse
import json
from typing import Any, Dict, List, Optional, Sequence, Tuple

from chunking.models import OutputMode, SeedStrategy, WindowMode
from cli.run_config import Command, ProviderKind, SweepMode
from evaluation.models import RetrievalScope
from utils.errors import UsageError

# Служебные ключи, не входящие в RunConfig
_META_KEYS = ("command", "config", "verbose")


class QascArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора превращаются в UsageError (код выхода 1)"""

    def error(self, message: str):
        raise UsageError(message)


def _strategy_list(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def _grid_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_grid(entries: Sequence[str]) -> Dict[str, List[Any]]:
    """
    Разбирает --grid axis=v1,v2 (флаг можно повторять)

    Returns:
        Dict[str, List[Any]]: Ось -> значения (числа и true/false приводятся к типам JSON)
    """
    grid: Dict[str, List[Any]] = {}
    for entry in entries:
        axis, sep, values = entry.partition("=")
        if not sep or not axis.strip():
            raise UsageError(f"--grid: ожидается axis=v1,v2, получено {entry!r}")
        grid[axis.strip()] = [_grid_value(v.strip()) for v in values.split(",") if v.strip()]
    return grid


def _add_common(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=None, help="JSON-файл конфигурации")
    parser.add_argument("--verbose", action="store_true", help="Подробный лог (DEBUG)")
    parser.add_argument("--corpus", default=s, help="NDJSON корпуса {id, text}")
    parser.add_argument("--queries", default=s, help="NDJSON запросов {id, text, type}")
    parser.add_argument("--output-dir", dest="output_dir", default=s)
    parser.add_argument("--provider", choices=[p.value for p in ProviderKind], default=s)
    parser.add_argument("--provider-url", dest="provider_url", default=s)
    parser.add_argument("--embedding-dim", dest="embedding_dim", type=int, default=s)
    parser.add_argument("--embedding-seed", dest="embedding_seed", type=int, default=s)
    parser.add_argument("--cache-path", dest="cache_path", default=s)
    parser.add_argument("--min-sentences", dest="min_sentences", type=int, default=s)
    parser.add_argument("--parallelism", type=int, default=s)


def _add_qasc(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    group = parser.add_argument_group("QASC")
    group.add_argument("--seed-percentile", dest="qasc__seed_percentile", type=float, default=s)
    group.add_argument("--seed-strategy", dest="qasc__seed_strategy", choices=[v.value for v in SeedStrategy], default=s)
    group.add_argument("--seed-top-k", dest="qasc__seed_top_k", type=int, default=s)
    group.add_argument("--window-mode", dest="qasc__window_mode", choices=[v.value for v in WindowMode], default=s)
    group.add_argument("--window-radius", dest="qasc__window_radius", type=int, default=s)
    group.add_argument("--boundary-percentile", dest="qasc__boundary_percentile", type=float, default=s)
    group.add_argument("--decay", dest="qasc__decay", type=float, default=s)
    group.add_argument("--gap-tolerance", dest="qasc__gap_tolerance", type=int, default=s)
    group.add_argument("--chunk-threshold-factor", dest="qasc__chunk_threshold_factor", type=float, default=s)
    group.add_argument("--mode", dest="qasc__output_mode", choices=[v.value for v in OutputMode], default=s)
    group.add_argument("--max-boundary-shift", dest="qasc__max_boundary_shift", type=int, default=s)
    group.add_argument("--no-filtering", dest="qasc__enable_filtering", action="store_false", default=s)
    group.add_argument("--no-boundary-adjustment", dest="qasc__enable_boundary_adjustment", action="store_false", default=s)


def _add_baseline(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    group = parser.add_argument_group("Базовые стратегии")
    group.add_argument("--fixed-size", dest="baseline__fixed_size_tokens", type=int, default=s)
    group.add_argument("--recursive-target", dest="baseline__recursive_target_tokens", type=int, default=s)
    group.add_argument("--recursive-overlap", dest="baseline__recursive_overlap_tokens", type=int, default=s)
    group.add_argument("--semantic-percentile", dest="baseline__semantic_boundary_percentile", type=float, default=s)


def _add_evaluation(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    parser.add_argument("--gold", default=s, help="NDJSON разметки {query_id, doc_id, relevant_sentences}")
    parser.add_argument("--top-k", dest="retrieval__top_k", type=int, default=s)
    parser.add_argument("--scope", dest="retrieval__scope", choices=[v.value for v in RetrievalScope], default=s)
    parser.add_argument("--timing", choices=["on", "off"], default=s)
    parser.add_argument("--folds", type=int, default=s)
    parser.add_argument("--fold-seed", dest="fold_seed", type=int, default=s)
    parser.add_argument("--no-complexity", dest="complexity", action="store_false", default=s)


def build_parser() -> argparse.ArgumentParser:
    parser = QascArgumentParser(prog="qasc", description="Query-adaptive semantic chunking")
    subparsers = parser.add_subparsers(dest="command", parser_class=QascArgumentParser)
    subparsers.required = True

    chunk = subparsers.add_parser(Command.CHUNK.value, help="Нарезать корпус на чанки")
    _add_common(chunk)
    _add_qasc(chunk)
    _add_baseline(chunk)
    chunk.add_argument("--strategy", default=argparse.SUPPRESS,
                       help="qasc | fixed[:N] | recursive[:T[:O]] | semantic[:P] | external:<path>")

    evaluate = subparsers.add_parser(Command.EVAL.value, help="Сравнить стратегии")
    _add_common(evaluate)
    _add_qasc(evaluate)
    _add_baseline(evaluate)
    _add_evaluation(evaluate)
    evaluate.add_argument("--strategies", type=_strategy_list, default=argparse.SUPPRESS,
                          help="Список через запятую, например qasc,fixed:500,semantic")

    sweep = subparsers.add_parser(Command.SWEEP.value, help="Перебор гиперпараметров QASC")
    _add_common(sweep)
    _add_qasc(sweep)
    _add_evaluation(sweep)
    sweep.add_argument("--grid", action="append", default=argparse.SUPPRESS,
                       help="axis=v1,v2; повторяется для нескольких осей")
    sweep.add_argument("--sweep-mode", dest="sweep_mode", choices=[m.value for m in SweepMode], default=argparse.SUPPRESS)

    warm = subparsers.add_parser(Command.CACHE_WARM.value, help="Заранее посчитать эмбеддинги предложений")
    _add_common(warm)

    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> Tuple[str, Dict[str, Any], Optional[str], bool]:
    """
    Разбирает аргументы

    Returns:
        Tuple: (подкоманда, явно заданные флаги, путь к --config, verbose)
    """
    namespace = vars(build_parser().parse_args(argv))
    flags = {k: v for k, v in namespace.items() if k not in _META_KEYS}
    if "timing" in flags:
        flags["timing"] = flags["timing"] == "on"
    if "grid" in flags:
        flags["grid"] = parse_grid(flags["grid"])
    return namespace["command"], flags, namespace.get("config"), bool(namespace.get("verbose"))
