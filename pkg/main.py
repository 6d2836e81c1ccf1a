"""Точка входа: python main.py <chunk|eval|sweep|cache-warm> [флаги]."""
import asyncio
import logging
import sys

from cli.commands import run_cli

logger = logging.getLogger(__name__)


async def main() -> int:
    """Главная функция."""
    try:
        return await run_cli(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("🛑 Получен сигнал завершения")
        return 130


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
