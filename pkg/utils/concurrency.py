import asyncio
import time
from typing import Awaitable, Callable, Dict, Iterable, List, TypeVar
import logging

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ConcurrencyLimiter:
    def __init__(self, max_concurrent: int = 4):
        if max_concurrent < 1:
            raise ValueError("max_concurrent должен быть >= 1")
        self.max_concurrent = max_concurrent

        # Семафор для ограничения одновременных задач
        self.semaphore = asyncio.Semaphore(max_concurrent)

        # Статистика по операциям
        self.operation_stats: Dict[str, int] = {}
        self.total_seconds: float = 0.0
        self.in_flight: int = 0
        self.peak_in_flight: int = 0

        self.lock = asyncio.Lock()

    async def run(self, operation: str, func: Callable[[], Awaitable[T]]) -> T:
        """
        Выполняет корутину, не превышая лимит одновременных задач

        Args:
            operation: Имя операции для статистики
            func: Фабрика корутины

        Returns:
            Результат корутины
        """
        async with self.semaphore:
            async with self.lock:
                self.in_flight += 1
                self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
                self.operation_stats[operation] = self.operation_stats.get(operation, 0) + 1
            started = time.perf_counter()
            try:
                return await func()
            finally:
                elapsed = time.perf_counter() - started
                async with self.lock:
                    self.in_flight -= 1
                    self.total_seconds += elapsed

    async def map(self, operation: str, funcs: Iterable[Callable[[], Awaitable[T]]]) -> List[T]:
        """Запускает все задачи через лимитер; порядок результатов совпадает с порядком входа"""
        return list(await asyncio.gather(*(self.run(operation, f) for f in funcs)))

    def get_stats(self) -> Dict:
        """Получение статистики использования"""
        return {
            "max_concurrent": self.max_concurrent,
            "peak_in_flight": self.peak_in_flight,
            "total_seconds": round(self.total_seconds, 6),
            "operation_stats": dict(self.operation_stats),
        }
