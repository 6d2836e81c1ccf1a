"""
Провайдеры эмбеддингов.

Контракт: name, dim, deterministic, serialized и корутина _embed(texts).
Проверки пред- и постусловий выполняет embed_batch, а не сами провайдеры.
"""
import asyncio
import hashlib
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import List, Optional
import logging

import aiohttp
import numpy as np

from config.constants import TEST_EMBEDDING_DIM, TEST_EMBEDDING_SEED
from config.settings import settings
from embedding.similarity import EmbeddingVector
from utils.concurrency import ConcurrencyLimiter
from utils.errors import ConfigurationError, DataValidationError, ProviderError

logger = logging.getLogger(__name__)


class EmbeddingProvider(ABC):
    """Базовый провайдер эмбеддингов"""
    name: str = "provider"
    dim: int = 0
    deterministic: bool = False
    # True, если провайдер нельзя вызывать конкурентно
    serialized: bool = False

    _limiter: Optional[ConcurrencyLimiter] = None

    @property
    def limiter(self) -> ConcurrencyLimiter:
        if self._limiter is None:
            self._limiter = ConcurrencyLimiter(1 if self.serialized else settings.PARALLELISM)
        return self._limiter

    @abstractmethod
    async def _embed(self, texts: List[str]) -> List[EmbeddingVector]:
        """Эмбеддинги одного батча"""

    async def close(self) -> None:
        """Освобождение ресурсов"""

    async def __aenter__(self):
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()


async def embed_batch(provider: EmbeddingProvider, texts: List[str]) -> List[EmbeddingVector]:
    """
    Эмбеддинги списка текстов с проверкой контракта провайдера

    Args:
        provider: Провайдер эмбеддингов
        texts: Непустой список непустых строк

    Returns:
        List[EmbeddingVector]: По одному вектору float32 на текст, в том же порядке
    """
    if not texts:
        raise DataValidationError("пустой список текстов для эмбеддинга")
    blank = [i for i, text in enumerate(texts) if not text.strip()]
    if blank:
        raise DataValidationError(f"пустые тексты на позициях {blank}")

    batch_size = max(1, settings.EMBED_BATCH_SIZE)
    batches = [texts[i:i + batch_size] for i in range(0, len(texts), batch_size)]

    async def run_batch(batch: List[str]) -> List[EmbeddingVector]:
        vectors = await provider.limiter.run("embed", lambda: provider._embed(batch))
        if len(vectors) != len(batch):
            raise ProviderError(
                f"{provider.name}: получено {len(vectors)} векторов для {len(batch)} текстов",
                batch=batch,
            )
        checked = []
        for vector in vectors:
            array = np.asarray(vector, dtype=np.float32)
            if array.ndim != 1 or array.shape[0] != provider.dim:
                raise ConfigurationError(
                    f"{provider.name}: размерность {array.shape} вместо ({provider.dim},)"
                )
            if not np.all(np.isfinite(array)):
                raise ProviderError(f"{provider.name}: нечисловые компоненты вектора", batch=batch)
            checked.append(array)
        return checked

    results = await asyncio.gather(*(run_batch(batch) for batch in batches))
    return [vector for batch_vectors in results for vector in batch_vectors]


@lru_cache(maxsize=65536)
def _trigram_bucket(trigram: str, dim: int, seed: int) -> int:
    digest = hashlib.blake2b(
        trigram.encode("utf-8"),
        digest_size=8,
        key=seed.to_bytes(8, "little", signed=True),
    ).digest()
    return int.from_bytes(digest, "little") % dim


def deterministic_test_embed(text: str, dim: int = TEST_EMBEDDING_DIM, seed: int = TEST_EMBEDDING_SEED) -> EmbeddingVector:
    """
    Детерминированный эмбеддинг: хэширование символьных триграмм в dim корзин

    Args:
        text: Текст
        dim: Размерность вектора
        seed: Ключ хэш-функции

    Returns:
        EmbeddingVector: Вектор единичной нормы (float32)
    """
    if dim <= 0:
        raise ConfigurationError("dim должен быть > 0")

    padded = f" {text.lower()} "
    trigrams = [padded[i:i + 3] for i in range(len(padded) - 2)] or [padded]

    counts = np.zeros(dim, dtype=np.float64)
    for trigram in trigrams:
        counts[_trigram_bucket(trigram, dim, seed)] += 1.0
    return (counts / np.linalg.norm(counts)).astype(np.float32)


class HashingEmbeddingProvider(EmbeddingProvider):
    """Воспроизводимый провайдер без сети и весов модели"""
    deterministic = True

    def __init__(self, dim: int = TEST_EMBEDDING_DIM, seed: int = TEST_EMBEDDING_SEED):
        if dim <= 0:
            raise ConfigurationError("dim должен быть > 0")
        self.dim = dim
        self.seed = seed
        self.name = f"hashing-trigram-{dim}-{seed}"

    async def _embed(self, texts: List[str]) -> List[EmbeddingVector]:
        return [deterministic_test_embed(text, self.dim, self.seed) for text in texts]


class RemoteEmbeddingProvider(EmbeddingProvider):
    """
    HTTP-провайдер: POST {url}/embed {"texts": [...]} -> {"vectors": [[...]], "dim": d}
    """

    def __init__(
        self,
        url: str,
        dim: int = TEST_EMBEDDING_DIM,
        timeout: Optional[float] = None,
        max_retries: Optional[int] = None,
        retry_delay: Optional[float] = None,
    ):
        if not url:
            raise ConfigurationError("не задан URL удалённого провайдера (QASC_PROVIDER_URL или --provider-url)")
        self.url = url.rstrip("/")
        self.dim = dim
        self.name = f"remote:{self.url}"
        self.timeout = timeout if timeout is not None else settings.PROVIDER_TIMEOUT
        self.max_retries = max_retries if max_retries is not None else settings.PROVIDER_MAX_RETRIES
        self.retry_delay = retry_delay if retry_delay is not None else settings.PROVIDER_RETRY_DELAY
        self._session: Optional[aiohttp.ClientSession] = None

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None or self._session.closed:
            self._session = aiohttp.ClientSession(timeout=aiohttp.ClientTimeout(total=self.timeout))
        return self._session

    async def close(self) -> None:
        """Явное закрытие HTTP-сессии"""
        try:
            if self._session is not None and not self._session.closed:
                await self._session.close()
        except Exception as e:
            logger.error(f"Ошибка закрытия HTTP-сессии: {e}")
        finally:
            self._session = None

    async def _post(self, texts: List[str]) -> dict:
        session = await self._get_session()
        async with session.post(f"{self.url}/embed", json={"texts": texts}) as response:
            if response.status != 200:
                body = await response.text()
                raise ProviderError(f"{self.name}: HTTP {response.status}: {body[:200]}", batch=texts)
            try:
                return await response.json()
            except (aiohttp.ContentTypeError, ValueError) as e:
                raise ProviderError(f"{self.name}: некорректный JSON: {e}", batch=texts)

    async def _embed(self, texts: List[str]) -> List[EmbeddingVector]:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                payload = await self._post(texts)
                break
            except (ProviderError, aiohttp.ClientError, asyncio.TimeoutError) as e:
                last_error = e
                if attempt < self.max_retries:
                    logger.warning(f"⚠️ {self.name}: попытка {attempt + 1} не удалась ({e}), повтор")
                    await asyncio.sleep(self.retry_delay * (attempt + 1))
        else:
            raise ProviderError(f"{self.name}: батч не обработан: {last_error}", batch=texts)

        if not isinstance(payload, dict) or "vectors" not in payload:
            raise ProviderError(f"{self.name}: в ответе нет поля vectors", batch=texts)
        declared_dim = payload.get("dim")
        if declared_dim is not None and declared_dim != self.dim:
            raise ConfigurationError(f"{self.name}: сервер вернул dim={declared_dim}, ожидается {self.dim}")
        try:
            return [np.asarray(vector, dtype=np.float32) for vector in payload["vectors"]]
        except (TypeError, ValueError) as e:
            raise ProviderError(f"{self.name}: некорректные векторы: {e}", batch=texts)
