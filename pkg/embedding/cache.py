"""
Постоянный кэш эмбеддингов с адресацией по содержимому.

Файл только дописывается. Запись:
    magic "QE" | key_len:uint16 | key (UTF-8) | dim:uint32 | dim x float32 | crc32:uint32
Все числа little-endian. Повреждённая запись считается промахом: чтение продолжается
со следующей целой записи, а при открытии файл переписывается без повреждённых участков,
после чего пересчитанное значение дописывается.
"""
import asyncio
import hashlib
import os
import struct
import zlib
from typing import Dict, Iterable, List, Optional, Tuple
import logging

import aiofiles
import numpy as np

from embedding.providers import EmbeddingProvider, embed_batch
from embedding.similarity import EmbeddingVector
from utils.errors import CorpusIOError

logger = logging.getLogger(__name__)

_MAGIC = b"QE"
_KEY_LEN = struct.Struct("<H")
_DIM = struct.Struct("<I")
_CRC = struct.Struct("<I")


def make_key(provider_name: str, text: str) -> str:
    """Ключ записи: sha256 от имени провайдера и текста"""
    return hashlib.sha256(f"{provider_name}\x00{text}".encode("utf-8")).hexdigest()


def encode_record(key: str, vector: EmbeddingVector) -> bytes:
    """Сериализует одну запись кэша"""
    key_bytes = key.encode("utf-8")
    values = np.asarray(vector, dtype="<f4")
    body = (
        _MAGIC
        + _KEY_LEN.pack(len(key_bytes))
        + key_bytes
        + _DIM.pack(values.shape[0])
        + values.tobytes()
    )
    return body + _CRC.pack(zlib.crc32(body))


def _parse_record(data: bytes, offset: int) -> Optional[Tuple[str, EmbeddingVector, int]]:
    """Запись по смещению offset: (ключ, вектор, конец записи) или None, если она повреждена"""
    if data[offset:offset + 2] != _MAGIC or offset + 2 + _KEY_LEN.size > len(data):
        return None
    (key_len,) = _KEY_LEN.unpack_from(data, offset + 2)
    key_start = offset + 2 + _KEY_LEN.size
    key_end = key_start + key_len
    if key_end + _DIM.size > len(data):
        return None
    (dim,) = _DIM.unpack_from(data, key_end)
    values_start = key_end + _DIM.size
    values_end = values_start + 4 * dim
    if values_end + _CRC.size > len(data):
        return None
    (checksum,) = _CRC.unpack_from(data, values_end)
    if zlib.crc32(data[offset:values_end]) != checksum:
        return None
    try:
        key = data[key_start:key_end].decode("utf-8")
    except UnicodeDecodeError:
        return None
    vector = np.frombuffer(data[values_start:values_end], dtype="<f4").astype(np.float32)
    return key, vector, values_end + _CRC.size


def _next_record(data: bytes, offset: int) -> Optional[int]:
    """Смещение ближайшей целой записи после offset"""
    candidate = data.find(_MAGIC, offset + 1)
    while candidate != -1:
        if _parse_record(data, candidate) is not None:
            return candidate
        candidate = data.find(_MAGIC, candidate + 1)
    return None


def decode_records(data: bytes) -> Tuple[Dict[str, EmbeddingVector], int]:
    """
    Разбирает содержимое файла кэша

    Повреждённый участок пропускается до следующей записи с верной контрольной суммой
    и считается одной повреждённой записью.

    Args:
        data: Байты файла

    Returns:
        Tuple: (записи по ключу, число повреждённых записей)
    """
    entries: Dict[str, EmbeddingVector] = {}
    corrupted = 0
    offset = 0
    while offset < len(data):
        parsed = _parse_record(data, offset)
        if parsed is not None:
            key, vector, offset = parsed
            entries[key] = vector
            continue
        corrupted += 1
        resume = _next_record(data, offset)
        if resume is None:
            logger.warning(f"⚠️ Кэш: повреждённый хвост со смещения {offset} ({len(data) - offset} байт)")
            break
        logger.warning(f"⚠️ Кэш: повреждённый участок [{offset}, {resume}) пропущен")
        offset = resume
    return entries, corrupted


class EmbeddingCache:
    """Кэш эмбеддингов в файле, дописываемом записями с контрольной суммой"""

    def __init__(self, path: str):
        self.path = path
        self._entries: Dict[str, EmbeddingVector] = {}
        self._opened = False
        self.corrupted_records = 0
        self.lock = asyncio.Lock()

    async def open(self) -> "EmbeddingCache":
        """Загружает существующие записи"""
        async with self.lock:
            if self._opened:
                return self
            if os.path.exists(self.path):
                try:
                    async with aiofiles.open(self.path, "rb") as f:
                        data = await f.read()
                except OSError as e:
                    raise CorpusIOError(self.path, str(e))
                self._entries, self.corrupted_records = decode_records(data)
                if self.corrupted_records:
                    logger.warning(f"⚠️ Кэш {self.path}: {self.corrupted_records} повреждённых записей будут пересчитаны")
                    await self._compact()
            else:
                directory = os.path.dirname(self.path)
                if directory:
                    os.makedirs(directory, exist_ok=True)
            self._opened = True
            logger.debug(f"📦 Кэш {self.path}: {len(self._entries)} записей")
            return self

    async def _compact(self) -> None:
        """Переписывает файл только целыми записями, чтобы новые записи шли за ними"""
        blob = b"".join(encode_record(key, vector) for key, vector in self._entries.items())
        tmp_path = f"{self.path}.tmp"
        try:
            async with aiofiles.open(tmp_path, "wb") as f:
                await f.write(blob)
                await f.flush()
            os.replace(tmp_path, self.path)
        except OSError as e:
            raise CorpusIOError(self.path, str(e))
        logger.info(f"🧹 Кэш {self.path} сжат: {len(self._entries)} целых записей, {len(blob)} байт")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[EmbeddingVector]:
        return self._entries.get(key)

    async def put_many(self, items: Iterable[Tuple[str, EmbeddingVector]]) -> None:
        """
        Дописывает записи в файл одной операцией записи

        Args:
            items: Пары (ключ, вектор)
        """
        items = list(items)
        if not items:
            return
        blob = b"".join(encode_record(key, vector) for key, vector in items)
        async with self.lock:
            try:
                async with aiofiles.open(self.path, "ab") as f:
                    await f.write(blob)
                    await f.flush()
            except OSError as e:
                raise CorpusIOError(self.path, str(e))
            for key, vector in items:
                self._entries[key] = np.asarray(vector, dtype=np.float32)


async def cache_get_or_embed(
    cache: EmbeddingCache,
    provider: EmbeddingProvider,
    texts: List[str],
) -> List[EmbeddingVector]:
    """
    Векторы из кэша; отсутствующие считаются провайдером и сохраняются

    Args:
        cache: Кэш эмбеддингов
        provider: Провайдер для промахов
        texts: Тексты

    Returns:
        List[EmbeddingVector]: Векторы в порядке texts
    """
    await cache.open()
    keys = [make_key(provider.name, text) for text in texts]

    missing: Dict[str, str] = {}
    for key, text in zip(keys, texts):
        if key not in cache and key not in missing:
            missing[key] = text

    if missing:
        vectors = await embed_batch(provider, list(missing.values()))
        await cache.put_many(zip(missing.keys(), vectors))
        logger.debug(f"📦 Кэш: {len(texts) - len(missing)} попаданий, {len(missing)} промахов")

    return [cache.get(key) for key in keys]


class CachedEmbeddingProvider(EmbeddingProvider):
    """Провайдер-обёртка, читающий и пополняющий кэш"""

    def __init__(self, inner: EmbeddingProvider, cache: EmbeddingCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name
        self.dim = inner.dim
        self.deterministic = inner.deterministic
        self.serialized = inner.serialized

    async def _embed(self, texts: List[str]) -> List[EmbeddingVector]:
        return await cache_get_or_embed(self.cache, self.inner, texts)

    async def close(self) -> None:
        await self.inner.close()
