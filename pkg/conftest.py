"""Общие фикстуры тестов."""
import json
from typing import Dict, List

import numpy as np
import pytest

from embedding.providers import EmbeddingProvider, HashingEmbeddingProvider, deterministic_test_embed

FILLER_SENTENCE = "Filler words repeat without any useful content here."
CLUSTER_DOCS = 10
CLUSTER_START = 30
CLUSTER_SIZE = 4
CLUSTER_N = 60


class CountingProvider(EmbeddingProvider):
    """Тестовый провайдер, считающий вызовы"""
    deterministic = True

    def __init__(self, dim: int = 16, seed: int = 7, scale: float = 1.0):
        self.dim = dim
        self.seed = seed
        self.scale = scale
        self.name = f"counting-{dim}-{seed}"
        self.calls = 0
        self.texts_embedded: List[str] = []

    async def _embed(self, texts):
        self.calls += 1
        self.texts_embedded.extend(texts)
        return [deterministic_test_embed(t, self.dim, self.seed) * np.float32(self.scale) for t in texts]


@pytest.fixture
def provider():
    return HashingEmbeddingProvider()


@pytest.fixture
def counting_provider():
    return CountingProvider()


@pytest.fixture
def scaled_provider_factory():
    """Провайдер с векторами, умноженными на константу"""
    def factory(scale: float) -> CountingProvider:
        return CountingProvider(dim=384, seed=42, scale=scale)
    return factory


def write_ndjson(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return str(path)


def cluster_document_text(k: int) -> str:
    """60 предложений: одинаковый наполнитель и кластер из 4 предложений по теме k"""
    sentences = [FILLER_SENTENCE] * CLUSTER_N
    for j in range(CLUSTER_SIZE):
        sentences[CLUSTER_START - 1 + j] = (
            f"Topic{k} zebra{k} migration fact {j} explains the zebra{k} river crossing."
        )
    return " ".join(sentences)


@pytest.fixture
def cluster_corpus(tmp_path) -> Dict[str, str]:
    """
    10 документов, у каждого запроса релевантен кластер из 4 соседних предложений
    """
    corpus = [{"id": f"d{k:02d}", "text": cluster_document_text(k)} for k in range(CLUSTER_DOCS)]
    queries = [
        {"id": f"q{k:02d}", "text": f"How do zebra{k} handle the Topic{k} river crossing?",
         "type": ["factoid", "topical", "comparative", "multi_hop"][k % 4]}
        for k in range(CLUSTER_DOCS)
    ]
    gold = [
        {"query_id": f"q{k:02d}", "doc_id": f"d{k:02d}",
         "relevant_sentences": list(range(CLUSTER_START, CLUSTER_START + CLUSTER_SIZE))}
        for k in range(CLUSTER_DOCS)
    ]
    return {
        "corpus": write_ndjson(tmp_path / "corpus.jsonl", corpus),
        "queries": write_ndjson(tmp_path / "queries.jsonl", queries),
        "gold": write_ndjson(tmp_path / "gold.jsonl", gold),
        "dir": str(tmp_path),
    }
