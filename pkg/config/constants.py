# Гиперпараметры QASC по умолчанию
SEED_PERCENTILE: float = 75.0
WINDOW_RADIUS: int = 3  # окно из 7 предложений
BOUNDARY_PERCENTILE: float = 40.0
DECAY: float = 0.3
GAP_TOLERANCE: int = 2
CHUNK_THRESHOLD_FACTOR: float = 0.6  # τ_chunk = 0.6 * τ
MAX_BOUNDARY_SHIFT: int = 2

# Диапазоны для анализа чувствительности
ABLATION_RANGES = {
    "seed_percentile": [60.0, 70.0, 75.0, 80.0, 90.0],
    "window_radius": [1, 2, 3, 5, 7],
    "decay": [0.0, 0.1, 0.3, 0.5, 1.0],
    "gap_tolerance": [0, 1, 2, 3, 5],
    "chunk_threshold_factor": [0.4, 0.5, 0.6, 0.7, 0.8],
}

# Базовые стратегии
FIXED_SIZE_TOKENS: int = 500
RECURSIVE_TARGET_TOKENS: int = 500
RECURSIVE_OVERLAP_TOKENS: int = 50
SEMANTIC_BOUNDARY_PERCENTILE: float = 25.0

# Поиск
TOP_K: int = 5

# Тестовый провайдер эмбеддингов
TEST_EMBEDDING_DIM: int = 384  # как у all-MiniLM-L6-v2
TEST_EMBEDDING_SEED: int = 42

# Минимальное число предложений документа в eval (0 = без фильтра; для длинных документов обычно 50)
MIN_SENTENCES: int = 0

# Сокращения, после которых точка не завершает предложение
ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "approx.",
    "dr.", "mr.", "mrs.", "ms.", "prof.", "jr.", "sr.", "st.",
    "fig.", "figs.", "eq.", "eqs.", "sec.", "ref.", "refs.", "no.", "vol.", "pp.",
})

# Маркер пропуска между несмежными чанками в режиме composed_summary
OMISSION_MARKER: str = " [...] "

# Колонки CSV-отчёта
REPORT_COLUMNS = [
    "strategy",
    "query_id",
    "query_type",
    "precision",
    "recall",
    "f1",
    "chunk_count",
    "latency_chunking_ms",
    "latency_retrieval_ms",
]
