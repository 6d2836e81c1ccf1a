import os

import dotenv

dotenv.load_dotenv()


class Settings:
    # Эмбеддинги
    PROVIDER_URL: str = os.getenv("QASC_PROVIDER_URL", "")
    CACHE_PATH: str = os.getenv("QASC_CACHE_PATH", "")
    EMBED_BATCH_SIZE: int = int(os.getenv("QASC_EMBED_BATCH_SIZE", "64"))

    # Удалённый провайдер
    PROVIDER_TIMEOUT: float = float(os.getenv("QASC_PROVIDER_TIMEOUT", "30"))  # секунды
    PROVIDER_MAX_RETRIES: int = int(os.getenv("QASC_PROVIDER_MAX_RETRIES", "2"))
    PROVIDER_RETRY_DELAY: float = float(os.getenv("QASC_PROVIDER_RETRY_DELAY", "0.5"))

    # Параллелизм пар (документ, запрос)
    PARALLELISM: int = int(os.getenv("QASC_PARALLELISM", "4"))

    # Логирование
    LOG_LEVEL: str = os.getenv("QASC_LOG_LEVEL", "INFO")


settings = Settings()
