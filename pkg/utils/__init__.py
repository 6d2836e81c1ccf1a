"""
Утилитарные модули: логирование, ошибки, ограничение параллелизма.
"""
