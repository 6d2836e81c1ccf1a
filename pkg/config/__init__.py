"""
Конфигурация: переменные окружения и константы пайплайна.
"""
