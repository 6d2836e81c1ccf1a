"""
Сегментация документов и стратегии чанкинга (QASC и базовые).
"""
