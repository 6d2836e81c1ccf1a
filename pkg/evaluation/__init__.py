"""
Оценка стратегий чанкинга: чтение корпуса, индексирование и top-k поиск,
метрики релевантности, латентность и перебор гиперпараметров.
"""
