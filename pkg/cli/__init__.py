"""
Командная строка: chunk, eval, sweep, cache-warm.
"""
