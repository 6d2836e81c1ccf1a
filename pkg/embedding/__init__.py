"""
Эмбеддинги предложений: провайдеры, кэш, косинусное сходство.
"""
