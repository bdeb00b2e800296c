# Módulo de monitoramento da execução de experimentos
