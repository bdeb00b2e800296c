# Testes do difflab
