"""
Exceções do laboratório
Toda falha é levantada explicitamente; nada é corrigido silenciosamente
"""

from typing import Optional


class LabError(Exception):
    """Exceção base do laboratório"""
    pass


class ParameterError(LabError, ValueError):
    """Parâmetro inválido (horizonte, taxa, partição, amostra vazia)"""
    pass


class DomainError(LabError, ValueError):
    """Argumento fora do domínio de uma função matemática"""
    pass


class UnsupportedDimensionError(LabError):
    """Operação definida apenas para outra dimensão"""
    pass


class ModelError(LabError):
    """Função de taxa inválida (negativa ou NaN)"""

    def __init__(self, message: str, channel: Optional[int] = None, state=None):
        super().__init__(message)
        self.channel = channel
        self.state = state


class DomainEscapeError(LabError):
    """Solução ou simulação saiu do domínio declarado do modelo"""
    pass


class StabilityError(LabError):
    """Processo de Hawkes instável (κ >= 1)"""
    pass


class StatisticsError(LabError):
    """Replicações insuficientes para a estatística pedida"""
    pass


class ConfigError(LabError):
    """Configuração de experimento inválida"""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line

    def __str__(self) -> str:
        if self.line is not None:
            return f"linha {self.line}: {self.args[0]}"
        return str(self.args[0])
