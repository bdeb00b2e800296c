# Configurações do laboratório e variáveis de ambiente

from pydantic_settings import BaseSettings
from pydantic import Field
from typing import Optional

class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Nível de log")
    LOG_FILE: Optional[str] = Field(default=None, description="Arquivo de log (opcional)")

    # Execução paralela
    DEFAULT_WORKERS: int = Field(default=0, ge=0, description="Workers do pool (0 = núcleos físicos)")

    # Grades numéricas
    DEFAULT_GRID_SIZE: int = Field(default=2**12, ge=16, description="Passos da grade para Λ, γ e Θ_A")
    HAWKES_GRID_SIZE: int = Field(default=2**14, ge=16, description="Grade de quadratura dos caminhos de Hawkes")
    BROWNIAN_REFERENCE_GRID: int = Field(default=2**16, ge=16, description="Grade fina de referência do movimento browniano")

    # Estatística
    BOOTSTRAP_RESAMPLES: int = Field(default=1000, ge=0, description="Reamostragens bootstrap por ajuste de taxa")
    MIN_HAWKES_REPLICATIONS: int = Field(default=500, ge=1, description="Mínimo de replicações para diagnósticos de Hawkes")

    # Modelos
    MMINF_STATE_CAP_FACTOR: float = Field(default=4.0, gt=1.0, description="Teto de estado M/M/∞ como múltiplo de max(Λ(0), λ/μ)")

    # Saídas
    OUTPUT_DIR: str = Field(default="results", description="Diretório padrão de saída")
    ENABLE_PLOTS: bool = Field(default=True, description="Gerar gráficos SVG log-log")
    ENABLE_METRICS_EXPORT: bool = Field(default=False, description="Exportar métricas Prometheus em arquivo texto")
    METRICS_TEXTFILE: str = Field(default="metrics.prom", description="Nome do arquivo de métricas")

    model_config = {
        "env_file": ".env",
        "case_sensitive": True,
        "extra": "ignore"
    }

settings = Settings()
