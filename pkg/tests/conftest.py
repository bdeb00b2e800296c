"""
Configuração base para testes
"""
import json
import os
import sys

import numpy as np
import pytest

# Adicionar o diretório raiz ao path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.services.measures import RngStream  # noqa: E402
from app.services.paths import GridPath, Partition, RcllPath  # noqa: E402


@pytest.fixture
def rng():
    """Fluxo aleatório fixo para testes determinísticos"""
    return RngStream(20240601, 7)


@pytest.fixture
def unit_partition():
    return Partition.uniform(1.0, 8)


@pytest.fixture
def step_path():
    """Caminho com saltos em 0.25 e 0.6: 0 -> 1 -> -0.5"""
    return RcllPath(0.0, np.array([0.25, 0.6]), np.array([1.0, -0.5]), 1.0)


@pytest.fixture
def sine_path():
    times = np.linspace(0.0, 1.0, 1025)
    return GridPath(times, np.sin(2 * np.pi * times))


@pytest.fixture
def write_config(tmp_path):
    """Grava uma configuração JSON indentada e devolve o caminho do arquivo"""
    def _write(payload, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        return str(path)
    return _write


# Configurações de teste reutilizáveis
SMALL_LLN_CONFIG = {
    "schema_version": 1,
    "kind": "lln-rate",
    "model": "telegraph",
    "n": [100, 10000],
    "replications": 10,
    "grid": 512,
    "seed": 1,
}


@pytest.fixture
def small_lln_config():
    return dict(SMALL_LLN_CONFIG)
