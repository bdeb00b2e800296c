"""
Monitor de Performance
Uso de recursos do processo e dimensionamento do pool de workers
"""

import logging
import time
from typing import Any, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


def default_worker_count(requested: Optional[int] = None) -> int:
    """
    Número de workers: o pedido, se positivo; senão os núcleos físicos

    Processos com memória partilhada em núcleos lógicos (hyperthreading) não
    aceleram a simulação, que é limitada por CPU.
    """
    if requested is not None and requested > 0:
        return int(requested)
    cores = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
    return max(1, int(cores))


class PerformanceMonitor:
    """Acompanha tempo de parede, CPU e memória residente de uma execução"""

    def __init__(self):
        self.process = psutil.Process()
        self.start_time = time.perf_counter()
        self.start_cpu = self._cpu_seconds()

    def _cpu_seconds(self) -> float:
        times = self.process.cpu_times()
        return times.user + times.system

    def snapshot(self) -> Dict[str, Any]:
        try:
            memory_info = self.process.memory_info()
            return {
                "elapsed_seconds": time.perf_counter() - self.start_time,
                "cpu_seconds": self._cpu_seconds() - self.start_cpu,
                "rss_bytes": memory_info.rss,
                "system_memory_percent": psutil.virtual_memory().percent,
            }
        except (psutil.NoSuchProcess, psutil.AccessDenied) as e:
            logger.error(f"Erro ao coletar métricas do processo: {e}")
            return {"error": str(e)}

    def log_summary(self, label: str) -> Dict[str, Any]:
        snap = self.snapshot()
        if "error" not in snap:
            logger.info(
                f"{label}: {snap['elapsed_seconds']:.1f}s de parede, "
                f"{snap['cpu_seconds']:.1f}s de CPU, RSS {snap['rss_bytes'] / (1024 ** 2):.1f} MiB"
            )
        return snap
