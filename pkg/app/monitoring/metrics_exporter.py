"""
Exportador de Métricas Prometheus
Contadores de replicações e violações de cota por experimento, gravados no formato textfile
"""

import logging
import os
import time
from contextlib import contextmanager

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = logging.getLogger(__name__)


class ExperimentMetrics:
    """Métricas de uma execução, em um registry próprio (não o global do processo)"""

    def __init__(self, kind: str, model: str):
        self.kind = kind
        self.model = model or "none"
        self.registry = CollectorRegistry()

        self.replications_total = Counter(
            'difflab_replications_total',
            'Total de replicações executadas',
            ['kind', 'model'],
            registry=self.registry
        )

        self.bound_violations_total = Counter(
            'difflab_bound_violations_total',
            'Total de violações de cotas verificadas',
            ['kind', 'model'],
            registry=self.registry
        )

        self.scale_duration = Histogram(
            'difflab_scale_duration_seconds',
            'Tempo de parede por escala n',
            ['kind', 'model'],
            buckets=(0.1, 0.5, 1, 5, 15, 60, 300, 900, float("inf")),
            registry=self.registry
        )

        self.peak_rss_bytes = Gauge(
            'difflab_process_rss_bytes',
            'Memória residente do processo principal ao fim do experimento',
            registry=self.registry
        )

    def _labels(self, metric):
        return metric.labels(kind=self.kind, model=self.model)

    def record_replications(self, count: int):
        self._labels(self.replications_total).inc(count)

    def record_violations(self, count: int):
        if count > 0:
            self._labels(self.bound_violations_total).inc(count)

    @contextmanager
    def time_scale(self):
        """Mede o tempo de parede de uma escala n"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self._labels(self.scale_duration).observe(time.perf_counter() - start)

    def set_rss(self, rss_bytes: int):
        self.peak_rss_bytes.set(rss_bytes)

    def replications(self) -> float:
        return self.registry.get_sample_value(
            'difflab_replications_total', {'kind': self.kind, 'model': self.model}) or 0.0

    def violations(self) -> float:
        return self.registry.get_sample_value(
            'difflab_bound_violations_total', {'kind': self.kind, 'model': self.model}) or 0.0

    def export(self, output_dir: str, filename: str) -> str:
        """Grava o registry para o textfile collector do node exporter"""
        path = os.path.join(output_dir, filename)
        try:
            write_to_textfile(path, self.registry)
            logger.info(f"Métricas exportadas para {path}")
        except OSError as e:
            logger.error(f"Erro ao exportar métricas: {e}")
        return path
