"""
Escrita dos artefatos de um experimento

Cada execução produz, no diretório de saída:
    summary.csv      uma linha por escala n
    ratefit.json     ajuste log-log (quando há ao menos 4 escalas)
    details.json     campos específicos do tipo de experimento
    loglog.svg       gráfico log-log (opcional)
    manifest.json    semente, hash da configuração, versões e hashes dos arquivos

Todos os arquivos de resultado são funções puras da configuração e da semente:
nenhum carimbo de tempo, chaves JSON ordenadas e formato de ponto flutuante fixo.
"""

import hashlib
import logging
import os
import platform
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import scipy  # noqa: E402

from app import __version__  # noqa: E402
from app.storage.models import ExperimentConfig, Manifest, OutputFile  # noqa: E402
from app.utils.helpers import FLOAT_FORMAT, canonical_json, config_hash  # noqa: E402

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
RATEFIT_FILE = "ratefit.json"
DETAILS_FILE = "details.json"
PLOT_FILE = "loglog.svg"
MANIFEST_FILE = "manifest.json"

_SVG_HASH_SALT = "difflab"


def file_sha256(filename: str) -> str:
    digest = hashlib.sha256()
    with open(filename, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class ReportWriter:
    """Escritor único dos arquivos de um experimento (chamado apenas pelo processo principal)"""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.files: List[str] = []
        os.makedirs(output_dir, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _register(self, name: str):
        if name not in self.files:
            self.files.append(name)

    def write_summary(self, table: pd.DataFrame, name: str = SUMMARY_FILE) -> str:
        filename = self._path(name)
        table.to_csv(filename, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._register(name)
        logger.info(f"Resumo gravado: {filename} ({len(table)} linhas)")
        return filename

    def write_json(self, payload: Any, name: str) -> str:
        filename = self._path(name)
        if hasattr(payload, "model_dump"):
            payload = payload.model_dump()
        with open(filename, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(canonical_json(payload))
        self._register(name)
        return filename

    def write_loglog_plot(self, series: Dict[str, Sequence[Tuple[float, float]]], title: str,
                          ylabel: str, reference_slopes: Optional[Dict[str, float]] = None,
                          name: str = PLOT_FILE) -> str:
        """
        Gráfico log-log das estatísticas médias contra n

        Args:
            series: rótulo ↦ pares (n, média)
            reference_slopes: rótulo ↦ inclinação de referência, desenhada a partir do primeiro ponto
        """
        filename = self._path(name)
        with plt.rc_context({"svg.hashsalt": _SVG_HASH_SALT, "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(6, 4))
            try:
                first_point = None
                for label in sorted(series):
                    points = [(n, y) for n, y in series[label] if y > 0]
                    if not points:
                        continue
                    ns, ys = zip(*points)
                    ax.loglog(ns, ys, marker="o", label=label)
                    first_point = first_point or (ns[0], ys[0], ns[-1])
                if first_point is not None:
                    n0, y0, n1 = first_point
                    for label, slope in sorted((reference_slopes or {}).items()):
                        grid = np.array([n0, n1], dtype=float)
                        ax.loglog(grid, y0 * (grid / n0) ** slope, linestyle="--", label=label)
                ax.set_xlabel("n")
                ax.set_ylabel(ylabel)
                ax.set_title(title)
                ax.legend()
                fig.savefig(filename, format="svg", metadata={"Date": None})
            finally:
                plt.close(fig)
        self._register(name)
        return filename

    def write_manifest(self, config: ExperimentConfig) -> Manifest:
        """Grava o manifesto com os hashes dos arquivos já emitidos"""
        manifest = Manifest(
            kind=config.kind,
            model=config.model,
            seed=config.seed,
            config_sha256=config_hash(config.model_dump(exclude={"output_dir"})),
            code_version=__version__,
            python=platform.python_version(),
            numpy=np.__version__,
            scipy=scipy.__version__,
            pandas=pd.__version__,
            platform=f"{sys.platform}-{platform.machine()}",
            files=[OutputFile(name=name, sha256=file_sha256(self._path(name))) for name in sorted(self.files)],
        )
        self.write_json(manifest, MANIFEST_FILE)
        logger.info(f"Manifesto gravado em {self._path(MANIFEST_FILE)}")
        return manifest
