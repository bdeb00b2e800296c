"""
difflab - laboratório de aproximações de difusão

Linha de comando:
    difflab run <config.json> [--workers N] [--seed S] [--out DIR]
    difflab list-models

Códigos de saída: 0 sucesso, 2 configuração inválida, 3 erro de execução.
"""

import argparse
import json
import sys
from typing import List, Optional

from pydantic import ValidationError

from app import __version__
from app.config import settings
from app.services.catalog import list_models
from app.services.experiment_service import run_experiment
from app.storage.models import ExperimentConfig
from app.utils.exceptions import ConfigError, LabError
from app.utils.helpers import locate_key_line
from app.utils.logger import get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def load_config(filename: str, seed: Optional[int] = None, output_dir: Optional[str] = None) -> ExperimentConfig:
    """
    Lê e valida um arquivo de configuração

    Raises:
        ConfigError: JSON malformado ou campo inválido, com o número da linha
    """
    try:
        with open(filename, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"não foi possível ler {filename}: {e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido: {e.msg}", e.lineno) from e
    if not isinstance(data, dict):
        raise ConfigError("a configuração deve ser um objeto JSON", 1)

    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = output_dir

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = [part for part in error["loc"] if isinstance(part, (str, int))]
        field = ".".join(str(part) for part in loc) or "configuração"
        line = locate_key_line(text, loc) if loc else None
        raise ConfigError(f"{field}: {error['msg']}", line) from e


def print_models():
    for entry in list_models():
        print(f"{entry.model_id}: {entry.title}")
        print(f"    origem: {entry.provenance}")
        for param in entry.parameters:
            print(f"    {param.name} = {param.default!r}  ({param.description})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difflab", description="Laboratório de aproximações de difusão")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="executa um experimento descrito em JSON")
    run.add_argument("config", help="arquivo de configuração")
    run.add_argument("--workers", type=int, default=None, help="processos de trabalho (padrão: núcleos físicos)")
    run.add_argument("--seed", type=int, default=None, help="semente mestre (sobrepõe a configuração)")
    run.add_argument("--out", default=None, help="diretório de saída (sobrepõe a configuração)")

    sub.add_parser("list-models", help="lista o catálogo de modelos e seus parâmetros")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.LOG_LEVEL, settings.LOG_FILE)

    if args.command == "list-models":
        print_models()
        return EXIT_OK

    try:
        config = load_config(args.config, seed=args.seed, output_dir=args.out)
    except ConfigError as e:
        logger.error(f"Configuração inválida em {args.config}: {e}")
        print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        outcome = run_experiment(config, workers=args.workers)
    except LabError as e:
        context = f"experimento {config.kind}" + (f", modelo {config.model}" if config.model else "")
        logger.error(f"Erro de execução ({context}): {e}")
        print(f"{context}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    logger.info(f"Concluído: {outcome.replications} replicações, {outcome.violations} violações")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
