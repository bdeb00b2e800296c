# Funções auxiliares

import hashlib
import json
import re
from typing import Any, Optional, Sequence, Union

import numpy as np

FLOAT_FORMAT = "%.12g"


def _to_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(obj: Any, indent: Optional[int] = 2) -> str:
    """JSON determinístico: chaves ordenadas, tipos numpy convertidos, não finitos como null"""
    return json.dumps(_to_builtin(obj), sort_keys=True, indent=indent, ensure_ascii=False) + "\n"


def config_hash(config: Any) -> str:
    """SHA-256 da forma canônica compacta da configuração"""
    payload = canonical_json(config, indent=None).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def locate_key_line(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """
    Linha (base 1) onde a chave mais interna de loc aparece no texto JSON

    Percorre as chaves em ordem, procurando cada uma a partir da posição da anterior.
    """
    position = 0
    found = None
    for key in loc:
        if isinstance(key, int):
            continue
        match = re.compile(r'"' + re.escape(str(key)) + r'"\s*:').search(text, position)
        if match is None:
            break
        position = match.start()
        found = text.count("\n", 0, position) + 1
    return found
