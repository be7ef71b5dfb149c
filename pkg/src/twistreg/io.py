"""Deterministic text output: every file starts with a provenance header."""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from . import __version__


def config_hash(config: dict) -> str:
    canon = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def header(config: dict, command: str) -> str:
    return f"# twistreg {__version__} command={command} config={config_hash(config)}\n"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17e")
    return str(x)


def write_csv(path: Path, columns: str, rows, config: dict, command: str) -> None:
    lines = [header(config, command), columns + "\n"]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row) + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def write_summary(path: Path, items: dict, config: dict, command: str) -> None:
    lines = [header(config, command)]
    lines += [f"{k} = {fmt(v)}\n" for k, v in items.items()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
