"""CSV and JSON writers with frozen headers and reproducible float formatting."""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HEADERS = {
    "gaps": ("s", "P_hat", "stderr"),
    "counts": ("r", "E_hat", "stderr"),
    "freepath": ("xi", "cdf", "stderr", "censored_fraction"),
    "F": ("sigma", "r", "F_hat", "stderr", "n"),
    "Phi": ("xi", "Phi_hat", "stderr", "h"),
}


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: str | Path, kind: str | Sequence[str], rows: Iterable[Sequence]) -> Path:
    header = HEADERS[kind] if isinstance(kind, str) else tuple(kind)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row {row!r} does not match header {header}")
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def write_manifest(path: str | Path, params: dict, outputs: Sequence[str] = ()) -> Path:
    from . import __version__
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "package": "llg",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "params": _jsonable(params),
        "outputs": list(outputs),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
