"""CSV export of sweep tables."""
from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Union

from macroent.core.robustness import SweepTable

LOGGER = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def sweep_to_csv(table: SweepTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["param", "f"])
    for x, y in table.rows():
        writer.writerow([_fmt(x), _fmt(y)])
    return buffer.getvalue()


def write_sweep_csv(table: SweepTable, path: Union[str, Path]) -> Path:
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(sweep_to_csv(table))
    LOGGER.info("Wrote %d sweep rows to %s", len(table), path)
    return path


__all__ = ["sweep_to_csv", "write_sweep_csv"]
