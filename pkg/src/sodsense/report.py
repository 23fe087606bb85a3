"""Report bundles: summary.json plus RFC-4180 CSV tables."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def jsonable(obj):
    """Convert numpy values and non-finite floats to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class ReportBundle:
    experiment: str
    seed: int
    summary: dict = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list]] = field(default_factory=dict)

    def add_table(self, name: str, header: list[str], rows) -> None:
        self.tables[name] = (header, list(rows))

    def environment(self) -> dict:
        return {
            "package_version": __version__,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
            "seed": self.seed,
        }


def write_report(bundle: ReportBundle, path: str | Path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        doc = {"experiment": bundle.experiment, "environment": bundle.environment(), **bundle.summary}
        doc.setdefault("trials", 0)
        with open(out / "summary.json", "w") as fh:
            json.dump(jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name, (header, rows) in sorted(bundle.tables.items()):
            write_csv(out / f"{name}.csv", header, rows)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return out
