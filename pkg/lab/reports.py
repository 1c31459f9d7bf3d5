"""ConvergenceReport and its CSV / JSON / gnuplot writers."""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from common.conf import lab_setting

from .constants import CSV_COLUMNS, SIGMAS

logger = logging.getLogger(__name__)


def clean(value):
    """JSON-safe copy: numpy scalars and arrays unwrapped, complex as [re, im], non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(key): clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        if value.imag == 0:
            return clean(float(value.real))
        return [clean(float(value.real)), clean(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def trend(values, stderrs=None, sigmas=SIGMAS, max_final_ratio=None):
    """Is the sequence decreasing along the grid, within ``sigmas`` joint standard errors per step?"""
    pairs = [(v, s or 0.0) for v, s in zip(values, stderrs or [0.0] * len(values)) if v is not None]
    if len(pairs) < 2:
        return {"decreasing": True, "final_over_initial": None, "passed": True}
    steps = [b[0] <= a[0] + sigmas * math.hypot(a[1], b[1]) for a, b in zip(pairs, pairs[1:])]
    first, last = pairs[0][0], pairs[-1][0]
    ratio = last / first if first > 0 else None
    passed = all(steps)
    if max_final_ratio is not None and ratio is not None:
        passed = passed and ratio <= max_final_ratio
    return {"decreasing": all(steps), "final_over_initial": ratio, "passed": passed}


@dataclass
class ConvergenceReport:
    kind: str
    config: dict
    rows: list
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        rows_ok = all(row.get("passed", False) for row in self.rows)
        return rows_ok and self.summary.get("trend", {}).get("passed", True)

    def column(self, name):
        return [row.get(name) for row in self.rows]

    def storable_rows(self):
        out = []
        for row in self.rows:
            stored = {key: _finite_or_none(row.get(key)) for key in CSV_COLUMNS if key not in ("n_max", "passed")}
            stored["n_max"] = row.get("n_max")
            stored["passed"] = bool(row.get("passed", False))
            stored["checks"] = clean(row.get("checks", {}))
            out.append(stored)
        return out

    def to_json(self):
        payload = {"kind": self.kind, "config": self.config, "summary": self.summary, "passed": self.passed}
        payload["rows"] = self.rows
        return clean(payload)


def write_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in report.rows:
            writer.writerow({key: clean(row.get(key)) for key in CSV_COLUMNS})


def write_json(report, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_json(), handle, indent=2, ensure_ascii=False)


def write_gnuplot(report, path):
    columns = ["temperature", "distance", "distance_stderr", "ratio", "z_r"]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# {report.kind}: " + " ".join(columns) + "\n")
        for row in report.rows:
            cells = [row.get(key) for key in columns]
            handle.write(" ".join("NaN" if v is None else f"{float(v):.12g}" for v in cells) + "\n")


def write_report(report, out_dir=None, gnuplot=False):
    """Write <kind>-<seed>.csv/.json (and .dat) under ``out_dir``; returns the paths written."""
    out_dir = Path(lab_setting("OUTPUT_DIR", out_dir))
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.kind}-{report.config.get('seed')}"
    paths = {"csv": out_dir / f"{stem}.csv", "json": out_dir / f"{stem}.json"}
    write_csv(report, paths["csv"])
    write_json(report, paths["json"])
    if gnuplot:
        paths["dat"] = out_dir / f"{stem}.dat"
        write_gnuplot(report, paths["dat"])
    logger.info("report written kind=%s dir=%s passed=%s", report.kind, out_dir, report.passed)
    return paths
