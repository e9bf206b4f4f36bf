"""Deterministic CSV tables and JSON summaries for scenario results."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from warpbench.models import ScenarioResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(clean(value), sort_keys=True)
    if value is None:
        return ""
    return str(value)


def render_csv(rows: list[dict[str, Any]]) -> str:
    """RFC-4180 CSV with the union of row keys as columns, provenance last."""
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns and key != "provenance":
                columns.append(key)
    columns.append("provenance")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(result: ScenarioResult) -> str:
    payload = {
        "schema": SCHEMA_VERSION,
        "scenario": result.scenario,
        "command": result.command.value,
        "exit_code": result.exit_code,
        "passed": result.passed,
        "rows": len(result.rows),
        "summary": clean(result.summary),
        "error": result.error,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(result: ScenarioResult, out_dir: str | Path) -> tuple[Path, Path]:
    """Write <scenario>.csv and <scenario>.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.scenario}.csv"
    json_path = out / f"{result.scenario}.json"
    csv_path.write_text(render_csv(result.rows), encoding="utf-8", newline="")
    json_path.write_text(render_json(result), encoding="utf-8")
    logger.info(f"Report written: {csv_path}, {json_path}")
    return csv_path, json_path


def write_ledger(ledger_json: str, scenario: str, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{scenario}.ledger.json"
    path.write_text(ledger_json + "\n", encoding="utf-8")
    return path
