"""
Artifacts Module
Self-describing CSV and JSON outputs

Every artifact starts with '#'-prefixed metadata (tool, version, seed and the
full config echo). Nothing time-dependent is written, so reruns with the same
config and seed are byte-identical.
"""

import csv
import io
import json
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, logger
from .outage import OutageCurve

TOOL_NAME = "risalign"

OUTAGE_COLUMNS = [
    "gamma_t_db",
    "p_out",
    "ci_low",
    "ci_high",
    "trials",
    "provenance",
    "p_out_clamped",
    "low_confidence",
]


def format_value(value: Any) -> str:
    """Deterministic text for one cell"""
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return format(float(value), ".17g")
    return str(value)


def metadata_lines(
    command: str, seed: int | None, config_echo: dict[str, Any], extra: dict[str, Any] | None = None
) -> list[str]:
    lines = [
        f"# tool: {TOOL_NAME}",
        f"# version: {__version__}",
        f"# command: {command}",
        f"# seed: {'none' if seed is None else seed}",
        f"# config: {json.dumps(config_echo, sort_keys=True, separators=(',', ':'))}",
    ]
    for key, value in sorted((extra or {}).items()):
        lines.append(f"# {key}: {format_value(value)}")
    return lines


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], metadata: Sequence[str]) -> str:
    buffer = io.StringIO()
    for line in metadata:
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_text(text: str, path: str | None) -> None:
    """Write to path, or to standard output when path is None or '-'"""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.logger.info(f"Wrote {target}")


def write_csv(
    path: str | None, header: Sequence[str], rows: Iterable[Sequence[Any]], metadata: Sequence[str]
) -> None:
    write_text(render_csv(header, rows, metadata), path)


def write_json(path: str | None, payload: dict[str, Any], metadata: Sequence[str]) -> None:
    """JSON body after the metadata comment lines"""
    body = json.dumps(payload, sort_keys=True, indent=2, default=_json_default)
    write_text("\n".join(metadata) + "\n" + body + "\n", path)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def outage_rows(curve: OutageCurve, prefix: Sequence[Any] = ()) -> list[list[Any]]:
    """Rows in OUTAGE_COLUMNS order, optionally prefixed by fixed leading cells"""
    rows = []
    low_confidence = curve.low_confidence
    clamped = curve.p_out_clamped
    for i, gamma_db in enumerate(curve.grid.gamma_t_db):
        rows.append(
            [
                *prefix,
                gamma_db,
                curve.p_out[i],
                curve.ci_low[i],
                curve.ci_high[i],
                int(curve.trials[i]),
                curve.provenance.value,
                clamped[i],
                bool(low_confidence[i]),
            ]
        )
    return rows


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse an artifact back into (metadata, rows)"""
    metadata: dict[str, str] = {}
    body: list[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                metadata[key] = value
            else:
                body.append(line)
    return metadata, list(csv.DictReader(body))
