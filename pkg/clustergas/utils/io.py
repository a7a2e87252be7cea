"""Output tables with provenance headers.

Every file starts with a header (config hash, seed, code version and,
unless disabled, the wall-clock time). CSV headers are `#`-prefixed lines;
JSON-lines files carry the header as their first object. Floats are written
with 17 significant digits so that values survive a round trip exactly.
"""

__all__ = [
    "OutputFormat",
    "make_header",
    "format_value",
    "write_table",
    "read_table",
    "trajectory_rows",
    "write_trajectories",
]

import datetime
import json
import logging
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

import numpy as np

from clustergas.types import RunRecord

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "jsonl"]


def make_header(config_hash: str, seed: int, version: str, timestamp: bool = True, **extra: Any) -> dict[str, Any]:
    header: dict[str, Any] = {"config_hash": config_hash, "seed": seed, "version": version}
    if timestamp:
        header["wall_clock"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    header.update(extra)
    return header


def format_value(value: Any) -> str:
    """Renders one cell; floats use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if np.isnan(x):
            return "NaN"
        if np.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return f"{x:.17g}"
    if value is None:
        return ""
    return str(value)


def _json_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_, int, np.integer, float, np.floating)):
        return format_value(value)
    if value is None:
        return "null"
    return json.dumps(str(value))


def write_table(
    path: str | Path,
    rows: Sequence[Mapping[str, Any]],
    header: Mapping[str, Any],
    fmt: OutputFormat = "csv",
    columns: Sequence[str] | None = None,
) -> Path:
    """Writes rows under a provenance header.

    Args:
        path: Target file; the suffix is replaced to match `fmt`.
        rows: Records with identical keys.
        header: Provenance fields.
        fmt: `csv` or `jsonl`.
        columns: Column order; defaults to the first row's keys.

    Returns:
        The path written.
    """
    path = Path(path).with_suffix(f".{fmt}")
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(columns) if columns is not None else (list(rows[0].keys()) if rows else [])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        match fmt:
            case "csv":
                for key, value in header.items():
                    f.write(f"# {key}: {format_value(value)}\n")
                f.write(",".join(cols) + "\n")
                for row in rows:
                    f.write(",".join(format_value(row.get(c)) for c in cols) + "\n")
            case "jsonl":
                f.write(json.dumps({k: format_value(v) for k, v in header.items()}, sort_keys=False) + "\n")
                for row in rows:
                    f.write("{" + ", ".join(f"{json.dumps(c)}: {_json_value(row.get(c))}" for c in cols) + "}\n")
            case _:
                raise ValueError(f"Unsupported output format: {fmt}")
    logger.debug("Wrote %d rows to %s", len(rows), path)
    return path


def read_table(path: str | Path) -> tuple[dict[str, str], list[dict[str, Any]]]:
    """Reads a table written by `write_table`, returning its header and rows."""
    path = Path(path)
    header: dict[str, str] = {}
    rows: list[dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if path.suffix == ".jsonl":
        header = json.loads(lines[0]) if lines else {}
        rows = [json.loads(line) for line in lines[1:]]
        return header, rows
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        else:
            body.append(line)
    if not body:
        return header, rows
    cols = body[0].split(",")
    for line in body[1:]:
        rows.append(dict(zip(cols, line.split(","))))
    return header, rows


def trajectory_rows(record: RunRecord) -> list[dict[str, Any]]:
    """One row per breakpoint of every particle."""
    rows = []
    dim = record.config.dim
    for tr in record.trajectories:
        for k in range(len(tr.times)):
            row: dict[str, Any] = {"run_id": record.run_id, "particle": tr.particle_id, "t": float(tr.times[k])}
            for a in range(dim):
                row[f"x{a}"] = float(tr.positions[k, a])
            for a in range(dim):
                row[f"v{a}"] = float(tr.velocities[k, a])
            rows.append(row)
    return rows


def write_trajectories(
    out_dir: str | Path,
    records: Sequence[RunRecord],
    header: Mapping[str, Any],
    fmt: OutputFormat = "csv",
) -> list[Path]:
    return [
        write_table(Path(out_dir) / f"trajectories_{record.run_id:06d}", trajectory_rows(record), header, fmt)
        for record in records
    ]
