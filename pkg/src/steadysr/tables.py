"""CSV persistence with an embedded JSON header.

Every output file starts with a single '#'-prefixed line holding a JSON
object (resolved configuration, seed, artifact version, timestamps and
timings), followed by a plain CSV body. Bodies are deterministic for a
fixed configuration and master seed: floats are written with shortest
round-trip repr and anything time-dependent stays in the header. Files are
written to a temporary sibling and atomically renamed, so interrupted runs
never leave partial rows behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from importlib import metadata

ARTIFACT_NAME = "steadysr"


def artifact_version() -> str:
    try:
        return metadata.version(ARTIFACT_NAME)
    except metadata.PackageNotFoundError:
        return "unknown"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (int,)):
        return str(value)
    text = str(value)
    if "," in text or "\n" in text:
        raise ValueError(f"cell value {text!r} would corrupt the CSV body")
    return text


def render_body(columns: list[str], rows: list[dict]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def write_table(path: str, header: dict, columns: list[str],
                rows: list[dict]) -> None:
    """Atomically write '# <json-header>' followed by the CSV body."""
    payload = dict(header)
    payload.setdefault("artifact", {"name": ARTIFACT_NAME,
                                    "version": artifact_version()})
    text = "# " + json.dumps(payload, sort_keys=True, default=str) + "\n"
    text += render_body(columns, rows)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_table(path: str) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of write_table; returns (header, columns, raw string rows)."""
    header: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                header = json.loads(line.lstrip("# "))
                continue
            if not columns:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    return header, columns, rows


def body_bytes(path: str) -> bytes:
    """The CSV body (everything after the header comments), for
    byte-identity comparisons."""
    out = []
    with open(path, "rb") as fh:
        for line in fh:
            if not line.startswith(b"#"):
                out.append(line)
    return b"".join(out)
