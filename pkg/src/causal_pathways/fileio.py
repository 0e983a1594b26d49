"""Small file helpers shared by the CLI and the model/graph formats."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path


class FormatError(ValueError):
    """A text file did not follow its expected format; carries the line number."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_key_values(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(path, lineno, f"expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise FormatError(path, lineno, "empty key")
            out[key] = value
    return out


def write_csv_rows(path, header, rows) -> None:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    atomic_write(path, buf.getvalue())
