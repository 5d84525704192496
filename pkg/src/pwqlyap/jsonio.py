"""Canonical JSON serialization and atomic file output.

All JSON emitted by the package goes through this module so that identical
data produces byte-identical files: dict keys keep their insertion order
(callers build them in a documented, fixed order), floats are rendered with
17 significant digits (enough to round-trip IEEE doubles), and files are
written to a temporary name and renamed into place so readers never observe
a partial file.
"""

from __future__ import annotations

import json
import math
import os
import tempfile


def _render(value, out: list) -> None:
    if value is None or isinstance(value, bool):
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(repr(value))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float not representable in JSON: {value}")
        # Normalize -0.0 so equal matrices serialize identically.
        text = format(value + 0.0, ".17g")
        out.append(text)
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        out.append("{")
        for k, (key, item) in enumerate(value.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {type(key)}")
            if k:
                out.append(", ")
            out.append(json.dumps(key))
            out.append(": ")
            _render(item, out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for k, item in enumerate(value):
            if k:
                out.append(", ")
            _render(item, out)
        out.append("]")
    else:
        raise TypeError(f"not JSON-serializable: {type(value)}")


def dumps(value) -> str:
    """Render ``value`` as canonical JSON text (keys in insertion order)."""
    out: list = []
    _render(value, out)
    out.append("\n")
    return "".join(out)


def loads(text: str):
    return json.loads(text)


def write_text(path: str, text: str) -> None:
    """Atomically write text: temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        # mkstemp creates 0600 files; grant the usual umask-filtered mode.
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_file(path: str, value) -> None:
    """Atomically write canonical JSON (see write_text)."""
    write_text(path, dumps(value))


def read_file(path: str):
    with open(path) as handle:
        return json.load(handle)
