"""Append-only store of run records.

Each run appends one JSON line to ``<root>/runs/<run_id>.jsonl``. The
``run_id`` hashes the canonical config together with the command, its options
and the package version, so re-running identical inputs lands in the same file.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from l2sp import __version__


def _clean(obj):
    # NaN/inf are not JSON; store them as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def canonical_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def make_run_id(config, command, options=None, version=__version__):
    payload = {"config": config, "command": command, "options": options or {}, "version": version}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:20]


@dataclass
class RunRecord:
    run_id: str
    command: str
    config: dict | None
    options: dict
    outputs: list
    diagnostics: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    @classmethod
    def create(cls, command, config, options, outputs, diagnostics=()):
        rid = make_run_id(config, command, options)
        return cls(rid, command, config, dict(options), list(outputs), list(diagnostics))

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "timestamp": self.timestamp,
            "version": self.version,
            "command": self.command,
            "options": self.options,
            "config": self.config,
            "outputs": self.outputs,
            "diagnostics": self.diagnostics,
        }


def append_record(root, record):
    """Append ``record`` to the store under ``root``; returns the file path."""
    runs = os.path.join(root, "runs")
    os.makedirs(runs, exist_ok=True)
    path = os.path.join(runs, f"{record.run_id}.jsonl")
    line = json.dumps(_clean(record.to_dict()), sort_keys=True, allow_nan=False)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(line + "\n")
    return path


def read_records(root, run_id):
    path = os.path.join(root, "runs", f"{run_id}.jsonl")
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
