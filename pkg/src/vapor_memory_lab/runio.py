"""Run artifacts: CSV/JSON writers with stable formatting, atomic writes,
and the run manifest.

CSV files are UTF-8 with a header row and '.' decimal separator; JSON files
use sorted keys.  Data files are written to a temporary name and renamed, so
interrupted runs never leave corrupt outputs.
"""

import csv
import json
import os
import time

import numpy as np

from . import __version__
from .errors import ConfigError


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, header, columns):
    """Write named columns (equal-length 1D arrays) as CSV."""
    columns = [np.asarray(c) for c in columns]
    if len({c.size for c in columns}) != 1:
        raise ValueError("all CSV columns must have the same length")
    rows = []
    rows.append(",".join(header))
    for i in range(columns[0].size):
        rows.append(",".join(repr(float(c[i])) for c in columns))
    _atomic_write(path, "\n".join(rows) + "\n")
    return path


def read_csv_columns(path, expected_header):
    """Read a CSV written by write_csv, checking the schema."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        if [h.strip() for h in header[: len(expected_header)]] != list(expected_header):
            raise ConfigError(
                f"{path}: expected header {','.join(expected_header)}, "
                f"found {','.join(header)}"
            )
        data = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                data.append([float(v) for v in row[: len(expected_header)]])
            except ValueError as exc:
                raise ConfigError(f"{path} row {row_number}: {exc}") from exc
    if not data:
        raise ConfigError(f"{path}: no data rows")
    arr = np.array(data)
    return [arr[:, k] for k in range(len(expected_header))]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def write_json(path, record):
    _atomic_write(path, json.dumps(_jsonable(record), sort_keys=True, indent=2) + "\n")
    return path


class RunManifest:
    """Collects inputs, outputs, and statuses of one command invocation."""

    def __init__(self, command, config_hash):
        self.command = command
        self.config_hash = config_hash
        self.inputs = []
        self.outputs = []
        self.statuses = {}
        self._start = time.monotonic()

    def add_input(self, path):
        self.inputs.append(str(path))

    def add_output(self, path):
        self.outputs.append(str(path))

    def set_status(self, step, status):
        self.statuses[step] = status

    def write(self, directory):
        record = {
            "tool_version": __version__,
            "command": self.command,
            "config_hash": self.config_hash,
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "wall_clock_s": time.monotonic() - self._start,
            "statuses": self.statuses,
        }
        return write_json(os.path.join(directory, "manifest.json"), record)


def run_directory(base, command, config_hash):
    """Run directory named by the command and config-hash prefix."""
    path = os.path.join(base, f"{command}-{config_hash[:8]}")
    os.makedirs(path, exist_ok=True)
    return path


__all__ = [
    "write_csv",
    "read_csv_columns",
    "write_json",
    "RunManifest",
    "run_directory",
]
