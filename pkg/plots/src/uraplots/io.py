"""Loading and validating simulator result tables.

A result set is a CSV of sweep rows plus a JSON sidecar (same path with a
``.json`` extension) embedding the fully resolved configuration the sweep
ran with.  Rows are joined with their sidecar so series can be grouped by
any configuration key.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

SCHEMA_VERSION = 1

REQUIRED_COLUMNS = [
    "config_hash",
    "k_a",
    "ebn0_data_db",
    "ebn0_overall_db",
    "trials",
    "miss_rate",
    "miss_ci_lo",
    "miss_ci_hi",
    "pupe",
    "pupe_ci_lo",
    "pupe_ci_hi",
    "undetected_errors",
]

_INT_COLUMNS = {"k_a", "trials", "undetected_errors"}


@dataclass
class ResultSet:
    """Parsed sweep rows, each annotated with its resolved config dict."""

    rows: list[dict]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("result set is empty")

    def group_by(self, keys: list[str]) -> dict[tuple, list[dict]]:
        """Partition rows by dotted config keys (e.g. ``polar.list_size``)."""
        groups: dict[tuple, list[dict]] = {}
        for row in self.rows:
            label = tuple(config_value(row["config"], k) for k in keys)
            groups.setdefault(label, []).append(row)
        return groups


def config_value(config: dict, dotted_key: str):
    node = config
    for part in dotted_key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KeyError(f"config key {dotted_key!r} not found")
        node = node[part]
    return node


def load_results(csv_paths: list[str]) -> ResultSet:
    """Read one or more CSV tables with their JSON sidecars."""
    if not csv_paths:
        raise ValueError("no input files given")
    rows = []
    for path in csv_paths:
        sidecar_path = os.path.splitext(path)[0] + ".json"
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        if sidecar.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"{sidecar_path}: schema version "
                f"{sidecar.get('schema_version')!r}, expected {SCHEMA_VERSION}"
            )
        config = sidecar["config"]
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(REQUIRED_COLUMNS) - set(reader.fieldnames or [])
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for raw in reader:
                row = {
                    k: (int(raw[k]) if k in _INT_COLUMNS else _parse(raw[k]))
                    for k in REQUIRED_COLUMNS
                }
                _check_ci(row, "miss_rate", "miss_ci_lo", "miss_ci_hi", path)
                _check_ci(row, "pupe", "pupe_ci_lo", "pupe_ci_hi", path)
                row["config"] = config
                rows.append(row)
    return ResultSet(rows)


def _parse(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def _check_ci(row, point, lo, hi, path):
    if not (row[lo] - 1e-12 <= row[point] <= row[hi] + 1e-12):
        raise ValueError(
            f"{path}: confidence interval [{row[lo]}, {row[hi]}] does not "
            f"bracket {point}={row[point]}"
        )
