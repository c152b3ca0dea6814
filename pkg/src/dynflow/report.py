"""Two-column CSV reports and plain tabular CSV output.

Reals are written with 17 significant digits so every value round-trips.
Nothing time- or host-dependent is recorded, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value) + 0.0  # drops the sign of zero
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(value)


@dataclass
class Report:
    """Ordered ``(name, value)`` rows preceded by provenance rows."""

    command: str
    rows: list[tuple[str, object]] = field(default_factory=list)
    provenance: list[tuple[str, object]] = field(default_factory=list)

    def stamp(self) -> None:
        """Record artifact version and command as the first provenance rows."""
        self.provenance[:0] = [("provenance.version", __version__), ("provenance.command", self.command)]

    def note(self, name: str, value) -> None:
        self.provenance.append((f"provenance.{name}", value))

    def add(self, name: str, value) -> None:
        self.rows.append((name, value))

    def extend(self, rows: Iterable[tuple[str, object]], prefix: str = "") -> None:
        for name, value in rows:
            self.rows.append((prefix + name, value))

    def all_rows(self) -> list[tuple[str, object]]:
        return list(self.provenance) + list(self.rows)

    def verdicts(self) -> dict[str, bool]:
        return {n: bool(v) for n, v in self.rows if isinstance(v, (bool, np.bool_))}


def write_table(path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def write_report(report: Report, path) -> None:
    write_table(path, ("name", "value"), report.all_rows())


def read_report(path) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["name", "value"]:
            raise ValueError(f"{path}: not a report file")
        return [(r[0], r[1]) for r in reader]
