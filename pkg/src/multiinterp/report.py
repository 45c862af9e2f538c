"""Check reports and deterministic CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

CHECK_COLUMNS = ("check_name", "instance_id", "lhs", "rhs", "ratio", "tolerance", "pass")


def format_number(x) -> str:
    """Fixed 12 significant digits; scientific notation outside [1e-6, 1e6)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    if abs(x) >= 1e6 or abs(x) < 1e-6:
        return f"{x:.11e}"
    return f"{x:.12g}"


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


@dataclass
class CheckRow:
    check_name: str
    instance_id: str
    lhs: float
    rhs: float
    ratio: float
    tolerance: float
    passed: bool

    def as_tuple(self):
        return (self.check_name, self.instance_id, self.lhs, self.rhs, self.ratio, self.tolerance, self.passed)


@dataclass
class Report:
    name: str
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    # check names whose rows are reported but do not decide the verdict
    informational: set = field(default_factory=set)

    def add(self, instance_id, lhs, rhs, ratio, tolerance, passed, check_name=None):
        self.rows.append(CheckRow(check_name or self.name, str(instance_id), float(lhs), float(rhs),
                                  float(ratio), float(tolerance), bool(passed)))
        return self.rows[-1]

    def extend(self, other: "Report"):
        self.rows.extend(other.rows)
        self.informational |= other.informational
        for k, v in other.notes.items():
            self.notes[f"{other.name}.{k}"] = v
        return self

    @property
    def passed(self) -> bool:
        return bool(self.rows) and not self.failures

    @property
    def failures(self):
        return [r for r in self.rows if not r.passed and r.check_name not in self.informational]

    @property
    def worst_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=math.nan)

    def to_csv(self) -> str:
        return to_csv(CHECK_COLUMNS, (r.as_tuple() for r in self.rows))

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        counted = [r for r in self.rows if r.check_name not in self.informational]
        line = f"{status} {self.name}: {sum(r.passed for r in counted)}/{len(counted)} rows"
        extra = len(self.rows) - len(counted)
        if extra:
            line += f" (+{extra} informational)"
        return line
