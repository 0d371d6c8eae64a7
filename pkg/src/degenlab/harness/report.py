"""Report rows, verdicts and CSV emission."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import IoError
from ..scheme import Field
from .config import Scenario, dump_scenario

REPORT_COLUMNS = ("experiment", "n", "h", "quantity", "value", "threshold", "pass")


class ReportVerdict(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INFORMATIONAL = "Informational"


@dataclass(frozen=True)
class Threshold:
    """A declared acceptance bound: ``<=``, ``>=``, ``<`` or ``in`` [lo, hi]."""

    op: str
    lo: float
    hi: Optional[float] = None

    def __post_init__(self):
        if self.op not in ("<=", ">=", "<", "in", "=="):
            raise ValueError(f"unknown threshold operator {self.op!r}")
        if self.op == "in" and (self.hi is None or self.hi < self.lo):
            raise ValueError("an 'in' threshold needs lo <= hi")

    def check(self, value) -> bool:
        if isinstance(value, str):
            return self.op == "==" and value == self.lo
        v = float(value)
        if self.op == "<=":
            return v <= self.lo
        if self.op == ">=":
            return v >= self.lo
        if self.op == "<":
            return v < self.lo
        if self.op == "==":
            return v == self.lo
        return self.lo <= v <= self.hi

    def __str__(self):
        if self.op == "in":
            return f"in [{self.lo:g}, {self.hi:g}]"
        if isinstance(self.lo, str):
            return f"== {self.lo}"
        return f"{self.op} {self.lo:g}"


@dataclass
class Row:
    experiment: str
    n: Optional[int]
    h: Optional[float]
    quantity: str
    value: object
    threshold: Optional[Threshold] = None
    passed: Optional[bool] = None

    def __post_init__(self):
        if self.threshold is not None and self.passed is None:
            self.passed = self.threshold.check(self.value)


@dataclass
class Report:
    scenario: Scenario
    rows: list
    verdict: ReportVerdict
    wall_time: float
    fields: dict = field(default_factory=dict, repr=False)  # tag -> Field
    errors: list = field(default_factory=list)

    def __post_init__(self):
        if not self.rows:
            raise ValueError("a report needs at least one row")

    def row(self, quantity, n=None):
        for r in self.rows:
            if r.quantity == quantity and (n is None or r.n == n):
                return r
        raise KeyError(f"no row {quantity!r} for n={n}")

    def values(self, quantity):
        return [r.value for r in self.rows if r.quantity == quantity]


def decide_verdict(rows, errors=()) -> ReportVerdict:
    if errors or any(r.passed is False for r in rows):
        return ReportVerdict.FAIL
    if any(r.threshold is not None for r in rows):
        return ReportVerdict.PASS
    return ReportVerdict.INFORMATIONAL


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        w.writerow([r.experiment, _fmt(r.n), _fmt(r.h), r.quantity, _fmt(r.value),
                    "" if r.threshold is None else str(r.threshold), _fmt(r.passed)])
    return buf.getvalue()


def field_csv(f: Field) -> str:
    grid = f.grid
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    xs = ["x"] if grid.dim == 1 else [f"x{k}" for k in range(grid.dim)]
    w.writerow(["node_id", *xs, "d", "u"])
    for i in range(grid.size):
        w.writerow([i, *(_fmt(c) for c in grid.coords[i]), _fmt(grid.d[i]), _fmt(f.values[i])])
    return buf.getvalue()


def meta_text(report: Report) -> str:
    lines = [f"experiment = {report.scenario.experiment.value}",
             f"seed = {report.scenario.seed}",
             f"verdict = {report.verdict.value}",
             f"wall_time_s = {report.wall_time:.6f}"]
    lines += [f"error = {e}" for e in report.errors]
    return "\n".join(lines) + "\n\n# resolved config\n" + dump_scenario(report.scenario)


def write_report(report: Report, path) -> None:
    """Write report.csv, fields/<tag>.csv and meta.txt under the directory ``path``."""
    root = Path(path)
    try:
        (root / "fields").mkdir(parents=True, exist_ok=True)
        (root / "report.csv").write_text(report_csv(report))
        for tag, f in report.fields.items():
            (root / "fields" / f"{tag}.csv").write_text(field_csv(f))
        (root / "meta.txt").write_text(meta_text(report))
    except OSError as exc:
        raise IoError(f"cannot write report to {root}: {exc.strerror or exc}") from None
