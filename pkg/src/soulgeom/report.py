"""Check records, reports and their JSON / CSV serialisation."""

from __future__ import annotations

import csv
import json
import math
import numbers
import os
from dataclasses import asdict, dataclass, field

VERSION = "0.1.0"

# rules: |obs - exp| <= tol ("abs"), <= tol |exp| ("rel"), obs <= exp + tol ("le"),
# obs >= exp - tol ("ge"), obs == exp ("eq"); "info" records never fail.
RULES = ("abs", "rel", "le", "ge", "eq", "info")


def _clean(x):
    """JSON-safe value: floats stay floats, non-finite become strings."""
    if isinstance(x, bool) or x is None:
        return x
    if getattr(x, "ndim", 0):
        return _clean(x.tolist())
    if getattr(x, "dtype", None) is not None and x.dtype.kind == "b":
        return bool(x)
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, float) or hasattr(x, "__float__"):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class Check:
    id: str
    anchor: str
    expected: object
    observed: object
    tol: float
    rule: str = "abs"
    passed: bool | None = None
    note: str = ""

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        self.expected = _clean(self.expected)
        self.observed = _clean(self.observed)
        self.tol = _clean(self.tol)
        if self.passed is None and self.observed is not None:
            self.passed = evaluate(self.rule, self.expected, self.observed, self.tol)

    @property
    def indeterminate(self) -> bool:
        return self.passed is None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "anchor": self.anchor,
            "expected": self.expected,
            "observed": self.observed,
            "tol": self.tol,
            "pass": self.passed,
            "rule": self.rule,
        }
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(d["id"], d["anchor"], d["expected"], d["observed"], d["tol"], d.get("rule", "abs"), d["pass"], d.get("note", ""))


def evaluate(rule: str, expected, observed, tol) -> bool:
    if rule == "info":
        return True
    if isinstance(observed, str) or isinstance(expected, str):
        return False
    if rule == "eq":
        return observed == expected
    if rule == "abs":
        return abs(observed - expected) <= tol
    if rule == "rel":
        return abs(observed - expected) <= tol * abs(expected)
    if rule == "le":
        return observed <= expected + tol
    if rule == "ge":
        return observed >= expected - tol
    raise ValueError(rule)


def indeterminate(id: str, anchor: str, expected, tol, note: str) -> Check:
    return Check(id, anchor, expected, None, tol, "abs", None, note)


@dataclass
class Report:
    command: str
    config: dict
    checks: list[Check] = field(default_factory=list)
    seconds: float | None = None
    tables: dict = field(default_factory=dict)
    version: str = VERSION

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        self.checks.extend(checks)

    @property
    def summary(self) -> dict:
        return {
            "pass": sum(1 for c in self.checks if c.passed is True),
            "fail": sum(1 for c in self.checks if c.passed is False),
            "indeterminate": sum(1 for c in self.checks if c.passed is None),
        }

    def failing(self) -> list[str]:
        return [c.id for c in self.checks if c.passed is False]

    def ok(self, allowance: int = 0) -> bool:
        s = self.summary
        return s["fail"] == 0 and s["indeterminate"] <= allowance

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary,
            "seconds": self.seconds,
            "tables": self.tables,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        d = json.loads(text)
        rep = cls(d["command"], d["config"], [Check.from_dict(c) for c in d["checks"]], d["seconds"], d.get("tables", {}), d["version"])
        if rep.summary != d["summary"]:
            raise ValueError("summary does not match the check records")
        return rep


def emit(report: Report, out_dir: str, fmt: str = "json") -> list[str]:
    """Write ``report.json`` and/or one CSV per table; returns the written paths.

    Raises :class:`OSError` when the directory cannot be written.
    """
    if fmt not in ("json", "csv", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, f"{report.command}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        written.append(path)
    if fmt in ("csv", "both"):
        for name, table in report.tables.items():
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(table["columns"])
                for row in table["rows"]:
                    w.writerow([repr(v) if isinstance(v, float) else v for v in row])
            written.append(path)
    return written


def table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [_clean(list(r)) for r in rows]}


def as_plain(obj):
    """Dataclass / numpy values to JSON-friendly Python objects."""
    if hasattr(obj, "__dataclass_fields__"):
        return as_plain(asdict(obj))
    if isinstance(obj, dict):
        return {k: as_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return as_plain(obj.tolist())
    return _clean(obj)
