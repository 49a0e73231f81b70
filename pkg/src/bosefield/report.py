"""Machine-readable verification reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

__all__ = ["SCHEMA_VERSION", "CheckEntry", "ConvergenceTable", "VerificationReport"]

SCHEMA_VERSION = 1


def _num(x):
    """JSON-safe float: non-finite values become strings."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _unnum(x):
    if isinstance(x, str):
        return float(x)
    return x


@dataclass
class CheckEntry:
    """One measured check.

    ``comparison`` is ``"<="`` when the measured value must not exceed the
    bound and ``">="`` for counterexample probes that must reach it.
    """

    suite: str
    check: str
    description: str
    anchor: str
    measured: float
    bound: float
    passed: bool
    comparison: str = "<="
    runtime_ms: float = 0.0

    def to_dict(self, with_runtime: bool = True) -> dict[str, Any]:
        d = asdict(self)
        d["measured"], d["bound"] = _num(self.measured), _num(self.bound)
        if not with_runtime:
            d.pop("runtime_ms")
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CheckEntry":
        d = dict(d)
        d["measured"], d["bound"] = _unnum(d["measured"]), _unnum(d["bound"])
        return cls(**d)


@dataclass
class ConvergenceTable:
    """Rows ``(parameter, error, ratio)`` of a convergence study."""

    study: str
    parameter: str
    rows: list[tuple[float, float, float | None]]
    monotone: bool
    notes: str = ""
    bounds: list[float] | None = None

    def to_text(self) -> str:
        head = f"{self.parameter:>12}  {'error':>12}  {'ratio':>10}"
        lines = [f"# {self.study}" + (f": {self.notes}" if self.notes else ""),
                 head + (f"  {'bound':>12}" if self.bounds else "")]
        for i, (p, e, r) in enumerate(self.rows):
            rs = "" if r is None else f"{r:10.3f}"
            line = f"{p:>12g}  {e:12.4e}  {rs:>10}"
            if self.bounds:
                line += f"  {self.bounds[i]:12.4e}"
            lines.append(line)
        lines.append(f"monotone decrease: {'yes' if self.monotone else 'no'}")
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {"study": self.study, "parameter": self.parameter, "monotone": self.monotone,
                "notes": self.notes,
                "rows": [[_num(p), _num(e), _num(r)] for p, e, r in self.rows],
                "bounds": None if self.bounds is None else [_num(b) for b in self.bounds]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ConvergenceTable":
        rows = [tuple(_unnum(v) for v in row) for row in d["rows"]]
        bounds = d.get("bounds")
        bounds = None if bounds is None else [_unnum(b) for b in bounds]
        return cls(d["study"], d["parameter"], rows, d["monotone"], d.get("notes", ""), bounds)


@dataclass
class VerificationReport:
    config: dict[str, Any]
    entries: list[CheckEntry] = field(default_factory=list)
    tables: list[ConvergenceTable] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @property
    def summary(self) -> dict[str, int]:
        passed = sum(e.passed for e in self.entries)
        return {"total": len(self.entries), "passed": passed, "failed": len(self.entries) - passed}

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def suites(self) -> list[str]:
        return list(dict.fromkeys(e.suite for e in self.entries))

    def to_dict(self, with_runtime: bool = True) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "entries": [e.to_dict(with_runtime) for e in self.entries],
            "tables": [t.to_dict() for t in self.tables],
            "summary": self.summary,
        }

    def payload(self) -> str:
        """Canonical JSON without timings, used for determinism comparisons."""
        return json.dumps(self.to_dict(with_runtime=False), sort_keys=True)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VerificationReport":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        rep = cls(d["config"], [CheckEntry.from_dict(e) for e in d["entries"]],
                  [ConvergenceTable.from_dict(t) for t in d.get("tables", [])], version)
        if d.get("summary") not in (None, rep.summary):
            raise ValueError("report summary is inconsistent with its entries")
        return rep

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    def format_lines(self) -> list[str]:
        out = []
        for e in self.entries:
            flag = "PASS" if e.passed else "FAIL"
            out.append(f"{flag}  {e.suite}/{e.check}: {e.measured:.3e} {e.comparison} {e.bound:.1e}")
        s = self.summary
        out.append(f"{s['passed']}/{s['total']} checks passed, {s['failed']} failed")
        return out
