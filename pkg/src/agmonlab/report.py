"""Verification reports: one named check with both sides, margin and verdict."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def scale_of(*values) -> float:
    """Tolerance scale max(1, |values|...) used by every relative check."""
    finite = [abs(float(v)) for v in values if math.isfinite(float(v))]
    return max([1.0] + finite)


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class VerificationReport:
    """Outcome of one check ``lhs <= rhs`` (or ``lhs == rhs``).

    ``margin`` is always rhs - lhs. For inequalities the check passes when
    margin >= -tol; for identities when |margin| <= tol.
    """

    check: str
    lhs: float
    rhs: float
    margin: float
    tol: float
    passed: bool
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @classmethod
    def inequality(cls, check, lhs, rhs, rel_tol, notes=None, **details):
        lhs, rhs = float(lhs), float(rhs)
        tol = rel_tol * scale_of(lhs, rhs)
        margin = rhs - lhs
        return cls(check, lhs, rhs, margin, tol, bool(margin >= -tol), list(notes or []), details)

    @classmethod
    def identity(cls, check, lhs, rhs, rel_tol, notes=None, **details):
        lhs, rhs = float(lhs), float(rhs)
        tol = rel_tol * scale_of(lhs, rhs)
        margin = rhs - lhs
        return cls(check, lhs, rhs, margin, tol, bool(abs(margin) <= tol), list(notes or []), details)

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "margin": _num(self.margin),
            "tol": _num(self.tol),
            "pass": self.passed,
            "notes": [str(n) for n in self.notes],
        }

    @classmethod
    def from_dict(cls, doc) -> "VerificationReport":
        def val(k):
            v = doc.get(k)
            return math.nan if v is None else float(v)
        return cls(doc["check"], val("lhs"), val("rhs"), val("margin"), val("tol"),
                   bool(doc["pass"]), list(doc.get("notes", [])))

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.check}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} margin={self.margin:.3g} tol={self.tol:.2g}"
