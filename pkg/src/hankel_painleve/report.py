"""Named residuals with pass/fail status, and their JSON / CSV forms."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import mpmath as mp

PASS = "PASS"
FAIL = "FAIL"
SKIPPED = "SKIPPED-PRECISION"
SINGULAR = "SKIPPED-SINGULAR"

# Default pass thresholds per identity class; overridable from the CLI.
THRESHOLDS = {
    "determinant": 1e-40,
    "orthogonality": 1e-40,
    "identities": 1e-40,
    "compatibility": 1e-35,
    "expansion": 1e-6,
    "pn_ode": 1e-25,
    "differential": 1e-25,
    "propositions": 1e-25,
    "sod": 1e-20,
    "sigma_pvi": 1e-20,
    "sn_pvi": 1e-15,
    "barnes": 1e-40,
    "edge_constant": 1e-30,
}


def normalized(lhs, rhs):
    """(|lhs - rhs| / max(1, |lhs|, |rhs|), scale)."""
    scale = max(mp.mpf(1), abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale, scale


def term_normalized(terms, floor=0):
    """|sum(terms)| / max(floor, max|term|); zero when every term vanishes."""
    scale = max([abs(x) for x in terms] + [floor])
    if scale == 0:
        return mp.mpf(0), scale
    return abs(mp.fsum(terms)) / scale, scale


@dataclass
class Residual:
    residual: object
    scale: object
    threshold: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def as_dict(self) -> dict:
        return {
            "residual": float(self.residual) if self.residual is not None else None,
            "scale": float(self.scale) if self.scale is not None else None,
            "pass": self.passed,
            "status": self.status,
        }


@dataclass
class ResidualReport:
    """Residuals for one (params, n, t) cell."""

    context: dict = field(default_factory=dict)
    entries: dict = field(default_factory=dict)

    def add(self, name, residual, scale, threshold):
        status = PASS if residual < threshold else FAIL
        self.entries[name] = Residual(residual, scale, threshold, status)
        return self.entries[name]

    def add_equation(self, name, lhs, rhs, threshold):
        res, scale = normalized(lhs, rhs)
        return self.add(name, res, scale, threshold)

    def add_terms(self, name, terms, threshold):
        res, scale = term_normalized(terms)
        return self.add(name, res, scale, threshold)

    def skip(self, name, threshold, reason="", status=SKIPPED):
        self.entries[name] = Residual(None, None, threshold, status)
        if reason:
            self.context.setdefault("skipped", {})[name] = reason

    def __getitem__(self, name) -> Residual:
        return self.entries[name]

    def __iter__(self):
        return iter(self.entries.items())

    @property
    def passed(self) -> bool:
        """No failures and no precision skips."""
        return all(e.status in (PASS, SINGULAR) for e in self.entries.values())

    @property
    def failed(self) -> bool:
        return any(e.status == FAIL for e in self.entries.values())

    @property
    def skipped(self) -> bool:
        """True if any entry was skipped for lack of precision (singular points do not count)."""
        return any(e.status == SKIPPED for e in self.entries.values())

    def worst(self):
        vals = [e.residual for e in self.entries.values() if e.residual is not None]
        return max(vals) if vals else None

    def to_json(self) -> str:
        return json.dumps({k: v.as_dict() for k, v in self.entries.items()}, sort_keys=True)


CSV_COLUMNS = ["alpha", "beta", "gamma", "A", "B", "n", "t", "identity", "residual", "pass"]


def residual_rows(params, n, report: ResidualReport, t=None):
    p = params.as_dict()
    t = p["t"] if t is None else t
    for name, e in report:
        res = "" if e.residual is None else mp.nstr(e.residual, 6)
        yield [p["alpha"], p["beta"], p["gamma"], p["A"], p["B"], n, t, name, res, e.status]


def rows_to_csv(header: dict, rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
