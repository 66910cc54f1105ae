"""Auxiliary integrals x_n, R_n, y_n, r_n and the algebraic identities linking them.

    x_n = (alpha/h_n)     int P_n^2     w / y
    R_n = (beta/h_n)      int P_n^2     w / (1-y)
    y_n = (alpha/h_{n-1}) int P_n P_{n-1} w / y
    r_n = (beta/h_{n-1})  int P_n P_{n-1} w / (1-y)

Every quantity is a quadrature of its own; none is defined through an
identity, so each residual below tests something.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import mpmath as mp

from .orthopoly import RecurrenceTable
from .report import THRESHOLDS, ResidualReport
from .weight_moments import FORMAT_VERSION, PrecisionContext, WeightParams, WeightQuadrature

__all__ = ["AuxiliaryTable", "aux_quantities", "identity_residuals", "poly_values", "IDENTITY_NAMES", "export_aux_csv"]

IDENTITY_NAMES = ("s11", "s14", "s15", "s21", "s24", "s26", "s27", "s29", "s210", "s32", "imp1", "imp2")


@dataclass(frozen=True)
class AuxiliaryTable:
    """Auxiliary quantities for 0 <= n <= n_max; ``y[0] = r[0] = 0``.

    ``imp1[n]`` and ``imp2[n]`` hold (gamma/h_n) int P_n^2 w/(y-t) and
    (gamma/h_{n-1}) int P_n P_{n-1} w/(y-t); both vanish identically when
    gamma = 0.  Parts not requested are ``None``.
    """

    params: WeightParams
    prec: PrecisionContext
    n_max: int
    x: tuple | None
    R: tuple | None
    y: tuple | None
    r: tuple | None
    imp1: tuple | None
    imp2: tuple | None


def poly_values(x, table: RecurrenceTable, n_max: int):
    """[P_0(x), ..., P_{n_max}(x)]."""
    vals = [mp.mpf(1)]
    p_prev, p = 0, vals[0]
    for k in range(n_max):
        p_prev, p = p, (x - table.alpha[k]) * p - table.beta[k] * p_prev
        vals.append(p)
    return vals


def _square_and_cross(table, n_max):
    def fn(x):
        P = poly_values(x, table, n_max)
        return [v * v for v in P] + [P[n] * P[n - 1] for n in range(1, n_max + 1)]

    return fn


def _scaled(values, table, n_max, factor):
    sq = values[: n_max + 1]
    cross = values[n_max + 1 :]
    diag = tuple(factor * sq[n] / table.h[n] for n in range(n_max + 1))
    off = (mp.mpf(0),) + tuple(factor * cross[n - 1] / table.h[n - 1] for n in range(1, n_max + 1))
    return diag, off


def aux_quantities(table: RecurrenceTable, quadrature: WeightQuadrature | None = None, n_max: int | None = None,
                   parts=("xy", "Rr", "imp")) -> AuxiliaryTable:
    """Evaluate the requested auxiliary families by singularity-absorbing quadrature.

    ``parts`` selects among "xy" (kind w/y), "Rr" (kind w/(1-y)) and "imp"
    (kind w/(y-t)).
    """
    params, prec = table.params, table.prec
    params.require_standing()
    n_max = table.n_max if n_max is None else n_max
    if n_max > table.n_max:
        raise ValueError("n_max exceeds recurrence table")
    quad = quadrature or WeightQuadrature(params, prec)
    fn = _square_and_cross(table, n_max)
    out = {"x": None, "R": None, "y": None, "r": None, "imp1": None, "imp2": None}
    with prec.workprec():
        a, b, g, *_ = params.mp_values()
        if "xy" in parts:
            vals = quad.integrate(fn, "w/x", label=f"xy{n_max}")
            out["x"], out["y"] = _scaled(vals, table, n_max, a)
        if "Rr" in parts:
            vals = quad.integrate(fn, "w/(1-x)", label=f"Rr{n_max}")
            out["R"], out["r"] = _scaled(vals, table, n_max, b)
        if "imp" in parts:
            if params.gamma == 0:
                zero = tuple(mp.mpf(0) for _ in range(n_max + 1))
                out["imp1"], out["imp2"] = zero, zero
            else:
                vals = quad.integrate(fn, "w/(x-t)", label=f"imp{n_max}")
                out["imp1"], out["imp2"] = _scaled(vals, table, n_max, g)
    return AuxiliaryTable(params=params, prec=prec, n_max=n_max, **out)


def identity_residuals(aux: AuxiliaryTable, table: RecurrenceTable, n: int, threshold: float | None = None) -> ResidualReport:
    """Normalized residuals of the twelve difference/algebraic identities at index n.

    Identities that need index n+1 (s14, s15, s21) are skipped when n = n_max.
    """
    if n < 1 or n > aux.n_max:
        raise IndexError(f"need 1 <= n <= {aux.n_max}, got {n}")
    thr = THRESHOLDS["identities"] if threshold is None else threshold
    rep = ResidualReport(context={"params": aux.params.as_dict(), "n": n})
    with aux.prec.workprec():
        a, b, g, _, _, t = aux.params.mp_values()
        x, R, y, r = aux.x, aux.R, aux.y, aux.r
        an, bn, p = table.alpha, table.beta, table.p1
        K = 2 * n + a + b + g
        rep.add_equation("s11", (t - 1) * R[n] - t * x[n], -(a + b + g + 2 * n + 1), thr)
        if n + 1 <= aux.n_max:
            rep.add_equation("s14", r[n + 1] + r[n], (1 - an[n]) * R[n] - b, thr)
            rep.add_equation("s15", y[n + 1] + y[n], a - an[n] * x[n], thr)
            rep.add_equation("s21", an[n], t - (t - 1) * (r[n + 1] - r[n]) + t * (y[n + 1] - y[n]), thr)
        rep.add_equation("s24", p[n], (t - 1) * r[n] - t * y[n] - n * t, thr)
        rep.add_equation("s26", bn[n] * R[n] * R[n - 1], r[n] ** 2 + b * r[n], thr)
        rep.add_equation("s27", bn[n] * x[n] * x[n - 1], y[n] ** 2 - a * y[n], thr)
        rep.add_equation("s29", bn[n] * (R[n] - x[n]) * (R[n - 1] - x[n - 1]), (r[n] - y[n] - n - g) * (r[n] - y[n] - n), thr)
        rep.add_equation(
            "s210",
            bn[n] * (R[n] * x[n - 1] + x[n] * R[n - 1]),
            2 * r[n] * y[n] + (2 * n + b + g) * r[n] - (2 * n + a + g) * y[n] - n * (n + g),
            thr,
        )
        rep.add_equation(
            "s32",
            n * b + n * (n + g) * t + (t - 1) * mp.fsum(R[:n]),
            K * (t - 1) * r[n] - K * t * y[n],
            thr,
        )
        rep.add_equation("imp1", aux.imp1[n], R[n] - x[n], thr)
        rep.add_equation("imp2", aux.imp2[n], r[n] - y[n] - n, thr)
    return rep


def export_aux_csv(aux: AuxiliaryTable, config: dict | None = None, digits: int | None = None) -> str:
    """JSON header line, then CSV rows n, x_n, R_n, y_n, r_n."""
    digits = digits or aux.prec.precision_bits // 4
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "auxiliary_table",
        "params": aux.params.as_dict(),
        "precision": aux.prec.as_dict(),
        "n_max": aux.n_max,
        "config": config or {},
    }
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "x_n", "R_n", "y_n", "r_n"])
    for n in range(aux.n_max + 1):
        w.writerow([n] + [mp.nstr(v[n], digits) for v in (aux.x, aux.R, aux.y, aux.r)])
    return buf.getvalue()
