"""Ladder-operator coefficients A_n(z), B_n(z) off the support, and their checks.

    A_n(z) = x_n/z - R_n/(z-1) + a_n(z),  a_n(z) = (gamma/h_n) int P_n^2 w / ((z-y)(y-t)) dy
    B_n(z) = y_n/z - r_n/(z-1) + b_n(z),  b_n(z) = (gamma/h_{n-1}) int P_n P_{n-1} w / ((z-y)(y-t)) dy

z-derivatives are taken under the integral sign, so no numerical
differentiation enters the second-order equation for P_n.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp

from .auxiliary import poly_values
from .orthopoly import eval_monic_poly_derivs
from .pipeline import Cell
from .report import THRESHOLDS, ResidualReport, term_normalized

__all__ = [
    "LadderValues",
    "LadderEval",
    "ladder_values",
    "eval_ladder",
    "compatibility_residuals",
    "expansion_coefficients",
    "expansion_values",
    "expansion_residuals",
    "pn_ode_residual",
    "v0_prime",
    "MIN_DISTANCE",
]

MIN_DISTANCE = 0.05
EXPANSION_POINTS = (10**3, 10**4, 10**5)


@dataclass(frozen=True)
class LadderValues:
    """A_j(z), B_j(z) and their z-derivatives for 0 <= j <= n_max."""

    z: object
    A: tuple
    B: tuple
    dA: tuple
    dB: tuple
    a: tuple
    b: tuple


@dataclass(frozen=True)
class LadderEval:
    z: object
    n: int
    An: object
    Bn: object
    Bn1: object
    An_minus: object
    An_plus: object
    a_n: object
    b_n: object


def v0_prime(z, params):
    a, b, *_ = params.mp_values()
    return -a / z + b / (1 - z)


def _distance_to_support(z):
    z = mp.mpc(z)
    x = min(max(z.real, 0), 1)
    return abs(z - x)


def ladder_values(z, cell: Cell, derivatives: bool = True, min_distance: float = MIN_DISTANCE) -> LadderValues:
    """Evaluate A_j, B_j (and A_j', B_j') at z for every j in the cell's table."""
    params, prec, table, aux = cell.params, cell.prec, cell.table, cell.aux
    n_max = aux.n_max
    with prec.workprec():
        z = mp.mpmathify(z)
        if _distance_to_support(z) < min_distance:
            raise ValueError(f"z={z} lies within {min_distance} of [0, 1]")
        g = mp.mpf(params.gamma.numerator) / params.gamma.denominator
        if params.gamma != 0:

            def fn(y):
                P = poly_values(y, table, n_max)
                c = 1 / (z - y)
                vals = [v * v * c for v in P] + [P[j] * P[j - 1] * c for j in range(1, n_max + 1)]
                if derivatives:
                    vals += [-v * c for v in vals]
                return vals

            vals = cell.quad.integrate(fn, "w/(x-t)", label=f"ladder:{mp.nstr(z, 30)}:{int(derivatives)}")
        else:
            vals = [mp.mpf(0)] * ((2 * n_max + 1) * (2 if derivatives else 1))
        m = 2 * n_max + 1
        h = table.h
        sing_a = [g * vals[j] / h[j] for j in range(n_max + 1)]
        sing_b = [mp.mpf(0)] + [g * vals[n_max + j] / h[j - 1] for j in range(1, n_max + 1)]
        x, R, y, r = aux.x, aux.R, aux.y, aux.r
        A = tuple(x[j] / z - R[j] / (z - 1) + sing_a[j] for j in range(n_max + 1))
        B = tuple(y[j] / z - r[j] / (z - 1) + sing_b[j] if j else mp.mpf(0) * z for j in range(n_max + 1))
        dA = dB = ()
        if derivatives:
            dsa = [g * vals[m + j] / h[j] for j in range(n_max + 1)]
            dsb = [mp.mpf(0)] + [g * vals[m + n_max + j] / h[j - 1] for j in range(1, n_max + 1)]
            dA = tuple(-x[j] / z**2 + R[j] / (z - 1) ** 2 + dsa[j] for j in range(n_max + 1))
            dB = tuple(-y[j] / z**2 + r[j] / (z - 1) ** 2 + dsb[j] if j else mp.mpf(0) * z for j in range(n_max + 1))
        return LadderValues(z, A, B, dA, dB, tuple(sing_a), tuple(sing_b))


def eval_ladder(n: int, z, cell: Cell) -> LadderEval:
    """A_n(z), B_n(z) together with B_{n+1}, A_{n-1}, A_{n+1} where available."""
    if n < 1:
        raise ValueError("n >= 1 required")
    lv = ladder_values(z, cell, derivatives=False)
    top = len(lv.A) - 1
    if n > top:
        raise ValueError(f"n={n} exceeds table range {top}")
    return LadderEval(
        z=lv.z,
        n=n,
        An=lv.A[n],
        Bn=lv.B[n],
        Bn1=lv.B[n + 1] if n + 1 <= top else None,
        An_minus=lv.A[n - 1],
        An_plus=lv.A[n + 1] if n + 1 <= top else None,
        a_n=lv.a[n],
        b_n=lv.b[n],
    )


def compatibility_residuals(n: int, z, cell: Cell, threshold: float | None = None, values: LadderValues | None = None) -> ResidualReport:
    """Residuals of S1, S2 and S2' at (n, z), each normalized by its largest term."""
    thr = THRESHOLDS["compatibility"] if threshold is None else threshold
    lv = values or ladder_values(z, cell, derivatives=False)
    top = len(lv.A) - 1
    if not 1 <= n <= top - 1:
        raise ValueError(f"need 1 <= n <= {top - 1}")
    rep = ResidualReport(context={"params": cell.params.as_dict(), "n": n, "z": str(lv.z)})
    with cell.prec.workprec():
        z = lv.z
        A, B = lv.A, lv.B
        an, bn = cell.table.alpha, cell.table.beta
        v0 = v0_prime(z, cell.params)
        rep.add_terms("S1", [B[n + 1], B[n], -(z - an[n]) * A[n], v0], thr)
        rep.add_terms("S2", [mp.mpf(1), (z - an[n]) * B[n + 1], -(z - an[n]) * B[n], -bn[n + 1] * A[n + 1], bn[n] * A[n - 1]], thr)
        rep.add_terms("S2'", [B[n] ** 2, v0 * B[n]] + list(A[:n]) + [-bn[n] * A[n] * A[n - 1]], thr)
    return rep


def expansion_coefficients(n: int, cell: Cell):
    """Large-z coefficients (c1, c2, c3, c4) of A_n and of B_n in powers of 1/z."""
    with cell.prec.workprec():
        *_, t = cell.params.mp_values()
        g = mp.mpf(cell.params.gamma.numerator) / cell.params.gamma.denominator
        x, R, y, r = cell.aux.x[n], cell.aux.R[n], cell.aux.y[n], cell.aux.r[n]
        an, bn = cell.table.alpha, cell.table.beta
        A = (
            mp.mpf(0),
            g + (t - 1) * R - t * x,
            g * (t + an[n]) + (t**2 - 1) * R - t**2 * x,
            g * (t**2 + an[n] ** 2 + t * an[n] + bn[n] + bn[n + 1]) + (t**3 - 1) * R - t**3 * x,
        )
        B = (
            mp.mpf(-n),
            (t - 1) * r - t * y - n * t,
            g * bn[n] - n * t**2 + (t**2 - 1) * r - t**2 * y,
            g * bn[n] * (t + an[n] + an[n - 1]) + t**3 * (r - y - n) - r,
        )
    return A, B


def _extrapolate_to_zero(us, vals):
    """Value at u = 0 of the polynomial interpolating (us, vals) (Neville)."""
    p = list(vals)
    k = len(us)
    for level in range(1, k):
        for i in range(k - level):
            p[i] = (us[i + level] * p[i] - us[i] * p[i + 1]) / (us[i + level] - us[i])
    return p[0]


def expansion_values(cell: Cell, points=EXPANSION_POINTS):
    """Ladder values at the large sample points, shareable across n."""
    with cell.prec.workprec():
        return [ladder_values(mp.mpf(p), cell, derivatives=False) for p in points]


def expansion_residuals(n: int, cell: Cell, threshold: float | None = None, points=EXPANSION_POINTS,
                        values=None) -> ResidualReport:
    """Fitted versus explicit 1/z^k coefficients (k = 1..4) of A_n and B_n.

    For each k the remainder z^k (F(z) - sum_{j<k} c_j z^-j) is sampled at the
    given large z and extrapolated to 1/z = 0, which cancels the next
    len(points)-1 orders.  ``values`` may carry ``expansion_values(cell, points)``.
    """
    thr = THRESHOLDS["expansion"] if threshold is None else threshold
    top = cell.aux.n_max
    if not 1 <= n <= top - 1:
        raise ValueError(f"need 1 <= n <= {top - 1}")
    cA, cB = expansion_coefficients(n, cell)
    rep = ResidualReport(context={"params": cell.params.as_dict(), "n": n})
    with cell.prec.workprec():
        zs = [mp.mpf(p) for p in points]
        lvs = values or expansion_values(cell, points)
        us = [1 / z for z in zs]
        for name, coeffs, series in (("A", cA, [lv.A[n] for lv in lvs]), ("B", cB, [lv.B[n] for lv in lvs])):
            for k in range(1, 5):
                rem = [z**k * (F - mp.fsum(coeffs[j - 1] / z**j for j in range(1, k))) for z, F in zip(zs, series)]
                fit = _extrapolate_to_zero(us, rem)
                expl = coeffs[k - 1]
                rep.add(f"{name}_c{k}", abs(fit - expl) / max(1, abs(expl)), max(1, abs(expl)), thr)
    return rep


def pn_ode_residual(n: int, z, cell: Cell, values: LadderValues | None = None):
    """Normalized residual of the linear second-order equation satisfied by P_n(z).

    P'' - (v0' + A'/A) P' + (B' - B A'/A + sum_{j<n} A_j) P, divided by its
    largest term.
    """
    lv = values or ladder_values(z, cell, derivatives=True)
    with cell.prec.workprec():
        z = lv.z
        if n == 0:
            # P_0 = 1 and B_0 = 0: every term vanishes
            return term_normalized([lv.dB[0], lv.B[0]])[0]
        An, dAn = lv.A[n], lv.dA[n]
        if An == 0:
            raise ZeroDivisionError("A_n(z) = 0: the equation has a pole here; choose another z")
        P, dP, d2P = eval_monic_poly_derivs(n, z, cell.table)
        v0 = v0_prime(z, cell.params)
        q = dAn / An
        terms = [d2P, -v0 * dP, -q * dP, lv.dB[n] * P, -lv.B[n] * q * P] + [Aj * P for Aj in lv.A[:n]]
        return term_normalized(terms)[0]
