"""Monic orthogonal polynomials and Hankel determinants from a moment table."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import mpmath as mp

from .errors import InsufficientPrecisionError
from .weight_moments import FORMAT_VERSION, MomentTable, PrecisionContext, WeightParams

__all__ = [
    "RecurrenceTable",
    "hankel_det_direct",
    "recurrence_table",
    "eval_monic_poly",
    "eval_monic_poly_derivs",
    "orthogonality_residual",
    "jacobi_matrix_zeros",
    "export_recurrence_csv",
]


@dataclass(frozen=True)
class RecurrenceTable:
    """Recurrence data for P_0 .. P_{n_max+1} at one t.

    Indexing follows the polynomial degree: ``h[n]``, ``alpha[n]`` for
    0 <= n <= n_max, ``beta[n]`` for 1 <= n <= n_max (``beta[0] = 0`` encodes
    beta_0 P_{-1} = 0), ``p1[n]`` for 0 <= n <= n_max+1 and ``D[n]`` for
    0 <= n <= n_max+1 with ``D[0] = 1``.  ``coeffs[n][j]`` is the coefficient of
    x^j in P_n.
    """

    params: WeightParams
    prec: PrecisionContext
    n_max: int
    h: tuple
    alpha: tuple
    beta: tuple
    p1: tuple
    D: tuple
    coeffs: tuple


def _hankel(moments, n):
    return [[moments[i + j] for j in range(n)] for i in range(n)]


def lu_determinant(matrix):
    """Determinant by Gaussian elimination with partial pivoting.

    Raises InsufficientPrecisionError naming the pivot index when a pivot is
    lost in rounding noise.
    """
    a = [list(row) for row in matrix]
    n = len(a)
    scale = max((abs(x) for row in a for x in row), default=mp.mpf(0))
    det = mp.mpf(1)
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i][k]))
        if abs(a[piv][k]) <= mp.eps * scale * n:
            raise InsufficientPrecisionError(f"matrix singular to working precision at pivot {k}", k)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        pk = a[k][k]
        det *= pk
        for i in range(k + 1, n):
            f = a[i][k] / pk
            if f:
                row_i, row_k = a[i], a[k]
                for j in range(k + 1, n):
                    row_i[j] -= f * row_k[j]
    return det


def hankel_det_direct(n: int, moments: MomentTable):
    """det(mu_{i+j})_{i,j<n} by LU; an oracle for the product of norms."""
    if n < 1:
        raise ValueError("n must be positive")
    if moments.K < 2 * n - 2:
        raise ValueError(f"moment table covers K={moments.K}, need {2 * n - 2}")
    with moments.prec.workprec():
        return lu_determinant(_hankel(moments.moments, n))


def _ldl(matrix):
    """M = L diag(d) L^T with unit lower-triangular L."""
    n = len(matrix)
    L = [[mp.mpf(0)] * n for _ in range(n)]
    d = [mp.mpf(0)] * n
    for j in range(n):
        Lj = L[j]
        dj = matrix[j][j] - mp.fsum(Lj[k] * Lj[k] * d[k] for k in range(j))
        if dj <= 0:
            raise InsufficientPrecisionError(f"Cholesky breakdown at index {j} (pivot {mp.nstr(dj, 5)})", j)
        d[j] = dj
        Lj[j] = mp.mpf(1)
        for i in range(j + 1, n):
            Li = L[i]
            Li[j] = (matrix[i][j] - mp.fsum(Li[k] * Lj[k] * d[k] for k in range(j))) / dj
    return L, d


def _unit_lower_inverse(L):
    n = len(L)
    C = [[mp.mpf(0)] * n for _ in range(n)]
    for i in range(n):
        C[i][i] = mp.mpf(1)
        for j in range(i):
            C[i][j] = -mp.fsum(L[i][k] * C[k][j] for k in range(j, i))
    return C


def recurrence_table(moments: MomentTable, n_max: int) -> RecurrenceTable:
    """h_n, alpha_n, beta_n, p(n, t) and D_n from an LDL^T factorization.

    With M = L diag(h) L^T the rows of L^{-1} are the coefficient vectors of the
    monic orthogonal polynomials, so p(n, t) is the sub-diagonal entry of row n.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    m = n_max + 2
    if moments.K < 2 * m - 2:
        raise ValueError(f"moment table covers K={moments.K}, need {2 * m - 2}")
    with moments.prec.workprec():
        L, h = _ldl(_hankel(moments.moments, m))
        C = _unit_lower_inverse(L)
        p1 = [mp.mpf(0)] + [C[n][n - 1] for n in range(1, m)]
        alpha = [p1[n] - p1[n + 1] for n in range(n_max + 1)]
        beta = [mp.mpf(0)] + [h[n] / h[n - 1] for n in range(1, n_max + 1)]
        D = [mp.mpf(1)]
        for n in range(m):
            D.append(D[-1] * h[n])
        coeffs = tuple(tuple(C[n][: n + 1]) for n in range(m))
    return RecurrenceTable(
        params=moments.params,
        prec=moments.prec,
        n_max=n_max,
        h=tuple(h[: n_max + 1]),
        alpha=tuple(alpha),
        beta=tuple(beta),
        p1=tuple(p1),
        D=tuple(D),
        coeffs=coeffs,
    )


def eval_monic_poly(n: int, x, table: RecurrenceTable):
    """P_n(x) by the forward three-term recurrence (x real or complex)."""
    if n > table.n_max + 1:
        raise ValueError(f"n={n} exceeds table range")
    p_prev, p = 0, mp.mpf(1)
    for k in range(n):
        p_prev, p = p, (x - table.alpha[k]) * p - table.beta[k] * p_prev
    return p


def eval_monic_poly_derivs(n: int, x, table: RecurrenceTable):
    """(P_n, P_n', P_n'') at x by differentiating the recurrence exactly."""
    if n > table.n_max + 1:
        raise ValueError(f"n={n} exceeds table range")
    p0, p = 0, mp.mpf(1)
    d0, d = 0, 0
    s0, s = 0, 0
    for k in range(n):
        a, b = table.alpha[k], table.beta[k]
        p0, p, d0, d, s0, s = (
            p,
            (x - a) * p - b * p0,
            d,
            p + (x - a) * d - b * d0,
            s,
            2 * d + (x - a) * s - b * s0,
        )
    return p, d, s


def orthogonality_residual(m: int, n: int, table: RecurrenceTable, quadrature) -> object:
    """|int P_m P_n w - h_n delta_mn| / max_j h_j using ``quadrature``."""
    if max(m, n) > table.n_max:
        raise ValueError("index exceeds n_max")
    with table.prec.workprec():

        def fn(x):
            return [eval_monic_poly(m, x, table) * eval_monic_poly(n, x, table)]

        (value,) = quadrature.integrate(fn, "w", label=f"orth{max(m, n)}")
        target = table.h[n] if m == n else 0
        return abs(value - target) / max(table.h)


def jacobi_matrix_zeros(n: int, table: RecurrenceTable):
    """Zeros of P_n as eigenvalues of the symmetric n x n Jacobi matrix (ascending)."""
    if n < 1 or n > table.n_max + 1:
        raise ValueError("need 1 <= n <= n_max + 1")
    with table.prec.workprec():
        J = mp.zeros(n, n)
        for i in range(n):
            J[i, i] = table.alpha[i]
            if i + 1 < n:
                J[i, i + 1] = J[i + 1, i] = mp.sqrt(table.beta[i + 1])
        ev = mp.eigsy(J, eigvals_only=True)
        return sorted(ev[i] for i in range(n))


def export_recurrence_csv(table: RecurrenceTable, config: dict | None = None, digits: int | None = None) -> str:
    """JSON header line followed by CSV rows n, h_n, alpha_n, beta_n, p_n, D_n."""
    digits = digits or table.prec.precision_bits // 4
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "recurrence_table",
        "params": table.params.as_dict(),
        "precision": table.prec.as_dict(),
        "n_max": table.n_max,
        "config": config or {},
    }
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "h_n", "alpha_n", "beta_n", "p_n", "D_n"])
    s = lambda v: mp.nstr(v, digits)  # noqa: E731
    for n in range(table.n_max + 1):
        w.writerow([n, s(table.h[n]), s(table.alpha[n]), s(table.beta[n]) if n else "", s(table.p1[n]), s(table.D[n])])
    return buf.getvalue()
