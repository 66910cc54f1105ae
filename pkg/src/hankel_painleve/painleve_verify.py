"""t-derivative identities, H_n(t), and the Painleve VI residuals.

All t-derivatives come from a five-point micro-stencil of spacing
``fd_step`` centred at each report point.  The centre cell chooses its
quadrature node counts adaptively; the four neighbours reuse exactly those
counts, so the discretization error is a smooth function of t and cancels
in the differences instead of injecting noise of size tol/h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .errors import InsufficientPrecisionError
from .pipeline import Cell, build_cell
from .report import SINGULAR, THRESHOLDS, ResidualReport, normalized, residual_rows, rows_to_csv, term_normalized
from .weight_moments import FORMAT_VERSION, PrecisionContext, WeightParams

__all__ = [
    "OFFSETS",
    "numeric_derivative",
    "stencil_derivatives",
    "MicroStencil",
    "build_stencil",
    "chebyshev_grid",
    "SigmaData",
    "sigma_constants",
    "pvi_nu",
    "sn_mu",
    "hankel_sigma",
    "hn_from_R",
    "diff_relation_residuals",
    "prop_residuals",
    "sod_terms",
    "sod_residual",
    "sigma_pvi_residual",
    "sn_pvi_residual",
    "sn_residue_residual",
    "painleve_report",
    "painleve_matrix",
    "export_painleve_csv",
]

OFFSETS = (-2, -1, 0, 1, 2)
# ODE residuals are divided by max(1, largest monomial).  The unit floor only
# matters when every monomial is itself rounding noise, e.g. gamma = 0 and
# B = 0, where the weight does not depend on t and H_n vanishes identically.
ODE_FLOOR = 1
AUX_PARTS = ("xy", "Rr")


def _check_policy(h, order, prec: PrecisionContext | None):
    if prec is None:
        return
    lost = order * -math.log10(float(h))
    kept = prec.precision_bits * math.log10(2) - lost
    if kept < prec.guard_digits:
        raise InsufficientPrecisionError(
            f"step {float(h):.3g} leaves {kept:.1f} digits for order {order} at {prec.precision_bits} bits", order
        )
    if float(h) ** 4 > 10.0 ** (-prec.guard_digits):
        raise ValueError(f"step {float(h):.3g} too coarse: O(h^4) truncation exceeds 10^-{prec.guard_digits}")


def numeric_derivative(values, h, order: int, prec: PrecisionContext | None = None):
    """Five-point central differences at the interior points of a uniform grid.

    Returns derivatives at indices 2 .. len(values)-3.  With ``prec`` given,
    the step is checked against the precision policy first.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if len(values) < 5:
        raise ValueError("need at least five grid values")
    _check_policy(h, order, prec)
    h = mp.mpf(h.numerator) / h.denominator if isinstance(h, Fraction) else mp.mpf(h)
    out = []
    for i in range(2, len(values) - 2):
        fm2, fm1, f0, f1, f2 = values[i - 2 : i + 3]
        if order == 1:
            out.append((fm2 - 8 * fm1 + 8 * f1 - f2) / (12 * h))
        else:
            out.append((-fm2 + 16 * fm1 - 30 * f0 + 16 * f1 - f2) / (12 * h * h))
    return out


def stencil_derivatives(values, h):
    """(f, f', f'') at the centre of a five-point stencil."""
    return values[2], numeric_derivative(values, h, 1)[0], numeric_derivative(values, h, 2)[0]


def chebyshev_grid(count: int = 9, lo=Fraction(1, 10), hi=Fraction(9, 10), digits: int = 20):
    """Chebyshev points on [lo, hi], rounded to ``digits`` decimals as exact fractions (ascending)."""
    with mp.workdps(digits + 10):
        mid, rad = mp.mpf(lo.numerator) / lo.denominator, mp.mpf(hi.numerator) / hi.denominator
        mid, rad = (mid + rad) / 2, (rad - mid) / 2
        pts = [mid - rad * mp.cos((2 * k + 1) * mp.pi / (2 * count)) for k in range(count)]
        return [Fraction(mp.nstr(p, digits, strip_zeros=False, min_fixed=-mp.inf, max_fixed=mp.inf)) for p in pts]


@dataclass
class MicroStencil:
    """Five cells at t + k h, k = -2..2, sharing the centre's node counts."""

    params: WeightParams
    prec: PrecisionContext
    n_max: int
    h: Fraction
    cells: tuple

    @property
    def t(self) -> Fraction:
        return self.params.t

    @property
    def center(self) -> Cell:
        return self.cells[2]

    def series(self, fn):
        with self.prec.workprec():
            return [fn(c) for c in self.cells]

    def derivs(self, fn):
        with self.prec.workprec():
            return stencil_derivatives(self.series(fn), self.h)


def build_stencil(params: WeightParams, prec: PrecisionContext, n_max: int, cache_dir=None, parts=AUX_PARTS) -> MicroStencil:
    """Build the centre cell adaptively, then its four frozen-count neighbours."""
    params.require_standing()
    h = prec.fd_step
    if not (0 < params.t - 2 * h and params.t + 2 * h < 1):
        raise ValueError("stencil leaves (0, 1)")
    _check_policy(h, 2, prec)
    center = build_cell(params, prec, n_max, parts=parts, cache_dir=cache_dir)
    frozen = center.node_counts
    cells = []
    for k in OFFSETS:
        if k == 0:
            cells.append(center)
        else:
            cells.append(build_cell(params.with_t(params.t + k * h), prec, n_max, frozen=frozen, parts=parts, cache_dir=cache_dir))
    return MicroStencil(params, prec, n_max, h, tuple(cells))


def sigma_constants(n: int, params: WeightParams):
    """(c1, c2) of the shift sigma_n = H_n + c1 t + c2, as exact fractions."""
    a, b, g = params.alpha, params.beta, params.gamma
    c1 = -n * (n + a + b + g) - (a + b) ** 2 / 4
    c2 = (2 * n * (n + a + b + g) + (a + b) * b - (a - b) * g) / 4
    return c1, c2


def pvi_nu(n: int, params: WeightParams):
    a, b, g = params.alpha, params.beta, params.gamma
    return ((a + b) / 2, (b - a) / 2, (2 * n + a + b) / 2, (2 * n + a + b + 2 * g) / 2)


def sn_mu(n: int, params: WeightParams):
    a, b, g = params.alpha, params.beta, params.gamma
    return ((2 * n + a + b + g + 1) ** 2 / 2, -(a**2) / 2, b**2 / 2, (1 - g**2) / 2)


def _q(x: Fraction):
    return mp.mpf(x.numerator) / x.denominator


def hn_from_R(n, cell: Cell):
    """H_n(t) = (t-1)[n(n+alpha+beta+gamma) - sum_{j<n} R_j] from one cell."""
    a, b, g, _, _, t = cell.params.mp_values()
    return n * (n + a + b + g) * (t - 1) - (t - 1) * mp.fsum(cell.aux.R[:n])


def _ln_D(n, cell: Cell):
    return mp.fsum(mp.log(cell.table.h[j]) for j in range(n))


@dataclass(frozen=True)
class SigmaData:
    """H_n, sigma_n and S_n with their t-derivatives at each report point."""

    n: int
    params: WeightParams
    prec: PrecisionContext
    t_grid: tuple
    Hn: tuple
    Hn_d1: tuple
    Hn_d2: tuple
    Hn_logD: tuple
    discrepancy: tuple
    sigma_n: tuple
    sigma_d1: tuple
    sigma_d2: tuple
    c1: Fraction
    c2: Fraction
    Sn: tuple
    Sn_d1: tuple
    Sn_d2: tuple

    def index(self, t) -> int:
        return self.t_grid.index(Fraction(t))


def hankel_sigma(n: int, stencils) -> SigmaData:
    """H_n from the R_j sum (primary) and from t(t-1) d/dt ln D_n, plus sigma_n and S_n."""
    stencils = list(stencils)
    if not stencils:
        raise ValueError("empty grid")
    params = stencils[0].params
    c1, c2 = sigma_constants(n, params)
    cols = {k: [] for k in ("H", "H1", "H2", "HL", "disc", "s", "s1", "s2", "S", "S1", "S2")}
    for st in stencils:
        if n > st.n_max:
            raise ValueError(f"n={n} exceeds stencil n_max={st.n_max}")
        with st.prec.workprec():
            a, b, g, _, _, t = st.params.mp_values()
            H, H1, H2 = st.derivs(lambda c: hn_from_R(n, c))
            _, L1, _ = st.derivs(lambda c: _ln_D(n, c))
            HL = t * (t - 1) * L1
            K1 = 2 * n + a + b + g + 1
            S, S1, S2 = st.derivs(lambda c: (c.params.mp_values()[5] - 1) * c.aux.R[n] / K1 + 1)
            vals = (H, H1, H2, HL, abs(H - HL), H + _q(c1) * t + _q(c2), H1 + _q(c1), H2, S, S1, S2)
        for k, v in zip(cols, vals):
            cols[k].append(v)
    return SigmaData(
        n=n,
        params=params,
        prec=stencils[0].prec,
        t_grid=tuple(st.t for st in stencils),
        Hn=tuple(cols["H"]),
        Hn_d1=tuple(cols["H1"]),
        Hn_d2=tuple(cols["H2"]),
        Hn_logD=tuple(cols["HL"]),
        discrepancy=tuple(cols["disc"]),
        sigma_n=tuple(cols["s"]),
        sigma_d1=tuple(cols["s1"]),
        sigma_d2=tuple(cols["s2"]),
        c1=c1,
        c2=c2,
        Sn=tuple(cols["S"]),
        Sn_d1=tuple(cols["S1"]),
        Sn_d2=tuple(cols["S2"]),
    )


def _require_index(n, st: MicroStencil):
    if not 1 <= n <= st.n_max - 1:
        raise ValueError(f"need 1 <= n <= {st.n_max - 1} (relations use index n+1)")


def diff_relation_residuals(n: int, stencil: MicroStencil, threshold: float | None = None) -> ResidualReport:
    """The five first-order t-relations for h_n, beta_n, p(n,t), alpha_n and (r_n, y_n)."""
    _require_index(n, stencil)
    thr = THRESHOLDS["differential"] if threshold is None else threshold
    st = stencil
    rep = ResidualReport(context={"params": st.params.as_dict(), "n": n})
    with st.prec.workprec():
        a, b, g, _, _, t = st.params.mp_values()
        c = st.center
        R, r, y = c.aux.R, c.aux.r, c.aux.y
        _, lnh1, _ = st.derivs(lambda q: mp.log(q.table.h[n]))
        _, bn1, _ = st.derivs(lambda q: q.table.beta[n])
        _, p1, _ = st.derivs(lambda q: q.table.p1[n])
        _, an1, _ = st.derivs(lambda q: q.table.alpha[n])
        _, r1, _ = st.derivs(lambda q: q.aux.r[n])
        _, y1, _ = st.derivs(lambda q: q.aux.y[n])
        bn, an = c.table.beta[n], c.table.alpha[n]
        rep.add_equation("d1", t * lnh1, a + b + g + 2 * n + 1 - R[n], thr)
        rep.add_equation("d11", t * bn1, bn * (2 - R[n] + R[n - 1]), thr)
        rep.add_equation("d2", p1, r[n] - y[n] - n, thr)
        rep.add_equation("alphap", t * an1, an + r[n] - r[n + 1], thr)
        rep.add_equation("re", (t - 1) * r1, t * y1, thr)
    return rep


def prop_residuals(n: int, stencil: MicroStencil, threshold: float | None = None) -> ResidualReport:
    """alpha_n and beta_n from (r_n, y_n, R_n); r_n and y_n from (H_n, H_n'); the intermediate link."""
    _require_index(n, stencil)
    thr = THRESHOLDS["propositions"] if threshold is None else threshold
    st = stencil
    rep = ResidualReport(context={"params": st.params.as_dict(), "n": n})
    with st.prec.workprec():
        a, b, g, _, _, t = st.params.mp_values()
        c = st.center
        R, r, y = c.aux.R[n], c.aux.r[n], c.aux.y[n]
        an, bn = c.table.alpha[n], c.table.beta[n]
        K = 2 * n + a + b + g
        H, H1, H2 = st.derivs(lambda q: hn_from_R(n, q))
        rep.add_equation("alpha", (K + 2) * an, 2 * (t - 1) * r - 2 * t * y - (t - 1) * R + t * a + (t - 1) * b + t, thr)
        rhs = (
            (t * y - (t - 1) * r) ** 2
            - (t - 1) * (2 * n * t + g * t + b) * r
            + t * ((t - 1) * (2 * n + g) - a) * y
            + n * (n + g) * (t**2 - t)
        )
        rep.add_equation("beta", (K + 1) * (K - 1) * bn, rhs, thr)
        rep.add_equation("r_from_H", r, (n * n + n * a + n * g + H - t * H1) / K, thr)
        rep.add_equation("y_from_H", y, -(n * n + n * b + n * g - H + (t - 1) * H1) / K, thr)
        rep.add_terms("eq5", [K * (t - 1) * r, -K * t * y, H, n * (n + a + g), -n * (2 * n + a + b + 2 * g) * t], thr)
        _, r1, _ = st.derivs(lambda q: q.aux.r[n])
        rep.add_equation("r_chain", r1, -t * H2 / K, thr)
    return rep


def sod_terms(n: int, t, H, H1, H2, params: WeightParams):
    """The ten monomial groups of the second-order equation for H_n; they sum to zero."""
    a, b, g, *_ = params.mp_values()
    P = 4 * n * n + 4 * n * (a + b + g) + (a + b) ** 2
    Q = 2 * n * n + 2 * n * (a + b + g) + a * (a + g) + b * (a - g)
    N1 = n + a + b + g
    return [
        t**2 * (t - 1) ** 2 * H2**2,
        4 * t * (t - 1) * H1**3,
        -4 * (2 * t - 1) * H * H1**2,
        -(P * t**2 - 2 * Q * t + (a + g) ** 2) * H1**2,
        4 * H**2 * H1,
        2 * (P * t - Q) * H * H1,
        -2 * n * g * N1 * ((a - b) * t - a - g) * H1,
        -P * H**2,
        2 * n * g * (a - b) * N1 * H,
        -(n**2) * g**2 * N1**2,
    ]


def _point(n, t, sigma: SigmaData):
    if n != sigma.n:
        raise ValueError(f"sigma data is for n={sigma.n}, not {n}")
    return sigma.index(t)


def sod_residual(n: int, t, sigma: SigmaData):
    """|sum of monomials| / max |monomial| at report point t."""
    i = _point(n, t, sigma)
    params = sigma.params
    with sigma.prec.workprec():
        tt = _q(Fraction(t))
        return term_normalized(sod_terms(n, tt, sigma.Hn[i], sigma.Hn_d1[i], sigma.Hn_d2[i], params), ODE_FLOOR)[0]


def sigma_pvi_residual(n: int, t, sigma: SigmaData, nu=None):
    """Jimbo-Miwa-Okamoto sigma-form residual, normalized by its largest part."""
    i = _point(n, t, sigma)
    with sigma.prec.workprec():
        nu = [_q(Fraction(v)) for v in (nu or pvi_nu(n, sigma.params))]
        tt = _q(Fraction(t))
        s, s1, s2 = sigma.sigma_n[i], sigma.sigma_d1[i], sigma.sigma_d2[i]
        prod_nu = nu[0] * nu[1] * nu[2] * nu[3]
        first = s1 * (tt * (tt - 1) * s2) ** 2
        second = (2 * s1 * (tt * s1 - s) - s1**2 - prod_nu) ** 2
        third = mp.fprod(s1 + v**2 for v in nu)
        return term_normalized([first, second, -third], ODE_FLOOR)[0]


def sn_pvi_residual(n: int, t, sigma: SigmaData, mu=None):
    """Painleve VI residual for S_n, or None when S_n sits on a singular value {0, 1, t}."""
    i = _point(n, t, sigma)
    with sigma.prec.workprec():
        m1, m2, m3, m4 = [_q(Fraction(v)) for v in (mu or sn_mu(n, sigma.params))]
        tt = _q(Fraction(t))
        S, S1, S2 = sigma.Sn[i], sigma.Sn_d1[i], sigma.Sn_d2[i]
        # values this close to a pole are indistinguishable from it at quadrature accuracy
        tiny = mp.mpf(sigma.prec.quad_rel_tol)
        if min(abs(S), abs(S - 1), abs(S - tt)) < tiny:
            return None
        pref = -S * (S - 1) * (S - tt) / (tt**2 * (tt - 1) ** 2)
        terms = [
            S2,
            -(S1**2) / (2 * S),
            -(S1**2) / (2 * (S - 1)),
            -(S1**2) / (2 * (S - tt)),
            S1 / tt,
            S1 / (tt - 1),
            S1 / (S - tt),
            pref * m1,
            pref * m2 * tt / S**2,
            pref * m3 * (tt - 1) / (S - 1) ** 2,
            pref * m4 * tt * (tt - 1) / (S - tt) ** 2,
        ]
        return term_normalized(terms, ODE_FLOOR)[0]


def sn_residue_residual(n: int, t, sigma: SigmaData, mu=None):
    """At a crossing S_n = t the equation has a simple pole in S_n - t.

    A solution regular there must cancel it: the residue S'^2 - 2S' + 2 mu_4
    vanishes. Returns that normalized residue, or None away from the crossing.
    """
    i = _point(n, t, sigma)
    with sigma.prec.workprec():
        m4 = _q(Fraction((mu or sn_mu(n, sigma.params))[3]))
        S, S1 = sigma.Sn[i], sigma.Sn_d1[i]
        if abs(S - _q(Fraction(t))) >= mp.mpf(sigma.prec.quad_rel_tol):
            return None
        return term_normalized([S1**2, -2 * S1, 2 * m4], ODE_FLOOR)[0]


def _degenerate(n, st: MicroStencil):
    tiny = mp.eps * 2 ** st.prec.guard_digits
    for cell in st.cells:
        if abs(cell.table.beta[n]) < tiny or abs(cell.aux.R[n]) < tiny:
            return f"beta_n or R_n underflows working precision at n={n}"
    return None


ODE_NAMES = ("sod", "sigma_pvi", "sn_pvi")
DIFF_NAMES = ("d1", "d11", "d2", "alphap", "re")
PROP_NAMES = ("alpha", "beta", "r_from_H", "y_from_H", "eq5", "r_chain", "H_two_ways")


def painleve_report(n: int, stencil: MicroStencil, thresholds: dict | None = None) -> ResidualReport:
    """Every section-three residual for one (params, n, t) cell, with the skip policy applied."""
    thr = dict(THRESHOLDS)
    thr.update(thresholds or {})
    rep = ResidualReport(context={"params": stencil.params.as_dict(), "n": n})
    reason = _degenerate(n, stencil)
    if reason:
        for name in DIFF_NAMES + PROP_NAMES + ODE_NAMES:
            rep.skip(name, thr.get(name, thr["differential"]), reason)
        return rep
    for part in (diff_relation_residuals(n, stencil, thr["differential"]), prop_residuals(n, stencil, thr["propositions"])):
        rep.entries.update(part.entries)
    sig = hankel_sigma(n, [stencil])
    t = stencil.t
    with stencil.prec.workprec():
        res, scale = normalized(sig.Hn[0], sig.Hn_logD[0])
        rep.add("H_two_ways", res, scale, thr["propositions"])
        rep.add("sod", sod_residual(n, t, sig), 1, thr["sod"])
        rep.add("sigma_pvi", sigma_pvi_residual(n, t, sig), 1, thr["sigma_pvi"])
        sn = sn_pvi_residual(n, t, sig)
        residue = sn_residue_residual(n, t, sig) if sn is None else None
    if sn is None:
        rep.skip("sn_pvi", thr["sn_pvi"], "S_n coincides with a singular value of the equation", SINGULAR)
        if residue is not None:
            rep.add("sn_residue", residue, 1, thr["sn_pvi"])
    else:
        rep.add("sn_pvi", sn, 1, thr["sn_pvi"])
    return rep


def painleve_matrix(params: WeightParams, prec: PrecisionContext, n_list, t_grid, thresholds=None, cache_dir=None):
    """[(n, t, report)] over the grid; a precision failure marks the whole cell skipped."""
    n_list = sorted(set(n_list))
    n_max = max(n_list) + 1
    out = []
    for t in t_grid:
        p = params.with_t(t)
        try:
            st = build_stencil(p, prec, n_max, cache_dir=cache_dir)
        except InsufficientPrecisionError as exc:
            for n in n_list:
                rep = ResidualReport(context={"params": p.as_dict(), "n": n})
                for name in DIFF_NAMES + PROP_NAMES + ODE_NAMES:
                    rep.skip(name, THRESHOLDS["differential"], str(exc))
                out.append((n, p.t, rep))
            continue
        for n in n_list:
            out.append((n, p.t, painleve_report(n, st, thresholds)))
    return out


def export_painleve_csv(params: WeightParams, prec: PrecisionContext, matrix, config: dict | None = None) -> str:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "painleve_residuals",
        "params": params.as_dict(),
        "precision": prec.as_dict(),
        "config": config or {},
    }
    rows = []
    for n, t, rep in matrix:
        rows.extend(residual_rows(params, n, rep, t=str(t)))
    return rows_to_csv(header, rows)
