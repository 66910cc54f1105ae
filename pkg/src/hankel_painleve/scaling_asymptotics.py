"""Barnes G, edge asymptotics of D_n(t), and the double-scaling limit to sigma-PIII."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
from scipy import stats

from .errors import InsufficientPrecisionError
from .orthopoly import recurrence_table
from .painleve_verify import build_stencil, hn_from_R
from .report import rows_to_csv
from .weight_moments import FORMAT_VERSION, PrecisionContext, WeightParams, as_fraction, moment_table, to_mpf

__all__ = [
    "ln_barnes_g",
    "EdgeAsymptotic",
    "EDGE_SIDES",
    "edge_params",
    "edge_asymptotic_value",
    "edge_ratio_study",
    "EdgeStudy",
    "PIIIPoint",
    "piii_residual_at_scale",
    "ScalingStudy",
    "scaling_decay_study",
    "scaling_precision",
    "export_scaling",
    "export_edge",
]

_BARNES_CUTOFF = 48


def _ln_g_unit(z):
    """ln G(1 + z) for 0 <= z < 1 from the Weierstrass product.

    The first ``_BARNES_CUTOFF`` factors are taken directly.  The remaining
    factors sum to a power series in z whose j-th coefficient is a Hurwitz
    zeta value, so the tail is exact rather than estimated; that series
    converges geometrically with ratio z / (cutoff + 1).
    """
    K = _BARNES_CUTOFF
    head = z / 2 * mp.log(2 * mp.pi) - (z + (1 + mp.euler) * z**2) / 2
    head += mp.fsum(k * mp.log1p(z / k) - z + z**2 / (2 * k) for k in range(1, K + 1))
    tail = []
    zj = z**2
    for j in range(3, 10_000):
        zj *= z
        term = zj / j * mp.zeta(j - 1, K + 1)
        tail.append(term if j % 2 else -term)
        if abs(term) <= mp.eps * (abs(head) + 1) / 8:
            break
    return head + mp.fsum(tail)


def ln_barnes_g(x, prec: PrecisionContext | None = None):
    """ln G(x) for real x > 0, reduced to [1, 2) with ln G(x+1) = ln Gamma(x) + ln G(x)."""
    prec = prec or PrecisionContext()
    with prec.workprec():
        x = to_mpf(as_fraction(x)) if not isinstance(x, mp.mpf) else +x
        if x <= 0:
            raise ValueError("ln_barnes_g requires x > 0")
        with mp.extraprec(20):
            if x < 1:
                # ln G(x) = ln G(x+1) - ln Gamma(x)
                return _ln_g_unit(x) - mp.loggamma(x)
            m = int(mp.floor(x)) - 1
            x0 = x - m
            shift = mp.fsum(mp.loggamma(x0 + j) for j in range(m))
            return _ln_g_unit(x0 - 1) + shift


EDGE_SIDES = {"t1": (Fraction(0), Fraction(1)), "t0": (Fraction(1), Fraction(-1))}


def edge_params(side: str, alpha, beta, gamma, t) -> WeightParams:
    """Weight with the side's (A, B): (0, 1) near t = 1, (1, -1) near t = 0."""
    if side not in EDGE_SIDES:
        raise ValueError(f"side must be one of {sorted(EDGE_SIDES)}")
    A, B = EDGE_SIDES[side]
    return WeightParams(alpha, beta, gamma, A, B, t)


@dataclass(frozen=True)
class EdgeAsymptotic:
    """D_n(t) ~ constant * distance**exponent at the side's endpoint."""

    side: str
    n: int
    constant: object
    log_constant: object
    exponent: Fraction

    def as_dict(self) -> dict:
        return {"side": self.side, "n": self.n, "constant": mp.nstr(self.constant, 40), "exponent": str(self.exponent)}


def edge_asymptotic_value(n: int, params: WeightParams, side: str, prec: PrecisionContext | None = None) -> EdgeAsymptotic:
    """Barnes-G prefactor and exponent; near t = 1 it involves (beta, gamma), near t = 0 (alpha, gamma)."""
    prec = prec or PrecisionContext()
    if side not in EDGE_SIDES:
        raise ValueError(f"side must be one of {sorted(EDGE_SIDES)}")
    if (params.A, params.B) != EDGE_SIDES[side]:
        raise ValueError(f"side {side} requires (A, B) = {tuple(str(v) for v in EDGE_SIDES[side])}")
    if n < 1:
        raise ValueError("n >= 1 required")
    a = params.beta if side == "t1" else params.alpha
    g = params.gamma
    lg = lambda x: ln_barnes_g(x, prec)  # noqa: E731
    with prec.workprec():
        half = (a + g + 1) / 2
        one = (a + g) / 2 + 1
        lnC = (
            -2 * n * (n + to_mpf(a + g)) * mp.log(2)
            + n * mp.log(2 * mp.pi)
            + mp.loggamma(to_mpf(half))
            + 2 * lg(half)
            + 2 * lg(one)
            - lg(a + g + 1)
            - lg(a + 1)
            - lg(g + 1)
            + lg(n + 1)
            + lg(n + a + 1)
            + lg(n + g + 1)
            + lg(n + a + g + 1)
            - 2 * lg(n + half)
            - 2 * lg(n + one)
            - mp.loggamma(to_mpf(n + half))
        )
        return EdgeAsymptotic(side, n, mp.exp(lnC), lnC, n * (n + a + g))


@dataclass
class EdgeStudy:
    side: str
    n: int
    params: WeightParams
    asymptotic: EdgeAsymptotic
    distances: list
    ratios: list
    skipped: list = field(default_factory=list)

    @property
    def errors(self):
        return [None if r is None else abs(r - 1) for r in self.ratios]

    def contraction(self):
        """Successive error ratios |ratio_k - 1| / |ratio_{k+1} - 1|."""
        e = self.errors
        return [None if e[k] is None or not e[k + 1] else e[k] / e[k + 1] for k in range(len(e) - 1)]

    def monotone_tail(self, tail: int = 3) -> bool:
        e = [x for x in self.errors[-tail:] if x is not None]
        return len(e) >= 2 and all(a > b for a, b in zip(e, e[1:]))


def edge_ratio_study(n: int, params: WeightParams, side: str, distances, prec: PrecisionContext | None = None) -> EdgeStudy:
    """D_n(t) / (constant * distance**exponent) at t = 1 - d (side t1) or t = d (side t0)."""
    prec = prec or PrecisionContext()
    asy = edge_asymptotic_value(n, params, side, prec)
    dists = [as_fraction(d) for d in distances]
    ratios, skipped = [], []
    for d in dists:
        t = 1 - d if side == "t1" else d
        p = params.with_t(t)
        try:
            moments = moment_table(p, prec, 2 * n + 2)
            table = recurrence_table(moments, n)
        except InsufficientPrecisionError as exc:
            ratios.append(None)
            skipped.append((str(d), str(exc)))
            continue
        with prec.workprec():
            ratios.append(table.D[n] / (asy.constant * to_mpf(d) ** to_mpf(asy.exponent)))
    return EdgeStudy(side, n, params, asy, dists, ratios, skipped)


def scaling_precision(n: int, base: PrecisionContext | None = None) -> PrecisionContext:
    """512 + 16 n bits (1024 at n = 32) for the n-th cell of a scaling study."""
    base = base or PrecisionContext()
    return base.escalated(max(base.precision_bits, 512 + 16 * n))


@dataclass(frozen=True)
class PIIIPoint:
    """sigma-PIII data for one n at fixed s.

    ``raw`` is the equation's left side minus its right side; ``predicted``
    is the explicit 1/n coefficient, so ``n * raw`` should approach it.
    ``alt_raw`` evaluates the same equation at s' = -s (scaling t = s'/n^2);
    it is recorded, never asserted.
    """

    n: int
    s: Fraction
    t: Fraction
    bits: int
    sigma: object
    sigma_d1: object
    sigma_d2: object
    raw: object
    normalized: object
    predicted: object
    alt_raw: object
    alt_normalized: object


def _piii_terms(s, sig, d1, d2, nu1, nu2):
    return [(s * d2) ** 2, -4 * d1 * (d1 - 1) * (sig - s * d1), -((nu1 * d1 - nu2) ** 2)]


def piii_residual_at_scale(n: int, s, params: WeightParams, prec: PrecisionContext | None = None) -> PIIIPoint:
    """Residual of the sigma-PIII equation for sigma(s) = -H_n(-s/n^2)."""
    s = as_fraction(s)
    t = -s / n**2
    if not 0 < t < 1:
        raise ValueError(f"t = -s/n^2 = {t} must lie in (0, 1); need s < 0 and |s| < n^2")
    prec = prec or scaling_precision(n)
    p = params.with_t(t)
    st = build_stencil(p, prec, max(n - 1, 1), parts=("Rr",))
    with prec.workprec():
        H, H1, H2 = st.derivs(lambda c: hn_from_R(n, c))
        a, b, g, *_ = p.mp_values()
        ss = to_mpf(s)
        sig, d1, d2 = -H, H1 / n**2, -H2 / n**4
        terms = _piii_terms(ss, sig, d1, d2, a + g, g)
        raw = mp.fsum(terms)
        scale = max(abs(x) for x in terms)
        pred = 2 * (a + b + g) * (2 * ss * d1**2 - (a * g + g**2 + 2 * sig) * d1 + g**2)
        alt_terms = _piii_terms(-ss, sig, -d1, d2, a + g, g)
        alt_raw = mp.fsum(alt_terms)
        alt_scale = max(abs(x) for x in alt_terms)
        return PIIIPoint(
            n, s, t, prec.precision_bits, sig, d1, d2, raw, abs(raw) / scale, pred, alt_raw, abs(alt_raw) / alt_scale
        )


@dataclass
class ScalingStudy:
    s: Fraction
    params: WeightParams
    n_list: tuple
    points: tuple
    slope: float
    slope_ci: tuple
    slope_tolerance: float = 0.2
    stability_tolerance: float = 0.3

    @property
    def sigma_vals(self):
        return [p.sigma for p in self.points]

    @property
    def residuals(self):
        return [abs(p.raw) for p in self.points]

    @property
    def n_times_residual(self):
        return [p.n * abs(p.raw) for p in self.points]

    @property
    def decay_ratio(self):
        """residual(n_k) / residual(n_{k+1}) for consecutive entries of n_list."""
        r = self.residuals
        return [r[k] / r[k + 1] for k in range(len(r) - 1)]

    @property
    def stability(self):
        """Relative change of n * residual between consecutive n."""
        v = self.n_times_residual
        return [abs(v[k + 1] - v[k]) / abs(v[k]) for k in range(len(v) - 1)]

    @property
    def predicted_coefficient(self):
        """The explicit 1/n coefficient evaluated at the finest-n approximant."""
        return self.points[-1].predicted

    @property
    def decreasing(self) -> bool:
        r = self.residuals
        return all(x > y for x, y in zip(r, r[1:]))

    @property
    def verdict(self) -> bool:
        return (
            self.decreasing
            and abs(self.slope + 1) <= self.slope_tolerance
            and all(v < self.stability_tolerance for v in self.stability)
        )


def scaling_decay_study(n_list, s, params: WeightParams, prec: PrecisionContext | None = None) -> ScalingStudy:
    """sigma-PIII residuals across n with per-n precision, plus the log-log slope."""
    n_list = tuple(sorted(set(int(n) for n in n_list)))
    if len(n_list) < 2:
        raise ValueError("need at least two values of n")
    s = as_fraction(s)
    points = tuple(piii_residual_at_scale(n, s, params, scaling_precision(n, prec)) for n in n_list)
    xs = [math.log(n) for n in n_list]
    ys = [float(mp.log(abs(p.raw))) for p in points]
    fit = stats.linregress(xs, ys)
    if len(n_list) > 2:
        half = stats.t.ppf(0.975, len(n_list) - 2) * fit.stderr
    else:
        half = float("nan")
    return ScalingStudy(s, params, n_list, points, float(fit.slope), (fit.slope - half, fit.slope + half))


SCALING_COLUMNS = ["n", "s_or_t", "residual_or_ratio", "n_times_residual", "pass"]


def export_scaling(study: ScalingStudy, config: dict | None = None, digits: int = 20):
    """(CSV text, JSON summary text) for a scaling study."""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "scaling_study",
        "params": study.params.as_dict(),
        "s": str(study.s),
        "config": config or {},
    }
    rows = []
    prev = None
    for p in study.points:
        ok = "" if prev is None else ("PASS" if abs(p.raw) < prev else "FAIL")
        rows.append([p.n, str(p.t), mp.nstr(abs(p.raw), digits), mp.nstr(p.n * abs(p.raw), digits), ok])
        prev = abs(p.raw)
    summary = {
        "format_version": FORMAT_VERSION,
        "config": config or {},
        "slope": round(study.slope, 12),
        "slope_ci": [round(float(x), 12) if not math.isnan(x) else None for x in study.slope_ci],
        "verdict": "PASS" if study.verdict else "FAIL",
        "decay_ratio": [mp.nstr(x, 12) for x in study.decay_ratio],
        "n_times_residual": [mp.nstr(x, 12) for x in study.n_times_residual],
        "predicted_coefficient": mp.nstr(study.predicted_coefficient, 12),
        "alternate_convention_residual": [mp.nstr(abs(p.alt_raw), 12) for p in study.points],
        "bits": [p.bits for p in study.points],
    }
    return rows_to_csv(header, rows, SCALING_COLUMNS), json.dumps(summary, sort_keys=True, indent=2)


def export_edge(study: EdgeStudy, config: dict | None = None, digits: int = 30):
    """(CSV text, JSON summary text) for an edge ratio study."""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "edge_study",
        "params": study.params.as_dict(),
        "side": study.side,
        "n": study.n,
        "config": config or {},
    }
    rows = []
    errs = study.errors
    for k, (d, r) in enumerate(zip(study.distances, study.ratios)):
        t = 1 - d if study.side == "t1" else d
        if r is None:
            rows.append([study.n, str(t), "", "", "SKIPPED-PRECISION"])
            continue
        ok = "" if k == 0 or errs[k - 1] is None else ("PASS" if errs[k] < errs[k - 1] else "FAIL")
        rows.append([study.n, str(t), mp.nstr(r, digits), "", ok])
    summary = {
        "format_version": FORMAT_VERSION,
        "config": config or {},
        "asymptotic": study.asymptotic.as_dict(),
        "contraction": [None if c is None else mp.nstr(c, 12) for c in study.contraction()],
        "monotone_tail": study.monotone_tail(),
        "verdict": "PASS" if study.monotone_tail() else "FAIL",
        "skipped": study.skipped,
    }
    return rows_to_csv(header, rows, SCALING_COLUMNS), json.dumps(summary, sort_keys=True, indent=2)
