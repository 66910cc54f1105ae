"""Perturbed Jacobi weight, singularity-splitting quadrature and power moments.

The weight is

    w(x) = x^alpha (1-x)^beta |x-t|^gamma (A + B theta(x-t)),   0 <= x <= 1,

with a jump and an algebraic zero at the interior point t.  Every integral of
the form  int_0^1 f(x) w(x) k(x) dx,  with f smooth and k one of 1, 1/x,
1/(1-x), 1/(x-t), is split at t and each half is handled by a Gauss-Jacobi
rule whose weight carries both endpoint singularities of that half.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import mpmath as mp

from .errors import QuadratureConvergenceError
from .gauss_jacobi import gauss_jacobi_rule

__all__ = [
    "WeightParams",
    "PrecisionContext",
    "MomentTable",
    "WeightQuadrature",
    "MomentCache",
    "as_fraction",
    "to_mpf",
    "eval_weight",
    "moment",
    "moment_table",
    "moment_crosscheck",
    "KINDS",
]

FORMAT_VERSION = 1

KINDS = ("w", "w/x", "w/(1-x)", "w/(x-t)")


def as_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, decimal/ratio string, float or mpf."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value.strip() if isinstance(value, str) else value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, mp.mpf):
        man, exp = value.man_exp
        return Fraction(man) * Fraction(2) ** exp
    raise TypeError(f"cannot interpret {value!r} as a real parameter")


def to_mpf(q: Fraction):
    """Correctly rounded mpf of an exact rational at the current precision."""
    return mp.mpf(q.numerator) / q.denominator


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class WeightParams:
    """Exponents alpha, beta, gamma, jump constants A, B and the point t.

    Values are stored as exact rationals so that decimal inputs such as
    ``t="0.1"`` mean the decimal number at any working precision.

    alpha, beta, gamma >= 0 are accepted; the ladder/identity machinery further
    requires more (see :meth:`require_standing`).
    """

    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    A: Fraction
    B: Fraction
    t: Fraction

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "A", "B", "t"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("invariant violated: alpha >= 0 and beta >= 0 required")
        if self.gamma < 0:
            raise ValueError("invariant violated: gamma >= 0 required")
        if self.A < 0 or self.A + self.B < 0:
            raise ValueError("invariant violated: A >= 0 and A + B >= 0 required")
        if self.A == 0 and self.A + self.B == 0:
            raise ValueError("invariant violated: weight vanishes identically (A = A + B = 0)")
        if not 0 < self.t < 1:
            raise ValueError("invariant violated: 0 < t < 1 required")

    def require_standing(self):
        """Raise unless the boundary terms behind the ladder relations vanish.

        That needs alpha, beta > 0 at the endpoints, and at t either gamma > 0
        or no jump (B = 0).
        """
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("invariant violated: alpha > 0 and beta > 0 required here")
        if self.gamma == 0 and self.B != 0:
            raise ValueError("invariant violated: gamma = 0 requires B = 0 here (the jump at t is not killed)")

    def with_t(self, t) -> "WeightParams":
        return replace(self, t=as_fraction(t))

    def scaled(self, factor) -> "WeightParams":
        factor = as_fraction(factor)
        return replace(self, A=self.A * factor, B=self.B * factor)

    def mp_values(self):
        """(alpha, beta, gamma, A, B, t) as mpf at the current precision."""
        return tuple(to_mpf(q) for q in (self.alpha, self.beta, self.gamma, self.A, self.B, self.t))

    def as_dict(self) -> dict:
        return {k: _fmt(getattr(self, k)) for k in ("alpha", "beta", "gamma", "A", "B", "t")}

    @classmethod
    def from_dict(cls, data) -> "WeightParams":
        return cls(**{k: data[k] for k in ("alpha", "beta", "gamma", "A", "B", "t")})


@dataclass(frozen=True)
class PrecisionContext:
    precision_bits: int = 512
    quad_rel_tol: float = 1e-60
    max_node_doublings: int = 6
    fd_step: Fraction = Fraction(1, 10**20)
    guard_digits: int = 10
    start_nodes: int = 32

    def __post_init__(self):
        object.__setattr__(self, "fd_step", as_fraction(self.fd_step))
        if self.precision_bits < 53:
            raise ValueError("precision_bits must be at least 53")
        if self.quad_rel_tol < 2.0 ** (-self.precision_bits / 2):
            raise ValueError("invariant violated: quad_rel_tol >= 2^(-precision_bits/2)")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        # second-derivative stencils divide by h^2 and must keep guard digits
        if Fraction(self.fd_step) ** 3 < Fraction(10) ** self.guard_digits / 2**self.precision_bits:
            raise ValueError("invariant violated: fd_step^3 >> 2^(-precision_bits)")
        if self.max_node_doublings < 1 or self.guard_digits < 1:
            raise ValueError("max_node_doublings and guard_digits must be positive")

    def workprec(self):
        return mp.workprec(self.precision_bits)

    def escalated(self, bits: int) -> "PrecisionContext":
        return replace(self, precision_bits=max(bits, self.precision_bits))

    def as_dict(self) -> dict:
        return {
            "precision_bits": self.precision_bits,
            "quad_rel_tol": repr(self.quad_rel_tol),
            "max_node_doublings": self.max_node_doublings,
            "fd_step": _fmt(self.fd_step),
            "guard_digits": self.guard_digits,
        }


def eval_weight(x, params: WeightParams):
    """w(x, t) at a real x in [0, 1] (current mpmath precision)."""
    x = mp.mpf(x) if not isinstance(x, Fraction) else to_mpf(x)
    if x < 0 or x > 1:
        raise ValueError(f"domain error: x={x} outside [0, 1]")
    a, b, g, A, B, t = params.mp_values()
    jump = A + B if x > t else A
    if jump == 0:
        return mp.mpf(0)
    return mp.power(x, a) * mp.power(1 - x, b) * mp.power(abs(x - t), g) * jump


def _power_fn(exponent: Fraction):
    if exponent == 0:
        return lambda x: 1
    if exponent.denominator == 1:
        e = int(exponent)
        return lambda x: x**e
    e = to_mpf(exponent)
    return lambda x: mp.power(x, e)


def _pieces(params: WeightParams, kind: str):
    """Yield (jacobi_a, jacobi_b, lo, half_width, prefactor, smooth) per nonzero half.

    On [0, t] the map is x = (t/2)(1+u): (1+u) carries x^alpha, (1-u) carries
    |x-t|^gamma.  On [t, 1] it is x = t + ((1-t)/2)(1+u): (1+u) carries
    |x-t|^gamma, (1-u) carries (1-x)^beta.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    da = Fraction(-1) if kind == "w/x" else Fraction(0)
    db = Fraction(-1) if kind == "w/(1-x)" else Fraction(0)
    dg = Fraction(-1) if kind == "w/(x-t)" else Fraction(0)
    ea, eb, eg = params.alpha + da, params.beta + db, params.gamma + dg
    t = to_mpf(params.t)
    out = []
    if params.A != 0:
        if ea <= -1 or eg <= -1:
            raise ValueError(f"kind {kind!r} not integrable for alpha={params.alpha}, gamma={params.gamma}")
        half = t / 2
        sign = -1 if kind == "w/(x-t)" else 1
        pref = sign * to_mpf(params.A) * mp.power(half, to_mpf(ea + eg + 1))
        pw = _power_fn(eb)
        out.append((eg, ea, mp.mpf(0), half, pref, lambda x: pw(1 - x)))
    if params.A + params.B != 0:
        if eb <= -1 or eg <= -1:
            raise ValueError(f"kind {kind!r} not integrable for beta={params.beta}, gamma={params.gamma}")
        half = (1 - t) / 2
        pref = to_mpf(params.A + params.B) * mp.power(half, to_mpf(eb + eg + 1))
        out.append((eb, eg, t, half, pref, _power_fn(ea)))
    return out


class WeightQuadrature:
    """Discretized weight measures for one (params, precision) cell.

    ``integrate`` doubles the node count from ``prec.start_nodes`` until two
    successive estimates agree to ``quad_rel_tol`` and returns the finer one.
    The accepted node count is remembered per label in ``node_counts``; a
    quadrature constructed with ``frozen`` counts uses exactly those counts,
    which keeps results smooth in t across a finite-difference stencil.
    """

    def __init__(self, params: WeightParams, prec: PrecisionContext, frozen=None):
        self.params = params
        self.prec = prec
        self.frozen = dict(frozen or {})
        self.node_counts: dict[str, int] = {}
        self._rules: dict[tuple[str, int], list] = {}

    def rule(self, kind: str, n_nodes: int):
        """Nodes x_i in [0, 1] and weights W_i with sum W_i f(x_i) ~ int f w k."""
        key = (kind, n_nodes)
        if key not in self._rules:
            xs, ws = [], []
            for a, b, lo, half, pref, smooth in _pieces(self.params, kind):
                us, gw = gauss_jacobi_rule(n_nodes, a, b, self.prec.precision_bits)
                for u, wu in zip(us, gw):
                    x = lo + half * (1 + u)
                    xs.append(x)
                    ws.append(pref * wu * smooth(x))
            self._rules[key] = (xs, ws)
        return self._rules[key]

    def apply(self, fn, kind: str, n_nodes: int):
        """Sum of W_i fn(x_i) (vector valued) and the matching sums of |W_i fn(x_i)|."""
        xs, ws = self.rule(kind, n_nodes)
        total = mag = None
        for x, w in zip(xs, ws):
            vals = fn(x)
            if total is None:
                total = [w * v for v in vals]
                mag = [abs(w * v) for v in vals]
            else:
                for j, v in enumerate(vals):
                    wv = w * v
                    total[j] += wv
                    mag[j] += abs(wv)
        return total, mag

    def integrate(self, fn, kind: str, label: str | None = None):
        label = label or kind
        if label in self.frozen:
            values, _ = self.apply(fn, kind, self.frozen[label])
            self.node_counts[label] = self.frozen[label]
            return values
        tol = mp.mpf(self.prec.quad_rel_tol)
        n_nodes = self.prec.start_nodes
        prev, _ = self.apply(fn, kind, n_nodes)
        for _ in range(self.prec.max_node_doublings):
            n_nodes *= 2
            cur, mag = self.apply(fn, kind, n_nodes)
            if all(abs(c - p) <= tol * max(abs(c), m) for c, p, m in zip(cur, prev, mag)):
                self.node_counts[label] = n_nodes
                return cur
            prev_last, prev = prev, cur
        worst = max(range(len(cur)), key=lambda j: abs(cur[j] - prev_last[j]) / max(abs(cur[j]), mag[j], mp.eps))
        raise QuadratureConvergenceError(
            f"{label}: no agreement to {self.prec.quad_rel_tol} after {n_nodes} nodes "
            f"(component {worst}: {mp.nstr(prev_last[worst], 20)} vs {mp.nstr(cur[worst], 20)})",
            last=cur[worst],
            previous=prev_last[worst],
        )


@dataclass(frozen=True)
class MomentTable:
    params: WeightParams
    prec: PrecisionContext
    moments: tuple
    node_counts: dict = field(default_factory=dict, compare=False)

    @property
    def K(self) -> int:
        return len(self.moments) - 1

    def __getitem__(self, k):
        return self.moments[k]


def _moment_integrand(K):
    def fn(x):
        out = [mp.mpf(1)]
        for _ in range(K):
            out.append(out[-1] * x)
        return out

    return fn


class MomentCache:
    """JSON moment store, one file per (params, precision_bits, quadrature settings).

    Writes go through a temporary file and ``os.replace`` so concurrent readers
    never see a partial file.
    """

    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, params: WeightParams, prec: PrecisionContext, frozen=None) -> Path:
        key = json.dumps(
            {"params": params.as_dict(), "precision": prec.as_dict(), "frozen": dict(sorted((frozen or {}).items()))},
            sort_keys=True,
        )
        digest = hashlib.sha256(key.encode()).hexdigest()[:24]
        return self.directory / f"moments-{prec.precision_bits}-{digest}.json"

    def load(self, params, prec, K, frozen=None):
        p = self.path(params, prec, frozen)
        if not p.exists():
            return None
        data = json.loads(p.read_text())
        if data["K"] < K or data["precision_bits"] != prec.precision_bits:
            return None
        with prec.workprec():
            moments = tuple(mp.mpf(s) for s in data["moments"][: K + 1])
        return MomentTable(params, prec, moments, dict(data.get("node_counts", {})))

    def store(self, table: MomentTable, frozen=None):
        self.directory.mkdir(parents=True, exist_ok=True)
        digits = table.prec.precision_bits // 3
        data = {
            "format_version": FORMAT_VERSION,
            "params": table.params.as_dict(),
            "precision_bits": table.prec.precision_bits,
            "K": table.K,
            "node_counts": table.node_counts,
            "moments": [mp.nstr(m, digits, strip_zeros=False, min_fixed=1, max_fixed=0) for m in table.moments],
        }
        target = self.path(table.params, table.prec, frozen)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(data, fh, indent=1, sort_keys=True)
            os.replace(tmp, target)
        finally:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)


def moment_table(params: WeightParams, prec: PrecisionContext, K: int, quadrature=None, cache_dir=None) -> MomentTable:
    """Moments mu_0 .. mu_K of w at the working precision of ``prec``."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    quad = quadrature or WeightQuadrature(params, prec)
    cache = MomentCache(cache_dir) if cache_dir else None
    if cache is not None:
        hit = cache.load(params, prec, K, quad.frozen)
        if hit is not None:
            quad.node_counts.setdefault("moments", hit.node_counts.get("moments"))
            return hit
    with prec.workprec():
        moments = tuple(quad.integrate(_moment_integrand(K), "w", label="moments"))
    table = MomentTable(params, prec, moments, {"moments": quad.node_counts["moments"]})
    if cache is not None:
        cache.store(table, quad.frozen)
    return table


def moment(k: int, params: WeightParams, prec: PrecisionContext | None = None):
    """mu_k = int_0^1 x^k w(x, t) dx."""
    prec = prec or PrecisionContext()
    return moment_table(params, prec, k).moments[k]


def moment_crosscheck(k: int, params: WeightParams, prec: PrecisionContext | None = None):
    """mu_k by tanh-sinh quadrature after removing the singularity at t.

    Independent of the Gauss-Jacobi machinery: each half is split at its
    midpoint; the half adjacent to t is integrated in u = |x-t|^(gamma+1), which
    turns |x-t|^gamma dx into du/(gamma+1).  The outer endpoint singularities
    x^alpha and (1-x)^beta are left to tanh-sinh.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    prec = prec or PrecisionContext()
    with prec.workprec():
        a, b, g, A, B, t = params.mp_values()
        g1 = g + 1
        inv = 1 / g1

        def quad(f, lo, hi):
            value, err = mp.quad(f, [lo, hi], error=True, maxdegree=12)
            if err > mp.mpf(prec.quad_rel_tol) * max(abs(value), mp.eps):
                raise QuadratureConvergenceError(f"tanh-sinh error estimate {mp.nstr(err, 5)} too large")
            return value

        total = mp.mpf(0)
        if A != 0:
            outer = quad(lambda x: x ** (k + a) * (1 - x) ** b * (t - x) ** g, 0, t / 2)

            def left(u):
                x = t - u**inv
                return x ** (k + a) * (1 - x) ** b

            inner = quad(left, 0, (t / 2) ** g1) / g1
            total += A * (outer + inner)
        if A + B != 0:
            mid = (1 + t) / 2

            def right(u):
                x = t + u**inv
                return x ** (k + a) * (1 - x) ** b

            inner = quad(right, 0, (mid - t) ** g1) / g1
            outer = quad(lambda x: x ** (k + a) * (1 - x) ** b * (x - t) ** g, mid, 1)
            total += (A + B) * (inner + outer)
        return total
