"""Arbitrary-precision Gauss-Jacobi rules on [-1, 1].

The rule integrates f(u) (1-u)^a (1+u)^b exactly for polynomials f of degree
< 2N.  Nodes start from the double-precision roots of scipy and are polished by
Newton iteration on the three-term recurrence at the working precision.
"""

from __future__ import annotations

from functools import lru_cache

import mpmath as mp
from scipy.special import roots_jacobi

__all__ = ["gauss_jacobi_rule", "jacobi_and_derivative"]


def _recurrence(N, a, b):
    """Coefficients (e_k, f_k, g_k) with P_k = (e_k u + f_k) P_{k-1} - g_k P_{k-2}."""
    ab = a + b
    coef = []
    for k in range(2, N + 1):
        c = 2 * k + ab
        a1 = 2 * k * (k + ab) * (c - 2)
        coef.append(((c - 1) * c * (c - 2) / a1,
                     (c - 1) * (a * a - b * b) / a1,
                     2 * (k + a - 1) * (k + b - 1) * c / a1))
    return coef


def jacobi_and_derivative(N, a, b, u, coef=None):
    """Return (P_N^{(a,b)}(u), d/du P_N^{(a,b)}(u)) in the standard normalization."""
    if N == 0:
        return mp.mpf(1), mp.mpf(0)
    if coef is None:
        coef = _recurrence(N, a, b)
    p_prev = mp.mpf(1)
    p = (a + 1) + (a + b + 2) * (u - 1) / 2
    for e, f, g in coef:
        p_prev, p = p, (e * u + f) * p - g * p_prev
    c = 2 * N + a + b
    dp = (N * ((a - b) - c * u) * p + 2 * (N + a) * (N + b) * p_prev) / (c * (1 - u * u))
    return p, dp


def _newton_polish(N, a, b, u, prec, coef):
    # Each step roughly doubles the correct bits, so the early steps run at
    # reduced precision.
    bits = 53
    while 2 * bits < prec:
        bits *= 2
        with mp.workprec(bits + 10):
            p, dp = jacobi_and_derivative(N, a, b, u, coef)
            u = u - p / dp
    # A step below sqrt(eps)/N leaves an error of order eps after the update.
    tol = mp.sqrt(mp.eps) / (N * N)
    for _ in range(60):
        p, dp = jacobi_and_derivative(N, a, b, u, coef)
        du = p / dp
        if abs(du) <= tol:
            # carry P' to the updated node with P'' from the Jacobi ODE
            d2p = -((b - a - (a + b + 2) * u) * dp + N * (N + a + b + 1) * p) / (1 - u * u)
            return u - du, dp - du * d2p
        u -= du
    raise ArithmeticError(f"Newton iteration for Gauss-Jacobi node did not converge (N={N})")


@lru_cache(maxsize=256)
def _rule_cached(N, a_key, b_key, prec):
    with mp.workprec(prec):
        a = mp.mpf(a_key[0]) / a_key[1]
        b = mp.mpf(b_key[0]) / b_key[1]
        guesses, _ = roots_jacobi(N, float(a), float(b))
        # Work at a few guard bits so the final rounding is clean.
        with mp.extraprec(16):
            log_c = ((a + b + 1) * mp.log(2) + mp.loggamma(N + a + 1) + mp.loggamma(N + b + 1)
                     - mp.loggamma(N + a + b + 1) - mp.loggamma(N + 1))
            const = mp.exp(log_c)
            coef = _recurrence(N, a, b)
            nodes, weights = [], []
            for g in guesses:
                u, dp = _newton_polish(N, a, b, mp.mpf(float(g)), mp.mp.prec, coef)
                nodes.append(u)
                weights.append(const / ((1 - u * u) * dp * dp))
        return tuple(+x for x in nodes), tuple(+w for w in weights)


def _key(q):
    from fractions import Fraction

    q = Fraction(q)
    return (q.numerator, q.denominator)


def gauss_jacobi_rule(N: int, a, b, prec: int | None = None):
    """N-point Gauss-Jacobi nodes and weights for (1-u)^a (1+u)^b on [-1, 1].

    ``a`` and ``b`` must be exact rationals (int, Fraction or decimal str) > -1.
    Rules are cached per (N, a, b, prec).
    """
    ak, bk = _key(a), _key(b)
    if ak[0] <= -ak[1] or bk[0] <= -bk[1]:
        raise ValueError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")
    if N < 1:
        raise ValueError("N must be positive")
    if prec is None:
        prec = mp.mp.prec
    return _rule_cached(N, ak, bk, prec)
