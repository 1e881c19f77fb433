"""Sine and cosine integrals.

Power series below ``|u| = 4``; above it, the complex exponential integral
``E1(iu)`` is evaluated by a continued fraction (modified Lentz), which
yields both auxiliary functions at once.
"""

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_SEAM = 4.0
_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 60
_MAX_CF_ITER = 200
_CF_EPS = 1e-15


def _series(x):
    """Return (Si, Ci - gamma - ln x) for 0 <= x <= 4 by Taylor series."""
    x2 = x * x
    si = x.copy()
    cin = np.zeros_like(x)
    # term_k = (-1)^k x^(2k+1) / (2k+1)!  and  (-1)^k x^(2k) / (2k)!
    odd = x.copy()
    even = np.ones_like(x)
    for k in range(1, _MAX_TERMS):
        odd = -odd * x2 / ((2 * k) * (2 * k + 1))
        even = -even * x2 / ((2 * k - 1) * (2 * k))
        si += odd / (2 * k + 1)
        cin += even / (2 * k)
        if np.all(np.abs(odd) < _EPS * 1e-3) and np.all(np.abs(even) < _EPS * 1e-3):
            break
    return si, cin


def _continued_fraction(x):
    """Return (Si, Ci) for x > 4 from E1(ix) via its continued fraction."""
    b = 1.0 + 1j * x
    c = np.full_like(b, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(2, _MAX_CF_ITER):
        a = -float((i - 1) ** 2)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _CF_EPS):
            break
    h = (np.cos(x) - 1j * np.sin(x)) * h
    return 0.5 * np.pi + h.imag, -h.real


def sici(u):
    """Vectorized ``(Si(u), Ci(u))`` for ``u > 0``.

    No domain checks; use :func:`sine_integral` / :func:`cosine_integral`
    for validated scalar access.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    x = np.atleast_1d(u)
    si = np.empty_like(x)
    ci = np.empty_like(x)
    small = x <= _SEAM
    if np.any(small):
        xs = x[small]
        s, cin = _series(xs)
        si[small] = s
        with np.errstate(divide="ignore"):
            ci[small] = EULER_GAMMA + np.log(xs) + cin
    large = ~small
    if np.any(large):
        si[large], ci[large] = _continued_fraction(x[large])
    if scalar:
        return float(si[0]), float(ci[0])
    return si, ci


def sine_integral(u):
    """Si(u), the integral of sin(t)/t from 0 to u. Odd in u."""
    u = float(u)
    if not np.isfinite(u):
        raise DomainError(f"sine_integral needs a finite argument, got {u}")
    if u == 0.0:
        return 0.0
    si, _ = sici(abs(u))
    return si if u > 0 else -si


def cosine_integral(u):
    """Ci(u) for u > 0.

    Raises DomainError at or below zero, where Ci has its logarithmic
    singularity.
    """
    u = float(u)
    if not np.isfinite(u) or u <= 0.0:
        raise DomainError(f"cosine_integral needs a finite u > 0, got {u}")
    return sici(u)[1]
