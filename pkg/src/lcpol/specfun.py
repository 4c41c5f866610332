"""Special functions implemented in-repo: erf, half-integer gamma, J0, J1.

Each function switches between a convergent series near the origin and an
asymptotic or integral representation further out:

* ``erf``   -- Maclaurin series for |x| < 3, Lentz continued fraction for
               the complementary function beyond.
* ``j0/j1`` -- power series for |x| <= 9; the periodic integral
               representation (1/2pi) int cos(n s - x sin s) ds evaluated by
               the trapezoidal rule (spectrally accurate) for 9 < |x| <= 30;
               Hankel asymptotic expansion beyond 30.
* ``gamma_half`` -- exact recurrence from Gamma(1/2) = sqrt(pi).

Accuracy is checked against 25-digit reference values committed under
``tests/fixtures`` and produced by an independent arbitrary-precision
series oracle.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["erf", "erfc", "gamma_half", "j0", "j1"]

_SQRT_PI = math.sqrt(math.pi)


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)),  |x| < 3
    term = x.copy()
    total = x.copy()
    x2 = x * x
    for n in range(1, 60):
        term = -term * x2 / n
        total = total + term / (2 * n + 1)
    return 2.0 / _SQRT_PI * total


def _erfc_contfrac(x: float) -> float:
    # sqrt(pi) exp(x^2) erfc(x) = 1/(x+ (1/2)/(x+ 1/(x+ (3/2)/(x+ 2/(x+ ...)))))
    # evaluated with the modified Lentz algorithm; converges fast for x >= 3.
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    for j in range(1, 300):
        a = 1.0 if j == 1 else (j - 1) / 2.0
        d = x + a * d
        if abs(d) < tiny:
            d = tiny
        c = x + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / _SQRT_PI * f


def erf(x):
    """Error function, vectorized, |error| < 1e-14 on the real line."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    sign = np.sign(arr)
    ax = np.abs(arr)
    small = ax < 3.0
    if np.any(small):
        out[small] = _erf_series(ax[small])
    for i in np.nonzero(~small)[0]:
        out[i] = 1.0 - _erfc_contfrac(float(ax[i]))
    out *= sign
    return float(out[0]) if scalar else out


def erfc(x):
    return 1.0 - erf(x)


def gamma_half(n) -> float:
    """Gamma(n + 1/2) for integer n >= 0, by the exact recurrence."""
    n = int(n)
    if n < 0:
        raise ValueError("gamma_half defined for n >= 0")
    val = _SQRT_PI
    for k in range(n):
        val *= k + 0.5
    return val


def _bessel_series(x: np.ndarray, nu: int) -> np.ndarray:
    # J_nu(x) = sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)
    half = 0.5 * x
    q = half * half
    term = np.ones_like(x) if nu == 0 else half
    total = term.copy()
    for k in range(1, 40):
        term = -term * q / (k * (k + nu))
        total += term
    return total


def _bessel_integral(x: np.ndarray, nu: int, nodes: int = 128) -> np.ndarray:
    # (1/2pi) int_0^2pi cos(nu s - x sin s) ds; trapezoid is spectrally exact
    # here because the integrand's Fourier tail below the alias order ~nodes
    # is negligible for |x| <= 30.
    s = np.linspace(0.0, 2.0 * np.pi, nodes, endpoint=False)
    return np.mean(np.cos(nu * s[None, :] - x[:, None] * np.sin(s)[None, :]), axis=1)


_HANKEL_TERMS = 14


def _bessel_asymptotic(x: np.ndarray, nu: int) -> np.ndarray:
    # J_nu(x) ~ sqrt(2/пx) [P cos(chi) - Q sin(chi)], chi = x - nu pi/2 - pi/4
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    inv8x = 1.0 / (8.0 * x)
    for k in range(1, _HANKEL_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / k * inv8x
        if k % 2 == 1:
            q += term if (k % 4 == 1) else -term
        else:
            p += -term if (k % 4 == 2) else term
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _bessel(x, nu: int):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).astype(float)
    sign = np.where((arr < 0) & (nu == 1), -1.0, 1.0)
    ax = np.abs(arr)
    out = np.empty_like(ax)
    lo = ax <= 9.0
    mid = (ax > 9.0) & (ax <= 30.0)
    hi = ax > 30.0
    if np.any(lo):
        out[lo] = _bessel_series(ax[lo], nu)
    if np.any(mid):
        out[mid] = _bessel_integral(ax[mid], nu)
    if np.any(hi):
        out[hi] = _bessel_asymptotic(ax[hi], nu)
    out *= sign
    return float(out[0]) if scalar else out


def j0(x):
    """Bessel function of the first kind, order zero."""
    return _bessel(x, 0)


def j1(x):
    """Bessel function of the first kind, order one (odd)."""
    return _bessel(x, 1)
