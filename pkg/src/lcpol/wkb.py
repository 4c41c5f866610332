"""High-frequency closed-form approximation of the slab transmission data.

For a four-times differentiable coefficient the fundamental solutions are
approximated by slowly modulated trigonometric functions of the phase
(lambda/eta) int C, with amplitude factors built from
A = (1 + eta^alpha q / lambda^2)^(-1/4),  B = -A^3 A''/4,
C = (A (1 + eta^2 B / lambda^2))^(-2).
The endpoint values reproduce the modulus data up to an error of order
eta^(5+alpha)/lambda^5, which is also the instrument's error scale: the
data cannot see more of q than these coefficients carry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementCurve
from .numerics import cumulative_simpson, simpson
from .profiles import ScalarProfile, ScalingConfig

__all__ = [
    "WkbCoefficients",
    "wkb_coefficients",
    "wkb_endpoint_solution",
    "wkb_transmission",
    "wkb_data",
    "WkbError",
    "WkbAdmissibilityError",
]

DEFAULT_GRID = 4097


class WkbError(ValueError):
    pass


class WkbAdmissibilityError(WkbError):
    """eta too large for the amplitude construction (1 + eta^(2-alpha) B <= 0)."""


@dataclass(frozen=True, eq=False)
class WkbCoefficients:
    """Amplitude/phase ingredients on a t-grid for fixed (lambda, eta, alpha).

    Arrays may carry a trailing lambda axis.  c_prime0/c_prime1 are dC/dt at
    the slab faces; theta1 is the accumulated phase (lambda/eta) int_0^1 C.
    """

    t: np.ndarray
    a_vals: np.ndarray
    b_vals: np.ndarray
    c_vals: np.ndarray
    c_prime0: np.ndarray
    c_prime1: np.ndarray
    theta1: np.ndarray
    lam: np.ndarray
    eta: float
    alpha: float
    admissibility_margin: float

    @property
    def admissible(self) -> bool:
        return self.admissibility_margin > 0.0


def _q_derivatives(q: ScalarProfile, t: np.ndarray):
    """(q, q', q'', q''') on the grid; C4 data required."""
    if q.is_piecewise:
        return [q.eval(t, derivative=k) for k in range(4)]
    # sampled representation: high-order differences, with a C4 sanity bound
    # (a coarsened grid must not shrink the fourth-difference estimate by
    # more than the smooth-function factor)
    d4_full = q._derivative_samples(4)
    if q.samples.size > 64:
        d4_half = ScalarProfile.from_samples(q.samples[::2], order=q.order)._derivative_samples(4)
        m_full = float(np.max(np.abs(d4_full)))
        m_half = float(np.max(np.abs(d4_half)))
        if m_full > 4.0 * max(m_half, 1.0):
            raise WkbError("sampled coefficient fails the fourth-difference bound; "
                           "q must be C^4 for the high-frequency expansion")
    return [q.eval(t, derivative=k) for k in range(4)]


def wkb_coefficients(q: ScalarProfile, lam, eta: float, alpha: float,
                     n_grid: int = DEFAULT_GRID) -> WkbCoefficients:
    """Evaluate the amplitude/phase coefficients analytically from q.

    Raises :class:`WkbAdmissibilityError` when 1 + eta^(2-alpha) B fails to
    stay positive, the printed admissibility condition for the construction.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr <= 0.0):
        raise WkbError("lambda must be positive")
    if n_grid % 2 == 0:
        n_grid += 1
    t = np.linspace(0.0, 1.0, n_grid)
    qv, q1, q2, q3 = (arr[:, None] for arr in _q_derivatives(q, t))
    x = (eta ** alpha / lam_arr ** 2)[None, :]
    u = 1.0 + x * qv
    if np.any(u <= 0.0):
        raise WkbError("evanescent regime: 1 + eta^alpha q / lambda^2 <= 0")
    u1, u2, u3 = x * q1, x * q2, x * q3
    a = u ** -0.25
    ap = -0.25 * u ** -1.25 * u1
    app = (5.0 / 16.0) * u ** -2.25 * u1 ** 2 - 0.25 * u ** -1.25 * u2
    appp = (-45.0 / 64.0) * u ** -3.25 * u1 ** 3 \
        + (15.0 / 16.0) * u ** -2.25 * u1 * u2 - 0.25 * u ** -1.25 * u3
    b = -0.25 * a ** 3 * app
    bp = -0.25 * (3.0 * a ** 2 * ap * app + a ** 3 * appp)
    margin = float(np.min(1.0 + eta ** (2.0 - alpha) * b))
    if margin <= 0.0:
        raise WkbAdmissibilityError(
            f"eta too large: min(1 + eta^(2-alpha) B) = {margin:.3g} <= 0")
    e2l2 = (eta ** 2 / lam_arr ** 2)[None, :]
    gfun = a * (1.0 + e2l2 * b)
    if np.any(gfun <= 0.0):
        raise WkbAdmissibilityError("eta too large: amplitude factor lost positivity")
    c = gfun ** -2.0
    gp = ap * (1.0 + e2l2 * b) + a * e2l2 * bp
    cp = -2.0 * gfun ** -3.0 * gp
    h = t[1] - t[0]
    theta1 = (lam_arr / eta) * simpson(c, h, axis=0)
    return WkbCoefficients(t=t, a_vals=a, b_vals=b, c_vals=c,
                           c_prime0=cp[0], c_prime1=cp[-1], theta1=theta1,
                           lam=lam_arr, eta=eta, alpha=alpha,
                           admissibility_margin=margin)


def wkb_endpoint_solution(coeffs: WkbCoefficients):
    """Endpoint values (v1(1), v2(1), (eta/lam) v1'(1), (eta/lam) v2'(1)).

    Closed forms: v2 = sin(Theta)/sqrt(C0 C), and v1 the matching cosine
    branch plus the (eta dC/dt(0) / 2 lambda C0) v2 correction that zeroes
    v1'(0); derivatives are differentiated analytically from the same
    expressions.
    """
    c0 = coeffs.c_vals[0]
    c1 = coeffs.c_vals[-1]
    d0, d1 = coeffs.c_prime0, coeffs.c_prime1
    th = coeffs.theta1
    lam, eta = coeffs.lam, coeffs.eta
    sin_t, cos_t = np.sin(th), np.cos(th)
    half = eta / (2.0 * lam)
    v2 = sin_t / np.sqrt(c0 * c1)
    ev2 = np.sqrt(c1 / c0) * cos_t - half * d1 * sin_t / (np.sqrt(c0) * c1 ** 1.5)
    v1 = np.sqrt(c0 / c1) * cos_t + half * (d0 / c0) * v2
    ev1 = (-np.sqrt(c0 * c1) * sin_t - half * d1 * np.sqrt(c0) * cos_t / c1 ** 1.5
           + half * (d0 / c0) * ev2)
    return v1, v2, ev1, ev2


def wkb_transmission(coeffs: WkbCoefficients):
    """Approximate complex transmission 2 / (i ev1 + ev2 + v1 - i v2)."""
    v1, v2, ev1, ev2 = wkb_endpoint_solution(coeffs)
    return 2.0 / (1j * ev1 + ev2 + v1 - 1j * v2)


def wkb_data(q: ScalarProfile, cfg: ScalingConfig | None = None, lam=None,
             eta: float | None = None, alpha: float | None = None,
             n_grid: int = DEFAULT_GRID) -> MeasurementCurve:
    """Approximate modulus data 4/|T|^2 - 2 as the sum of four squares.

    The attached sigma column is the eta^(5+alpha)/lambda^5 error budget of
    the approximation.
    """
    if cfg is not None:
        lam = cfg.lambda_grid if lam is None else lam
        eta, alpha = cfg.eta, cfg.alpha
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    coeffs = wkb_coefficients(q, lam_arr, eta, alpha, n_grid)
    v1, v2, ev1, ev2 = wkb_endpoint_solution(coeffs)
    d_prime = v1 ** 2 + v2 ** 2 + ev1 ** 2 + ev2 ** 2
    budget = eta ** (5.0 + alpha) / lam_arr ** 5
    return MeasurementCurve(lam_arr, d_prime, budget, kind="d_a_prime_wkb",
                            meta={"eta": eta, "alpha": alpha})


def wkb_solution_values(coeffs: WkbCoefficients):
    """v1, v2 on the stored t-grid (used by the substitution-residual audit)."""
    c = coeffs.c_vals
    c0 = c[0]
    h = coeffs.t[1] - coeffs.t[0]
    theta = (coeffs.lam / coeffs.eta) * cumulative_simpson(c, h)
    v2 = np.sin(theta) / np.sqrt(c0 * c)
    half = coeffs.eta / (2.0 * coeffs.lam)
    v1 = np.sqrt(c0 / c) * np.cos(theta) + half * (coeffs.c_prime0 / c0) * v2
    return v1, v2
