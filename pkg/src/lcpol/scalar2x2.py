"""Generic scalar transmission solve for two coupled first-order equations.

With positive coefficients f and g on [0, 1], the slab problem
du/dx = i f v, dv/dx = i g u with u(0) = 1 + r, v(0) = 1 - r and
u(1) = v(1) = t reduces to the self-adjoint equation
(w'/f)' + g w = 0.  Its two fundamental solutions w1, w2 determine the
transmission amplitude in closed form, with |t|^2 + |r|^2 = 1 and a
constant Wronskian available as a cheap integration audit.

This covers the forward map of the one-coefficient slab problem
(f = lambda/eta, g = (lambda^2 + eta^alpha q)/(eta lambda)) whose modulus
data feeds the moment-extraction inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementCurve, rng_stream
from .numerics import segment_step_grid
from .profiles import ScalarProfile, ScalingConfig

__all__ = [
    "ScalarTransmission",
    "solve_scalar",
    "problem_a_transmission",
    "slab_oracle",
    "data_a",
    "ScalarSolveError",
]

DEFAULT_C_STEP = 160
WRONSKIAN_TOL = 1e-8


class ScalarSolveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarTransmission:
    """Transmission/reflection pair with endpoint fundamental data.

    e1, e2 are the combinations w_j'/f - i w_j at x = 1; the transmission
    amplitude is 2 / (e2 + i e1) and 4/|t|^2 = |e1|^2 + |e2|^2 + 2 >= 4.
    """

    t: complex
    r: complex
    w1: float
    w2: float
    dw1: float          # (1/f) w1' at x = 1
    dw2: float          # (1/f) w2' at x = 1
    wronskian_drift: float

    @property
    def e1(self) -> complex:
        return self.dw1 - 1j * self.w1

    @property
    def e2(self) -> complex:
        return self.dw2 - 1j * self.w2


def _rk4_pair(f_nodes, g_nodes, ts):
    """Integrate w' = f p, p' = -g w for both fundamental initial conditions.

    f_nodes, g_nodes: coefficient values at nodes and midpoints,
    shape (2N+1,) + batch.  Returns endpoint state and max Wronskian drift
    (checked at every step) for states stacked as (w1, p1, w2, p2).
    """
    batch = np.broadcast_shapes(f_nodes.shape[1:], g_nodes.shape[1:])
    w1 = np.ones(batch)
    p1 = np.zeros(batch)
    w2 = np.zeros(batch)
    p2 = np.ones(batch)
    drift = 0.0
    n_steps = ts.size - 1

    def rhs(fi, gi, w, p):
        return fi * p, -gi * w

    for k in range(n_steps):
        h = ts[k + 1] - ts[k]
        f0, fm, f1 = f_nodes[2 * k], f_nodes[2 * k + 1], f_nodes[2 * k + 2]
        g0, gm, g1 = g_nodes[2 * k], g_nodes[2 * k + 1], g_nodes[2 * k + 2]
        dw1a, dp1a = rhs(f0, g0, w1, p1)
        dw2a, dp2a = rhs(f0, g0, w2, p2)
        dw1b, dp1b = rhs(fm, gm, w1 + 0.5 * h * dw1a, p1 + 0.5 * h * dp1a)
        dw2b, dp2b = rhs(fm, gm, w2 + 0.5 * h * dw2a, p2 + 0.5 * h * dp2a)
        dw1c, dp1c = rhs(fm, gm, w1 + 0.5 * h * dw1b, p1 + 0.5 * h * dp1b)
        dw2c, dp2c = rhs(fm, gm, w2 + 0.5 * h * dw2b, p2 + 0.5 * h * dp2b)
        dw1d, dp1d = rhs(f1, g1, w1 + h * dw1c, p1 + h * dp1c)
        dw2d, dp2d = rhs(f1, g1, w2 + h * dw2c, p2 + h * dp2c)
        w1 = w1 + (h / 6.0) * (dw1a + 2 * dw1b + 2 * dw1c + dw1d)
        p1 = p1 + (h / 6.0) * (dp1a + 2 * dp1b + 2 * dp1c + dp1d)
        w2 = w2 + (h / 6.0) * (dw2a + 2 * dw2b + 2 * dw2c + dw2d)
        p2 = p2 + (h / 6.0) * (dp2a + 2 * dp2b + 2 * dp2c + dp2d)
        if k % 64 == 0 or k == n_steps - 1:
            drift = max(drift, float(np.max(np.abs(w1 * p2 - w2 * p1 - 1.0))))
    drift = max(drift, float(np.max(np.abs(w1 * p2 - w2 * p1 - 1.0))))
    return w1, p1, w2, p2, drift


def _amplitudes(w1, p1, w2, p2):
    e1 = p1 - 1j * w1
    e2 = p2 - 1j * w2
    den = e2 + 1j * e1
    t = 2.0 / den
    r = (1j * e1 - e2) / den
    return t, r


def solve_scalar(f: ScalarProfile, g: ScalarProfile, tol: float = WRONSKIAN_TOL,
                 c_step: int = DEFAULT_C_STEP) -> ScalarTransmission:
    """Solve the generic scalar transmission problem for profiles f, g > 0."""
    breaks = np.union1d(f.breakpoint_list(), g.breakpoint_list())
    probe = np.linspace(0.0, 1.0, 257)
    fv, gv = f.eval(probe), g.eval(probe)
    if np.any(fv <= 0.0) or np.any(gv <= 0.0):
        raise ScalarSolveError("coefficients f, g must be positive on [0, 1]")
    n_total = int(math.ceil(c_step * (1.0 + max(fv.max(), gv.max()))))
    ts = segment_step_grid(breaks, n_total)
    half = np.empty(2 * ts.size - 1)
    half[0::2] = ts
    half[1::2] = 0.5 * (ts[:-1] + ts[1:])
    w1, p1, w2, p2, drift = _rk4_pair(f.eval(half), g.eval(half), ts)
    if drift > tol:
        raise ScalarSolveError(f"Wronskian drift {drift:.3g} exceeds {tol:g}")
    t, r = _amplitudes(w1, p1, w2, p2)
    return ScalarTransmission(t=complex(t), r=complex(r), w1=float(w1), w2=float(w2),
                              dw1=float(p1), dw2=float(p2), wronskian_drift=drift)


def _problem_a_sweep(q: ScalarProfile, lam: np.ndarray, eta: float, alpha: float,
                     c_step: int, tol: float):
    """Batched solve of the one-coefficient problem over a lambda grid."""
    sup_q = q.sup_norm()
    if sup_q > 1.0 + 1e-9:
        raise ScalarSolveError("problem-a coefficient must satisfy sup |q| <= 1")
    sup_f = lam.max() / eta
    sup_g = (lam.max() ** 2 + eta ** alpha * sup_q) / (eta * lam.min())
    n_total = int(math.ceil(c_step * (1.0 + max(sup_f, sup_g))))
    ts = segment_step_grid(q.breakpoint_list(), n_total)
    half = np.empty(2 * ts.size - 1)
    half[0::2] = ts
    half[1::2] = 0.5 * (ts[:-1] + ts[1:])
    qv = q.eval(half)[:, None]
    rad = lam[None, :] ** 2 + eta ** alpha * qv
    if np.any(rad <= 0.0):
        raise ScalarSolveError("evanescent regime: lambda^2 + eta^alpha q <= 0")
    f_nodes = np.broadcast_to(lam[None, :] / eta, rad.shape)
    g_nodes = rad / (eta * lam[None, :])
    w1, p1, w2, p2, drift = _rk4_pair(f_nodes, g_nodes, ts)
    if drift > tol:
        raise ScalarSolveError(f"Wronskian drift {drift:.3g} exceeds {tol:g}")
    t, r = _amplitudes(w1, p1, w2, p2)
    return t, r, drift


def problem_a_transmission(q: ScalarProfile, lam, eta: float, alpha: float,
                           c_step: int = DEFAULT_C_STEP, tol: float = WRONSKIAN_TOL):
    """Complex transmission T(lambda) of the one-coefficient slab problem.

    Accepts a scalar or an array of lambda values; the sweep is a single
    batched integration.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr <= 0.0) or np.any(lam_arr > 1.0 + 1e-12):
        raise ScalarSolveError("lambda must lie in (0, 1]")
    t, _, _ = _problem_a_sweep(q, lam_arr, eta, alpha, c_step, tol)
    return complex(t[0]) if np.ndim(lam) == 0 else t


def problem_a_reflection(q: ScalarProfile, lam, eta: float, alpha: float,
                         c_step: int = DEFAULT_C_STEP, tol: float = WRONSKIAN_TOL):
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    t, r, _ = _problem_a_sweep(q, lam_arr, eta, alpha, c_step, tol)
    if np.ndim(lam) == 0:
        return complex(t[0]), complex(r[0])
    return t, r


def slab_oracle(q0: float, lam: float, eta: float, alpha: float) -> complex:
    """Closed-form transmission for a constant coefficient q0.

    With k = sqrt(lambda^2 + eta^alpha q0)/eta and f = lambda/eta the
    fundamental solutions are trigonometric and T follows from the endpoint
    formula; the evanescent regime is rejected.
    """
    rad = lam ** 2 + eta ** alpha * q0
    if rad <= 0.0:
        raise ScalarSolveError("evanescent regime: lambda^2 + eta^alpha q0 <= 0")
    k = math.sqrt(rad) / eta
    f = lam / eta
    w1 = math.cos(k)
    w2 = (f / k) * math.sin(k)
    dw1 = -(k / f) * math.sin(k)
    dw2 = math.cos(k)
    e1 = dw1 - 1j * w1
    e2 = dw2 - 1j * w2
    return 2.0 / (e2 + 1j * e1)


def data_a(q: ScalarProfile, cfg: ScalingConfig, noisy: bool = False,
           c_step: int = DEFAULT_C_STEP):
    """Forward modulus data and its derived curve on the configured grid.

    Returns (D_A, D_A') where D_A(lambda) = |T(lambda)| plus, when noisy,
    zero-mean Gaussian noise of standard deviation eta^(5+alpha)/lambda^5
    drawn from per-lambda seeded streams, and D_A' = 4/D_A^2 - 2.
    """
    lam = cfg.lambda_grid
    t = problem_a_transmission(q, lam, cfg.eta, cfg.alpha, c_step=c_step)
    d_a = np.abs(t)
    sigma = cfg.sigma(lam)
    if noisy:
        noise = np.array([rng_stream(cfg.rng_seed, 1, i).normal(0.0, 1.0)
                          for i in range(lam.size)])
        d_a = d_a + sigma * noise
    d_prime = 4.0 / d_a ** 2 - 2.0
    meta = {"eta": cfg.eta, "alpha": cfg.alpha, "tau": cfg.tau, "seed": cfg.rng_seed}
    curve_a = MeasurementCurve(lam, d_a, sigma if noisy else None, kind="d_a",
                               exact=not noisy, meta=meta)
    curve_p = MeasurementCurve(lam, d_prime, 8.0 * sigma if noisy else None,
                               kind="d_a_prime", exact=not noisy, meta=meta)
    return curve_a, curve_p
