"""Recovery of the five moderate-incidence parameters from modulus data.

On the window lambda in [1/2, 1] the rescaled data
(4 lambda^4 / eta^(2 alpha)) (D_A' - 2) follows a five-parameter law:
an offset pair in A1 = q(0)+q(1), A2 = q(0)q(1), a cosine/sine pair whose
amplitudes carry A2 and A3 = (ln q)'(1) - (ln q)'(0), and a slow phase
drift carrying A4 = int q and A5 = int q^2.  Everything else about q is
invisible at these angles.

The fit is separable: for fixed (A4, A5) the model is linear in eight
regression coefficients, so a coarse grid plus damped Gauss-Newton over
(A4, A5) solves the nonlinear part in two dimensions, and the physical
parameters are read off the linear coefficients (an explicit-formula
extraction would also be possible; the least-squares route is implemented).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementCurve
from .profiles import ScalingConfig

__all__ = ["MomentEstimate", "extract_moments", "endpoint_values", "ExtractionError"]

LAMBDA_WINDOW = (0.5, 1.0)


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class MomentEstimate:
    """Fitted parameters with heuristic error bars.

    ``values`` holds (A1 ... A5); ``errors`` the linearized one-sigma bars
    scaled by the fit residual; ``phase_offset`` is the fitted phase of the
    fast oscillation at lambda = 1 (mod 2 pi).
    """

    values: tuple
    errors: tuple
    residual_rms: float
    phase_offset: float
    n_points: int
    noise_budget: float

    @property
    def a1(self):
        return self.values[0]

    @property
    def a2(self):
        return self.values[1]

    @property
    def a3(self):
        return self.values[2]

    @property
    def a4(self):
        return self.values[3]

    @property
    def a5(self):
        return self.values[4]


def _rescale(curve: MeasurementCurve, eta: float, alpha: float):
    lam = curve.lam
    mask = (lam >= LAMBDA_WINDOW[0] - 1e-12) & (lam <= LAMBDA_WINDOW[1] + 1e-12)
    lam = lam[mask]
    if lam.size < 24:
        raise ExtractionError("too few samples on the [1/2, 1] window")
    if float(np.max(np.diff(lam))) > eta ** 2 + 1e-12:
        raise ExtractionError("grid spacing above eta^2: insufficient density "
                              "for the phase-resolved fit")
    vals = np.asarray(curve.value, dtype=float)[mask]
    dtilde = 4.0 * lam ** 4 / eta ** (2.0 * alpha) * (vals - 2.0)
    return lam, dtilde


def _phase(lam, eta, alpha, a4, a5):
    return (2.0 * lam / eta
            + (1.0 - lam) / lam * eta ** (alpha - 1.0) * a4
            + (lam ** 3 - 1.0) / (4.0 * lam ** 3) * eta ** (2.0 * alpha - 1.0) * a5)


def _design(lam, eta, alpha, a4, a5):
    phi = _phase(lam, eta, alpha, a4, a5)
    x = eta ** alpha / lam ** 2
    c, s = np.cos(phi), np.sin(phi)
    el = eta / lam
    return np.column_stack([np.ones_like(lam), x, c, s, x * c, x * s, el * c, el * s])


def _inner_fit(lam, dtilde, eta, alpha, a4, a5):
    design = _design(lam, eta, alpha, a4, a5)
    coef, *_ = np.linalg.lstsq(design, dtilde, rcond=None)
    resid = dtilde - design @ coef
    return coef, resid


def _model_from_params(lam, eta, alpha, params):
    """Endpoint-exact model: params = (q0, q1, s, A4, A5, phi0).

    With r_i = sqrt(1 + a q_i), a = eta^alpha/lambda^2, the offset and
    cosine amplitude are the closed forms
    2 [(r0 r1 - 1)^2 +- (r1 - r0)^2] / (a^2 r0 r1), exact in a.  The sine
    amplitude is s = q(0)q(1) A3 times eta/lambda with the symmetrized
    endpoint correction (the antisymmetric part sits below the error
    budget and would only open a degenerate fit direction).
    """
    q0, q1, s, a4, a5, phi0 = params
    a = eta ** alpha / lam ** 2
    r0sq = np.maximum(1.0 + a * q0, 1e-12)
    r1sq = np.maximum(1.0 + a * q1, 1e-12)
    r0 = np.sqrt(r0sq)
    r1 = np.sqrt(r1sq)
    prod = r0 * r1
    sq_sum = (prod - 1.0) ** 2
    sq_dif = (r1 - r0) ** 2
    offset = 2.0 * (sq_sum + sq_dif) / (a ** 2 * prod)
    camp = 2.0 * (sq_dif - sq_sum) / (a ** 2 * prod)
    samp = s * (eta / lam) * 0.5 * (1.0 / (r0 * r1sq) + 1.0 / (r1 * r0sq))
    phi = _phase(lam, eta, alpha, a4, a5) + phi0
    return offset + camp * np.cos(phi) + samp * np.sin(phi)


def _recover_physical(coef):
    """Read (A1, A2, A3, phi0) off the eight linear coefficients."""
    c1, c2, c3, c4, c5, c6, c7, c8 = coef
    amp = math.hypot(c3, c4)
    a2 = 0.5 * amp
    if amp < 1e-12:
        return math.sqrt(max(c1, 0.0)), 0.0, 0.0, 0.0
    phi0 = math.atan2(c4, -c3)
    # x-modulation of the cosine pair fixes the sign and scale of A1
    a1_mod = -(c5 * c3 + c6 * c4) / (2.0 * a2 ** 2)
    a1_sq = c1 + 2.0 * a2
    a1 = math.copysign(math.sqrt(max(a1_sq, 0.0)), a1_mod if a1_mod != 0 else 1.0)
    a3 = (c7 * c4 - c8 * c3) / (2.0 * a2 ** 2)
    return a1, a2, a3, phi0


def _gauss_newton_2d(lam, dtilde, eta, alpha, start, bounds, max_iter=60):
    """Damped Gauss-Newton over (A4, A5) with the inner linear solve."""
    a4, a5 = start

    def ssr(p4, p5):
        _, resid = _inner_fit(lam, dtilde, eta, alpha, p4, p5)
        return resid

    cur = ssr(a4, a5)
    cur_norm = float(cur @ cur)
    step4, step5 = 1e-5, 1e-5
    lam_damp = 1e-3
    for _ in range(max_iter):
        j4 = (ssr(a4 + step4, a5) - cur) / step4
        j5 = (ssr(a4, a5 + step5) - cur) / step5
        jac = np.column_stack([j4, j5])
        g = jac.T @ cur
        h = jac.T @ jac
        improved = False
        for _ in range(12):
            try:
                delta = np.linalg.solve(h + lam_damp * np.diag(np.diag(h) + 1e-30), -g)
            except np.linalg.LinAlgError:
                break
            n4 = min(max(a4 + delta[0], bounds[0][0]), bounds[0][1])
            n5 = min(max(a5 + delta[1], bounds[1][0]), bounds[1][1])
            new = ssr(n4, n5)
            new_norm = float(new @ new)
            if new_norm < cur_norm:
                a4, a5, cur, cur_norm = n4, n5, new, new_norm
                lam_damp = max(lam_damp / 3.0, 1e-10)
                improved = True
                break
            lam_damp *= 10.0
        if not improved or (abs(delta[0]) < 1e-10 and abs(delta[1]) < 1e-10):
            break
    return a4, a5, cur_norm


PARAM_LO = np.array([-1.0, -1.0, -np.inf, -1.0, 0.0, -np.inf])
PARAM_HI = np.array([1.0, 1.0, np.inf, 1.0, 1.0, np.inf])
N_PARAMS = 6


def _polish_full(lam, dtilde, eta, alpha, params, max_iter=80):
    """Joint damped Gauss-Newton on (q0, q1, s, A4, A5, phi0).

    Moment parameters stay inside their a-priori boxes (|q| <= 1 forces
    |A4| <= 1 and A5 in [0, 1]).  Returns parameters, residual rms and the
    residual-scaled covariance (heuristic: linearization at the optimum).
    """
    p = np.clip(np.asarray(params, dtype=float), PARAM_LO, PARAM_HI)
    steps = np.array([1e-6, 1e-6, 1e-5, 1e-6, 1e-6, 1e-7])

    def resid(pp):
        return dtilde - _model_from_params(lam, eta, alpha, pp)

    cur = resid(p)
    cur_norm = float(cur @ cur)
    damp = 1e-3
    h = np.eye(N_PARAMS)
    for _ in range(max_iter):
        jac = np.empty((lam.size, N_PARAMS))
        for k in range(N_PARAMS):
            dp = p.copy()
            dp[k] += steps[k]
            jac[:, k] = (resid(dp) - cur) / steps[k]
        g = jac.T @ cur
        h = jac.T @ jac
        moved = False
        delta = np.zeros(N_PARAMS)
        for _ in range(14):
            try:
                delta = np.linalg.solve(h + damp * np.diag(np.diag(h) + 1e-30), -g)
            except np.linalg.LinAlgError:
                break
            cand = np.clip(p + delta, PARAM_LO, PARAM_HI)
            new = resid(cand)
            new_norm = float(new @ new)
            if new_norm < cur_norm - 1e-15 * cur_norm:
                p, cur, cur_norm = cand, new, new_norm
                damp = max(damp / 3.0, 1e-12)
                moved = True
                break
            damp *= 10.0
        if not moved or float(np.max(np.abs(delta))) < 1e-11:
            break
    dof = max(lam.size - N_PARAMS, 1)
    sigma2 = cur_norm / dof
    try:
        cov = sigma2 * np.linalg.pinv(h)
    except np.linalg.LinAlgError:
        cov = np.full((N_PARAMS, N_PARAMS), np.inf)
    return p, math.sqrt(cur_norm / lam.size), cov


def extract_moments(curve: MeasurementCurve, cfg: ScalingConfig,
                    mismatch_factor: float = 10.0) -> MomentEstimate:
    """Fit the five-parameter law to a D_A' curve on the [1/2, 1] window.

    Raises :class:`ExtractionError` when the residual exceeds
    ``mismatch_factor`` times the noise budget (model mismatch, e.g. a
    coefficient that is not four times differentiable) or when the grid is
    too sparse to resolve the fast phase.
    """
    eta, alpha = cfg.eta, cfg.alpha
    lam, dtilde = _rescale(curve, eta, alpha)
    # VARPRO stage: coarse grid then damped refinement over the phase pair
    grid4 = np.linspace(-1.0, 1.0, 41)
    grid5 = np.linspace(0.0, 1.0, 21)
    scores = np.empty((grid4.size, grid5.size))
    for i, a4 in enumerate(grid4):
        for j, a5 in enumerate(grid5):
            _, resid = _inner_fit(lam, dtilde, eta, alpha, a4, a5)
            scores[i, j] = resid @ resid
    order = np.argsort(scores, axis=None)
    starts = []
    for flat in order[:6]:
        i, j = np.unravel_index(flat, scores.shape)
        starts.append((grid4[i], grid5[j]))
    best = None
    for start in starts:
        a4, a5, norm = _gauss_newton_2d(lam, dtilde, eta, alpha, start,
                                        bounds=((-1.2, 1.2), (-0.1, 1.2)))
        if best is None or norm < best[2] - 1e-15 or (
                abs(norm - best[2]) <= 1e-15 and (a4, a5) < (best[0], best[1])):
            best = (a4, a5, norm)
    a4, a5, _ = best
    coef, _ = _inner_fit(lam, dtilde, eta, alpha, a4, a5)
    a1, a2, a3, phi0 = _recover_physical(coef)
    disc = max(a1 * a1 - 4.0 * a2, 0.0)
    q0 = 0.5 * (a1 - math.sqrt(disc))
    q1 = 0.5 * (a1 + math.sqrt(disc))
    start = (q0, q1, -0.5 * a2 * a3, 0.5 * a2 * a3,
             max(-1.0, min(1.0, a4)), max(0.0, min(1.0, a5)), phi0)
    params, resid_rms, cov = _polish_full(lam, dtilde, eta, alpha, start)
    q0, q1, g0, g1, a4, a5, phi0 = params
    phi0 = math.remainder(phi0, 2.0 * math.pi)
    a1, a2 = q0 + q1, q0 * q1
    a3 = (g1 - g0) / a2 if abs(a2) > 1e-9 else 0.0
    # delta-method bars for (A1, A2, A3) from the fitted block
    jt = np.zeros((3, N_PARAMS))
    jt[0, 0] = jt[0, 1] = 1.0
    jt[1, 0], jt[1, 1] = q1, q0
    if abs(a2) > 1e-9:
        jt[2, 0] = -a3 * q1 / a2
        jt[2, 1] = -a3 * q0 / a2
        jt[2, 2] = -1.0 / a2
        jt[2, 3] = 1.0 / a2
    cov_a = jt @ cov @ jt.T
    bars = np.array([math.sqrt(max(cov_a[0, 0], 0.0)),
                     math.sqrt(max(cov_a[1, 1], 0.0)),
                     math.sqrt(max(cov_a[2, 2], 0.0)),
                     math.sqrt(max(cov[4, 4], 0.0)),
                     math.sqrt(max(cov[5, 5], 0.0))])
    sig = np.asarray(curve.sigma, dtype=float)
    sig = sig[(curve.lam >= LAMBDA_WINDOW[0] - 1e-12)
              & (curve.lam <= LAMBDA_WINDOW[1] + 1e-12)]
    noise_rms = float(np.sqrt(np.mean((4.0 * lam ** 4 / eta ** (2 * alpha) * sig) ** 2)))
    budget = max(noise_rms, eta ** 2)
    if resid_rms > mismatch_factor * budget:
        raise ExtractionError(
            f"model mismatch: residual {resid_rms:.3g} above {mismatch_factor:g} x "
            f"budget {budget:.3g}; coefficient likely not C^4")
    if abs(a2) < 3.0 * bars[1] and abs(a2) < 1e-3:
        # oscillation amplitude indistinguishable from zero: A3, phase moot
        a3 = 0.0
        bars[2] = np.inf
    return MomentEstimate(values=(a1, a2, a3, a4, a5),
                          errors=tuple(float(b) for b in bars),
                          residual_rms=resid_rms, phase_offset=float(phi0),
                          n_points=int(lam.size), noise_budget=budget)


def endpoint_values(m: MomentEstimate, tol: float | None = None):
    """Unordered endpoint pair {q(0), q(1)} from (A1, A2).

    The two values are the roots of x^2 - A1 x + A2; mirror symmetry of the
    data makes their order undecidable.  A discriminant within ``tol`` of
    zero is clamped to a double root; a strongly negative one signals an
    inconsistent estimate.
    """
    a1, a2 = m.a1, m.a2
    if tol is None:
        tol = max(1e-9, 6.0 * (abs(a1) * m.errors[0] + m.errors[1]))
    disc = a1 * a1 - 4.0 * a2
    if disc < -tol:
        raise ExtractionError(f"negative discriminant {disc:.3g} beyond tolerance "
                              f"{tol:.3g}: inconsistent (A1, A2)")
    root = math.sqrt(max(disc, 0.0))
    pair = ((a1 - root) / 2.0, (a1 + root) / 2.0)
    return (min(pair), max(pair))
