"""In-plane uniaxial cell: reduction to the scalar slab problem and phase data.

With the director in the incidence plane the 4x4 system block-decouples;
removing the common diagonal phase and rescaling the depth variable turns
the tilt block into the one-coefficient scalar problem, at the price of a
unimodular factor F(lambda) that the polarimeter cannot attach to a sign
of the incidence angle.  Both branches T*F and T/F are therefore emitted.
The ratio F^2 carries one usable number, which locates a single sign
change of the tilt (the split of the slab into up- and down-tilted parts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measurement import MeasurementCurve
from .numerics import MonotoneInterpolant, cumulative_simpson, simpson
from .profiles import DielectricProfile, ScalarProfile, ScalingConfig
from .scalar2x2 import _amplitudes, _rk4_pair, ScalarSolveError
from .berreman import transmission_sweep

__all__ = [
    "UniaxialReduction",
    "reduce_uniaxial",
    "phase_factor",
    "uniaxial_data",
    "problem_c_solve",
    "ProblemCSolution",
    "UniaxialError",
]

DEFAULT_GRID = 4097
DEFAULT_C_STEP = 160


class UniaxialError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UniaxialReduction:
    """Scalar reduction of the in-plane tilt block.

    tau_of_t is the strictly increasing depth reparametrization with
    inverse mu; q_eff is the effective coefficient in the new variable
    (the full bracket, not normalized by a power of eta); K is the phase
    integral driving F(lambda).
    """

    q_eff: ScalarProfile
    eta_tilde: float
    t_grid: np.ndarray
    tau_of_t: np.ndarray
    normalizer: float
    phase_integral: float
    delta: float
    eta: float

    def mu(self, tau):
        """Inverse reparametrization, monotone cubic on the stored grid."""
        interp = MonotoneInterpolant(self.tau_of_t, self.t_grid)
        return interp(np.asarray(tau, dtype=float))


def _even_cos2(psi_vals: np.ndarray) -> np.ndarray:
    # cos(2 psi) computed through |psi| so sign-flipped tilt families give
    # bit-identical coefficient arrays.
    return np.cos(2.0 * np.abs(psi_vals))


def reduce_uniaxial(psi: ScalarProfile, delta: float, eta: float,
                    n_grid: int = DEFAULT_GRID) -> UniaxialReduction:
    """Reduce the tilt block to the scalar slab problem.

    Computes the normalizer N = int 1/(1 + delta cos 2 psi), the
    reparametrization tau(t), its inverse, the effective coefficient
    q_eff(tau) = delta/sqrt(1-delta^2) (cos 2 psi(mu(tau)) + delta/(1+sqrt(1-delta^2)))
    and the phase integral K = int sin 2 psi / (1 + delta cos 2 psi).
    """
    if not abs(delta) < 1.0:
        raise UniaxialError("|delta| must be below 1")
    if n_grid % 2 == 0:
        n_grid += 1
    t = np.linspace(0.0, 1.0, n_grid)
    h = t[1] - t[0]
    psi_vals = psi.eval(t)
    c2 = _even_cos2(psi_vals)
    w = 1.0 / (1.0 + delta * c2)
    norm = float(simpson(w, h))
    tau_vals = cumulative_simpson(w, h) / norm
    tau_vals[0], tau_vals[-1] = 0.0, 1.0
    root = math.sqrt(1.0 - delta * delta)
    eta_tilde = eta / (root * norm)
    k_int = float(simpson(np.sin(2.0 * psi_vals) * w, h))
    # effective coefficient sampled on a uniform tau grid via the inverse map
    mu_interp = MonotoneInterpolant(tau_vals, t)
    tau_uniform = np.linspace(0.0, 1.0, n_grid)
    c2_mu = _even_cos2(psi.eval(np.clip(mu_interp(tau_uniform), 0.0, 1.0)))
    q_vals = (delta / root) * (c2_mu + delta / (1.0 + root))
    q_eff = ScalarProfile.from_samples(q_vals, order=3)
    return UniaxialReduction(q_eff=q_eff, eta_tilde=eta_tilde, t_grid=t,
                             tau_of_t=tau_vals, normalizer=norm,
                             phase_integral=k_int, delta=delta, eta=eta)


def phase_factor(psi: ScalarProfile, delta: float, eta: float, lam,
                 n_grid: int = DEFAULT_GRID):
    """Unimodular factor F(lambda) = exp(i delta sqrt(1-lambda^2) K / eta)."""
    red = reduce_uniaxial(psi, delta, eta, n_grid)
    lam_arr = np.asarray(lam, dtype=float)
    return np.exp(1j * delta * np.sqrt(np.maximum(0.0, 1.0 - lam_arr ** 2))
                  * red.phase_integral / eta)


def _reduced_transmission(red: UniaxialReduction, lam: np.ndarray,
                          c_step: int = DEFAULT_C_STEP):
    """T(lambda) from the reduced scalar problem, batched over lambda."""
    eta_t = red.eta_tilde
    sup_v = float(np.max(np.abs(red.q_eff.samples)))
    sup_f = lam.max() / eta_t
    sup_g = (lam.max() ** 2 + sup_v) / (eta_t * lam.min())
    n_total = int(math.ceil(c_step * (1.0 + max(sup_f, sup_g))))
    ts = np.linspace(0.0, 1.0, n_total + 1)
    half = np.linspace(0.0, 1.0, 2 * n_total + 1)
    v = red.q_eff.eval(half)[:, None]
    f_nodes = np.broadcast_to(lam[None, :] / eta_t, (half.size, lam.size))
    g_nodes = (lam[None, :] ** 2 + v) / (eta_t * lam[None, :])
    if np.any(g_nodes <= 0.0):
        raise UniaxialError("reduced problem left the propagating regime")
    w1, p1, w2, p2, drift = _rk4_pair(f_nodes, g_nodes, ts)
    t, r = _amplitudes(w1, p1, w2, p2)
    return t, drift


def _matched_cell(psi: ScalarProfile, delta: float) -> tuple[DielectricProfile, float]:
    """Uniaxial cell with the given contrast and matched surround n0 = 1."""
    root = math.sqrt(1.0 - delta * delta)
    eps_perp = (1.0 + delta) / root
    eps_par = (1.0 - delta) / root
    return DielectricProfile.uniaxial(psi, eps_perp, eps_par), 1.0


def uniaxial_data(psi: ScalarProfile, delta: float, eta: float, lam_grid,
                  verify: bool = True, verify_tol: float = 1e-6,
                  c_step: int = DEFAULT_C_STEP, n_grid: int = DEFAULT_GRID):
    """Both measurable branches T*F and T/F on the lambda grid.

    The polarimeter sees T(lambda) F(lambda) at one sign of the incidence
    angle and T/F at the other, and cannot tell which is which.  With
    ``verify=True`` the product |T*F| is checked against the tilt-block
    transmission of the full 4x4 solve to ``verify_tol``.
    """
    lam = np.atleast_1d(np.asarray(lam_grid, dtype=float))
    red = reduce_uniaxial(psi, delta, eta, n_grid)
    t_red, drift = _reduced_transmission(red, lam, c_step)
    f_fac = np.exp(1j * delta * np.sqrt(np.maximum(0.0, 1.0 - lam ** 2))
                   * red.phase_integral / eta)
    meta = {"delta": delta, "eta": eta, "K": red.phase_integral}
    curve_tf = MeasurementCurve(lam, t_red * f_fac, kind="uniaxial_tf", meta=meta)
    curve_tof = MeasurementCurve(lam, t_red / f_fac, kind="uniaxial_t_over_f", meta=meta)
    if verify:
        cell, n0 = _matched_cell(psi, delta)
        tau = 1.0 + 1e-9
        cfg = ScalingConfig(eta=eta, alpha=1.0, tau=tau, n0=n0,
                            lambda_grid=np.array([math.sqrt(tau * eta), 1.0]))
        sweep = transmission_sweep(cell, cfg, lam, c_step=c_step)
        diff = float(np.max(np.abs(np.abs(sweep["t1"]) - np.abs(t_red * f_fac))))
        if diff > verify_tol:
            raise UniaxialError(
                f"reduced solve disagrees with the 4x4 solver: {diff:.3g} > {verify_tol:g}")
    return curve_tf, curve_tof


@dataclass(frozen=True)
class ProblemCSolution:
    """Candidate sign-change locations with the delta^2 uncertainty band."""

    s0: float
    s1: float
    s0_band: tuple
    s1_band: tuple
    g_total: float


def _g_cumulative(abs_psi: ScalarProfile, delta: float, n_grid: int):
    t = np.linspace(0.0, 1.0, n_grid)
    h = t[1] - t[0]
    a = np.abs(abs_psi.eval(t))
    if np.any(a > np.pi + 1e-9):
        raise UniaxialError("|psi| must take values in [0, pi]")
    integrand = np.sin(a) / (1.0 + delta * np.cos(a))
    g = cumulative_simpson(integrand, h)
    return t, g


def _invert_g(t: np.ndarray, g: np.ndarray, target: float) -> float:
    # bisection in G-value space on the monotone cubic interpolant
    interp = MonotoneInterpolant(t, g)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = float(interp(mid))
        if abs(val - target) < 1e-12 * max(1.0, g[-1]):
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def problem_c_solve(abs_psi: ScalarProfile, delta: float, d_c: float,
                    n_grid: int = DEFAULT_GRID) -> ProblemCSolution:
    """Locate the tilt sign change from the one-number phase datum.

    G(t) = int_0^t sin|psi| / (1 + delta cos|psi|) is non-decreasing; the
    two sign patterns (positive-then-negative / negative-then-positive)
    give the candidates G(s0) = (G(1) + D_C)/2 and G(s1) = (G(1) - D_C)/2.
    The reported bands re-solve at D_C +- delta^2, the accuracy to which
    the datum is known.
    """
    if n_grid % 2 == 0:
        n_grid += 1
    t, g = _g_cumulative(abs_psi, delta, n_grid)
    g_total = float(g[-1])
    if g_total <= 0.0:
        raise UniaxialError("G is flat: |psi| vanishes (or equals pi) a.e.")
    if not (-g_total < d_c < g_total):
        raise UniaxialError(f"datum {d_c:.6g} outside (-G(1), G(1)) = (+-{g_total:.6g})")
    if np.any(np.diff(g) <= 0.0):
        raise UniaxialError("G is not strictly increasing near a root; "
                            "|psi| sticks at 0 or pi on an interval")

    def solve_at(dc):
        s0 = _invert_g(t, g, 0.5 * (g_total + dc))
        s1 = _invert_g(t, g, 0.5 * (g_total - dc))
        return s0, s1

    s0, s1 = solve_at(d_c)
    band = delta * delta
    lo_ok = -g_total < d_c - band < g_total
    hi_ok = -g_total < d_c + band < g_total
    s0_lo, s1_hi = solve_at(d_c - band) if lo_ok else (s0, s1)
    s0_hi, s1_lo = solve_at(d_c + band) if hi_ok else (s0, s1)
    return ProblemCSolution(s0=s0, s1=s1,
                            s0_band=(min(s0_lo, s0_hi), max(s0_lo, s0_hi)),
                            s1_band=(min(s1_lo, s1_hi), max(s1_lo, s1_hi)),
                            g_total=g_total)
