"""Non-dimensional 4x4 transfer system for the anisotropic slab.

The optical field is the 4-vector of tangential components
(E1, H2, E2, -H1) evolving as dZ/dt = (i/eta) B(t) Z on the unit slab,
with B assembled from the dielectric tensor rescaled by the surrounding
index.  The transmission problem is solved through the fundamental matrix
and the endpoint linear system; its conditioning is protected by the flux
pairing conj(Z1)^T D Z2, which the exact flow conserves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import segment_step_grid
from .profiles import DielectricProfile, ScalingConfig

__all__ = [
    "D_FLIP",
    "berreman_matrix",
    "fundamental_solution",
    "solve_transmission",
    "transmission_sweep",
    "stokes",
    "flux_pairing",
    "FundamentalSolution",
    "TransmissionResult",
    "BerremanError",
]

D_FLIP = np.array([[0.0, 1.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [0.0, 0.0, 1.0, 0.0]])

DEFAULT_C_STEP = 160
FLUX_TOL = 1e-8
DET_TOL = 1e-6


class BerremanError(RuntimeError):
    """Transfer solve violated one of its guarantees."""


def _scaled_components(profile: DielectricProfile, cfg: ScalingConfig, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    comps = tuple(c / cfg.n0 ** 2 for c in profile.components(t))
    if np.any(comps[2] <= 0.0):
        raise BerremanError("rescaled epsilon_33 must stay positive")
    return comps


def _entries_from_components(comps, lam, sin_theta):
    """Nonzero entries of B as broadcastable arrays (t-shape x lam-shape)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0) or np.any(lam > 1.0 + 1e-12):
        raise BerremanError("lambda = cos(theta) must lie in (0, 1]")
    e11, e22, e33, e12, e13, e23 = (c[..., None] for c in comps)
    st = sin_theta if sin_theta is not None else np.sqrt(np.maximum(0.0, 1.0 - lam ** 2))
    ent = {}
    ent[0, 0] = ent[1, 1] = -st * e13 / e33 + 0.0 * lam
    ent[0, 1] = (lam ** 2 + e33 - 1.0) / (lam * e33)
    ent[0, 3] = -st * e23 / (lam * e33)
    ent[1, 0] = lam * (e11 * e33 - e13 ** 2) / e33
    ent[1, 3] = ent[2, 0] = (e12 * e33 - e13 * e23) / e33 + 0.0 * lam
    ent[2, 1] = -st * e23 / (lam * e33)
    ent[2, 3] = ((lam ** 2 + e22 - 1.0) * e33 - e23 ** 2) / (lam * e33)
    ent[3, 2] = lam + 0.0 * e33
    return ent


def _b_entries(profile: DielectricProfile, cfg: ScalingConfig, t, lam, sin_theta):
    return _entries_from_components(_scaled_components(profile, cfg, t), lam, sin_theta)


def berreman_matrix(profile: DielectricProfile, cfg: ScalingConfig, t: float,
                    lam: float, sin_theta: float | None = None) -> np.ndarray:
    """The 4x4 coefficient matrix B(t; lambda).

    ``sin_theta`` defaults to the principal branch +sqrt(1 - lambda^2);
    pass a signed value to model negative incidence.
    """
    ent = _b_entries(profile, cfg, t, lam, sin_theta)
    shape = np.broadcast_shapes(*(np.shape(v) for v in ent.values()))
    return np.squeeze(_assemble_b(ent, shape))


def _assemble_b(ent, shape) -> np.ndarray:
    out = np.zeros(shape + (4, 4))
    for (i, j), v in ent.items():
        out[..., i, j] = np.broadcast_to(v, shape)
    return out


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    """Matrix flow Phi(t) with Phi(0) = Id, stored on the integration grid."""

    ts: np.ndarray
    phis: np.ndarray            # (n_nodes, ..., 4, 4) complex
    eta: float
    lam: object
    flux_drift: float
    step_count: int
    error_estimate: float | None = None

    def at_end(self) -> np.ndarray:
        return self.phis[-1]

    def flux_defects(self) -> np.ndarray:
        """sup-norm of conj(Phi)^T D Phi - D at every stored node."""
        prod = np.einsum("...ji,jk,...kl->...il", self.phis.conj(), D_FLIP, self.phis)
        return np.max(np.abs(prod - D_FLIP), axis=(-2, -1))


def _rk4_flow(b_nodes: np.ndarray, ts: np.ndarray, eta: float, dense: bool):
    """Integrate dPhi/dt = (i/eta) B Phi over the node grid.

    ``b_nodes`` holds B at nodes and midpoints, shape (2N+1, ..., 4, 4).
    """
    n_steps = ts.size - 1
    batch = b_nodes.shape[1:-2]
    phi = np.broadcast_to(np.eye(4, dtype=complex), batch + (4, 4)).copy()
    coef = 1j / eta
    stored = np.empty((n_steps + 1,) + batch + (4, 4), dtype=complex) if dense else None
    if dense:
        stored[0] = phi
    for k in range(n_steps):
        h = ts[k + 1] - ts[k]
        b0 = b_nodes[2 * k]
        bm = b_nodes[2 * k + 1]
        b1 = b_nodes[2 * k + 2]
        k1 = coef * (b0 @ phi)
        k2 = coef * (bm @ (phi + 0.5 * h * k1))
        k3 = coef * (bm @ (phi + 0.5 * h * k2))
        k4 = coef * (b1 @ (phi + h * k3))
        phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if dense:
            stored[k + 1] = phi
    return phi, stored


def _node_grid(profile: DielectricProfile, cfg: ScalingConfig, lam, c_step: int,
               max_steps: int):
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    probe = np.linspace(0.0, 1.0, 129)
    ent = _b_entries(profile, cfg, probe, lam_arr, None)
    b_probe = _assemble_b(ent, (probe.size, lam_arr.size))
    bnorm = float(np.max(np.sum(np.abs(b_probe), axis=-1)))
    n_total = int(math.ceil(c_step * (1.0 + bnorm) / cfg.eta))
    if n_total > max_steps:
        est = (bnorm / cfg.eta) ** 5 / (120.0 * max_steps ** 4)
        raise BerremanError(
            f"step budget exceeded: need ~{n_total} steps; at {max_steps} the "
            f"local error estimate is {est:.3g}")
    ts = segment_step_grid(profile.breakpoint_list(), n_total)
    return ts, lam_arr


def fundamental_solution(profile: DielectricProfile, cfg: ScalingConfig, lam,
                         c_step: int = DEFAULT_C_STEP, dense: bool = True,
                         richardson: bool = False, sin_theta=None,
                         max_steps: int = 4_000_000) -> FundamentalSolution:
    """Integrate the fundamental matrix by fixed-step RK4.

    The step count scales like c_step (1 + max ||B||) / eta so the
    oscillation at scale eta stays resolved; the grid is aligned to profile
    breakpoints.  With ``richardson=True`` the flow is recomputed at half
    the step and the endpoint difference (scaled by 1/15) is reported.
    """
    ts, lam_arr = _node_grid(profile, cfg, lam, c_step, max_steps)
    scalar = np.asarray(lam).ndim == 0
    half = np.empty(2 * ts.size - 1)
    half[0::2] = ts
    half[1::2] = 0.5 * (ts[:-1] + ts[1:])
    ent = _b_entries(profile, cfg, half, lam_arr, sin_theta)
    b_nodes = _assemble_b(ent, (half.size, lam_arr.size))
    phi_end, stored = _rk4_flow(b_nodes, ts, cfg.eta, dense)
    err = None
    if richardson:
        ts2 = np.empty(2 * ts.size - 1)
        ts2[0::2] = ts
        ts2[1::2] = 0.5 * (ts[:-1] + ts[1:])
        half2 = np.empty(2 * ts2.size - 1)
        half2[0::2] = ts2
        half2[1::2] = 0.5 * (ts2[:-1] + ts2[1:])
        ent2 = _b_entries(profile, cfg, half2, lam_arr, sin_theta)
        b2 = _assemble_b(ent2, (half2.size, lam_arr.size))
        phi2, _ = _rk4_flow(b2, ts2, cfg.eta, False)
        err = float(np.max(np.abs(phi_end - phi2))) / 15.0
        phi_end = phi2
        if dense:
            stored[-1] = phi2
    phis = stored if dense else phi_end[None, ...]
    if scalar:
        phis = phis[:, 0]
    prod = np.einsum("...ji,jk,...kl->...il", phis.conj(), D_FLIP, phis)
    drift = float(np.max(np.abs(prod - D_FLIP)))
    return FundamentalSolution(ts=ts if dense else ts[[0, -1]], phis=phis,
                               eta=cfg.eta, lam=lam, flux_drift=drift,
                               step_count=ts.size - 1, error_estimate=err)


@dataclass(frozen=True, eq=False)
class TransmissionResult:
    """Transmission/reflection amplitudes with solver diagnostics."""

    t1: complex
    t2: complex
    r1: complex
    r2: complex
    lam: float
    det_a1_abs: float
    residual: float

    def stokes(self):
        return stokes(self.t1, self.t2)


def _endpoint_system(phi1: np.ndarray):
    """Matrices A1, A2 of the endpoint linear system from Phi(1)."""
    p = phi1
    a1 = np.zeros(p.shape, dtype=complex)
    a2 = np.zeros(p.shape, dtype=complex)
    a1[..., :, 0] = p[..., :, 1] - p[..., :, 0]
    a1[..., :, 1] = p[..., :, 3] - p[..., :, 2]
    a1[..., 0, 2] = a1[..., 1, 2] = -1.0
    a1[..., 2, 3] = a1[..., 3, 3] = -1.0
    a2[..., 0, 0] = -1.0
    a2[..., 1, 0] = 1.0
    a2[..., 2, 1] = -1.0
    a2[..., 3, 1] = 1.0
    a2[..., :, 2] = -(p[..., :, 0] + p[..., :, 1])
    a2[..., :, 3] = -(p[..., :, 2] + p[..., :, 3])
    return a1, a2


def solve_transmission(phi1: np.ndarray, i1: complex = 1.0, i2: complex = 1.0,
                       lam: float = float("nan"), flux_tol: float = FLUX_TOL,
                       det_tol: float = DET_TOL):
    """Solve for (T1, T2, R1, R2) from the endpoint fundamental matrix.

    Refuses input whose flux identity conj(Phi)^T D Phi = D is violated
    beyond ``flux_tol``: the determinant lower bound |det A1| >= 2 that
    protects the solve is only guaranteed on the flux shell.
    """
    phi1 = np.asarray(phi1, dtype=complex)
    flux = np.max(np.abs(np.einsum("...ji,jk,...kl->...il", phi1.conj(), D_FLIP, phi1)
                         - D_FLIP))
    if flux > flux_tol:
        raise BerremanError(f"flux identity violated on input: {flux:.3g} > {flux_tol:g}")
    a1, a2 = _endpoint_system(phi1)
    det = np.abs(np.linalg.det(a1))
    if np.any(det < 2.0 - det_tol):
        raise BerremanError(f"|det A1| = {float(np.min(det)):.9f} below the bound 2")
    rhs_vec = np.zeros(phi1.shape[:-2] + (4,), dtype=complex)
    rhs_vec[..., 2] = i1
    rhs_vec[..., 3] = i2
    rhs = np.einsum("...ij,...j->...i", a2, rhs_vec)
    sol = np.linalg.solve(a1, rhs[..., None])[..., 0]
    resid = np.max(np.abs(np.einsum("...ij,...j->...i", a1, sol) - rhs), axis=-1)
    r1, r2, t1, t2 = (sol[..., k] for k in range(4))
    if sol.ndim == 1:
        return TransmissionResult(t1=complex(t1), t2=complex(t2), r1=complex(r1),
                                  r2=complex(r2), lam=lam, det_a1_abs=float(det),
                                  residual=float(resid))
    return t1, t2, r1, r2, det, resid


def transmission_sweep(profile: DielectricProfile, cfg: ScalingConfig, lam=None,
                       i1: complex = 1.0, i2: complex = 1.0,
                       c_step: int = DEFAULT_C_STEP, sin_theta=None,
                       chunk: int = 32):
    """Vectorized transmission solve over a lambda grid.

    Returns a dict with arrays t1, t2, r1, r2, det_a1_abs, residual and the
    worst endpoint flux defect.  The sweep is processed in lambda chunks to
    bound the stored coefficient array; results are independent of chunking
    and evaluation order.
    """
    lam = cfg.lambda_grid if lam is None else np.atleast_1d(np.asarray(lam, float))
    ts, _ = _node_grid(profile, cfg, lam, c_step, max_steps=4_000_000)
    half = np.empty(2 * ts.size - 1)
    half[0::2] = ts
    half[1::2] = 0.5 * (ts[:-1] + ts[1:])
    comps = _scaled_components(profile, cfg, half)
    parts = {k: [] for k in ("t1", "t2", "r1", "r2", "det_a1_abs", "residual")}
    drift = 0.0
    for start in range(0, lam.size, chunk):
        piece = lam[start:start + chunk]
        if sin_theta is None or np.ndim(sin_theta) == 0:
            st = sin_theta
        else:
            st = np.asarray(sin_theta)[start:start + chunk]
        ent = _entries_from_components(comps, piece, st)
        b_nodes = _assemble_b(ent, (half.size, piece.size))
        phi_end, _ = _rk4_flow(b_nodes, ts, cfg.eta, False)
        t1, t2, r1, r2, det, resid = solve_transmission(phi_end, i1, i2)
        prod = np.einsum("...ji,jk,...kl->...il", phi_end.conj(), D_FLIP, phi_end)
        drift = max(drift, float(np.max(np.abs(prod - D_FLIP))))
        for key, val in zip(("t1", "t2", "r1", "r2", "det_a1_abs", "residual"),
                            (t1, t2, r1, r2, det, resid)):
            parts[key].append(np.atleast_1d(val))
    out = {k: np.concatenate(v) for k, v in parts.items()}
    out["lam"] = lam
    out["flux_drift"] = drift
    return out


def stokes(t1, t2):
    """Polarimeter triple (|T1|^2+|T2|^2, |T1|^2-|T2|^2, 2 T1 conj(T2)).

    Exactly invariant under a common phase of (T1, T2).
    """
    p1 = np.abs(np.asarray(t1)) ** 2
    p2 = np.abs(np.asarray(t2)) ** 2
    return p1 + p2, p1 - p2, 2.0 * np.asarray(t1) * np.conj(t2)


def flux_pairing(z1, z2):
    """Conserved pairing conj(Z1)^T D Z2 of two optical-field vectors."""
    return np.einsum("...i,ij,...j->...", np.conj(z1), D_FLIP, z2)
