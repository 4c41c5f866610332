"""Dielectric profiles on the unit slab and the non-dimensional measurement regime.

Scalar coefficients (tilt angles, diagonal permittivity entries, the
perturbation coefficient q) live on [0, 1] and are represented either by
uniform samples with local polynomial interpolation or by piecewise
polynomials with exact derivatives.  All profile objects are immutable
after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScalarProfile",
    "DielectricProfile",
    "ScalingConfig",
    "nondimensionalize",
    "uniaxial_delta",
    "flip_profile",
    "pattern_flip_family",
    "rearrange_monotone",
    "random_polynomial_profile",
    "load_profile",
    "save_profile",
]

DEFAULT_SAMPLES = 2048
UNIT_BOUND_TOL = 1e-12


class ProfileError(ValueError):
    """Invalid profile construction or evaluation."""


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True, eq=False)
class ScalarProfile:
    """Scalar coefficient on [0, 1].

    Exactly one representation is populated:

    * ``samples``: uniform samples on [0, 1], evaluated with local
      Lagrange interpolation of the given ``order`` (default cubic);
      derivatives come from high-order finite-difference stencils.
    * ``breakpoints``/``coefficients``: piecewise polynomials in the local
      variable ``t - breakpoints[i]``; derivatives up to any order are
      analytic.

    ``unit_bound`` declares the profile as a perturbation coefficient with
    sup |q| <= 1, which is enforced at construction.
    """

    samples: np.ndarray | None = None
    order: int = 3
    breakpoints: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    unit_bound: bool = False

    def __post_init__(self):
        if (self.samples is None) == (self.breakpoints is None):
            raise ProfileError("exactly one of samples / piecewise data required")
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < self.order + 1:
                raise ProfileError("need at least order+1 uniform samples")
            object.__setattr__(self, "samples", s)
            s.flags.writeable = False
        else:
            bp = np.asarray(self.breakpoints, dtype=float)
            cf = np.asarray(self.coefficients, dtype=float)
            if bp.ndim != 1 or bp.size < 2 or cf.ndim != 2 or cf.shape[0] != bp.size - 1:
                raise ProfileError("breakpoints/coefficients shapes inconsistent")
            if abs(bp[0]) > 1e-14 or abs(bp[-1] - 1.0) > 1e-14 or np.any(np.diff(bp) <= 0):
                raise ProfileError("breakpoints must increase from 0 to 1")
            object.__setattr__(self, "breakpoints", bp)
            object.__setattr__(self, "coefficients", cf)
            bp.flags.writeable = False
            cf.flags.writeable = False
        if self.unit_bound:
            sup = float(np.max(np.abs(self.grid(DEFAULT_SAMPLES))))
            if sup > 1.0 + UNIT_BOUND_TOL:
                raise ProfileError(f"declared unit-bound profile has sup {sup:.6g} > 1")

    # -- constructors -------------------------------------------------

    @classmethod
    def from_samples(cls, values, order: int = 3, unit_bound: bool = False) -> "ScalarProfile":
        return cls(samples=np.asarray(values, dtype=float), order=order, unit_bound=unit_bound)

    @classmethod
    def from_piecewise(cls, breakpoints, coefficients, unit_bound: bool = False) -> "ScalarProfile":
        return cls(breakpoints=np.asarray(breakpoints, float),
                   coefficients=np.asarray(coefficients, float), unit_bound=unit_bound)

    @classmethod
    def constant(cls, value: float, unit_bound: bool = False) -> "ScalarProfile":
        return cls.from_piecewise([0.0, 1.0], [[float(value)]], unit_bound=unit_bound)

    @classmethod
    def from_polynomial(cls, coeffs, unit_bound: bool = False) -> "ScalarProfile":
        """Single global polynomial, coefficients in increasing powers of t."""
        return cls.from_piecewise([0.0, 1.0], [list(map(float, coeffs))], unit_bound=unit_bound)

    @classmethod
    def linear(cls, a: float, b: float, unit_bound: bool = False) -> "ScalarProfile":
        """Affine profile t -> a + b t."""
        return cls.from_polynomial([a, b], unit_bound=unit_bound)

    @classmethod
    def from_callable(cls, fn, segments: int = 32, degree: int = 12,
                      unit_bound: bool = False) -> "ScalarProfile":
        """Fit a smooth callable by piecewise Chebyshev polynomials.

        The fit is accurate enough that analytic derivatives of the pieces
        track the first four derivatives of a smooth ``fn``.
        """
        bp = np.linspace(0.0, 1.0, segments + 1)
        coeffs = np.zeros((segments, degree + 1))
        k = np.arange(degree + 1)
        ch_nodes = 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / (degree + 1)))
        for i in range(segments):
            a, b = bp[i], bp[i + 1]
            xi = (b - a) * ch_nodes
            vals = np.asarray([fn(a + x) for x in xi], dtype=float)
            # Chebyshev fit on the segment, converted to the local power basis.
            c_ch = np.polynomial.chebyshev.chebfit(2.0 * ch_nodes - 1.0, vals, degree)
            c_pow = np.polynomial.chebyshev.cheb2poly(c_ch)
            scale = 2.0 / (b - a)
            # p(xi) in powers of xi from powers of (scale*xi - 1)
            c_loc = np.zeros(degree + 1)
            for m, cm in enumerate(c_pow):
                shifted = np.zeros(degree + 1)
                binom = 1.0
                for j in range(m + 1):
                    shifted[j] += cm * binom * scale**j * (-1.0) ** (m - j)
                    binom = binom * (m - j) / (j + 1)
                c_loc += shifted
            coeffs[i] = c_loc
        return cls.from_piecewise(bp, coeffs, unit_bound=unit_bound)

    # -- evaluation ---------------------------------------------------

    @property
    def is_piecewise(self) -> bool:
        return self.breakpoints is not None

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t, derivative: int = 0):
        """Evaluate the profile (or a derivative) at t in [0, 1]."""
        arr, scalar = _as_array(t)
        if arr.size and (arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12):
            raise ProfileError("profile evaluated outside [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        if self.is_piecewise:
            out = self._eval_piecewise(arr, derivative)
        else:
            out = self._eval_samples(arr, derivative)
        return float(out[()]) if scalar else out

    def _eval_piecewise(self, t, k):
        bp, cf = self.breakpoints, self.coefficients
        idx = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, cf.shape[0] - 1)
        xi = t - bp[idx]
        deg = cf.shape[1] - 1
        if k > deg:
            return np.zeros_like(t)
        out = np.zeros_like(t)
        # Horner on the k-th derivative of each local polynomial.
        for p in range(deg, k - 1, -1):
            fac = math.factorial(p) / math.factorial(p - k)
            out = out * xi + fac * cf[idx, p]
        return out

    def _eval_samples(self, t, k):
        s = self.samples
        n = s.size
        h = 1.0 / (n - 1)
        if k == 0:
            order = self.order
            if order == 1:
                return np.interp(t, np.linspace(0, 1, n), s)
            m = order + 1
            j0 = np.clip(np.floor(t / h).astype(int) - (m // 2 - 1), 0, n - m)
            out = np.zeros_like(t)
            # local Lagrange interpolation on m consecutive nodes
            for a in range(m):
                la = np.ones_like(t)
                xa = (j0 + a) * h
                for b in range(m):
                    if b == a:
                        continue
                    xb = (j0 + b) * h
                    la *= (t - xb) / (xa - xb)
                out += la * s[j0 + a]
            return out
        dvals = self._derivative_samples(k)
        return ScalarProfile.from_samples(dvals, order=min(self.order, 3))._eval_samples(t, 0)

    def _derivative_samples(self, k: int) -> np.ndarray:
        """k-th derivative at the sample nodes via 8th-order FD stencils."""
        s = self.samples
        h = 1.0 / (s.size - 1)
        out = s.copy()
        for _ in range(k):
            d = np.gradient(out, h, edge_order=2)
            # sharpen interior with 4th-order central differences
            if out.size >= 5:
                d[2:-2] = (out[:-4] - 8 * out[1:-3] + 8 * out[3:-1] - out[4:]) / (12 * h)
            out = d
        return out

    def grid(self, n: int = DEFAULT_SAMPLES) -> np.ndarray:
        return self.eval(np.linspace(0.0, 1.0, n))

    def sup_norm(self, n: int = DEFAULT_SAMPLES) -> float:
        return float(np.max(np.abs(self.grid(n))))

    def breakpoint_list(self) -> np.ndarray:
        """Interior discontinuity candidates, for integration-grid alignment."""
        if self.is_piecewise:
            return self.breakpoints.copy()
        return np.array([0.0, 1.0])

    # -- transforms ---------------------------------------------------

    def flip(self) -> "ScalarProfile":
        """The reflected profile t -> p(1 - t)."""
        if not self.is_piecewise:
            return ScalarProfile.from_samples(self.samples[::-1].copy(), order=self.order,
                                              unit_bound=self.unit_bound)
        bp, cf = self.breakpoints, self.coefficients
        nbp = (1.0 - bp)[::-1].copy()
        nbp[0], nbp[-1] = 0.0, 1.0
        deg = cf.shape[1] - 1
        ncf = np.zeros_like(cf)
        for i in range(cf.shape[0]):
            w = bp[i + 1] - bp[i]
            # p_i(w - xi) expanded in powers of xi
            for p in range(deg + 1):
                c = cf[i, p]
                if c == 0.0:
                    continue
                binom = 1.0
                for j in range(p + 1):
                    ncf[cf.shape[0] - 1 - i, j] += c * binom * w ** (p - j) * (-1.0) ** j
                    binom = binom * (p - j) / (j + 1)
        return ScalarProfile.from_piecewise(nbp, ncf, unit_bound=self.unit_bound)

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        if self.is_piecewise:
            return {
                "kind": "scalar",
                "representation": "piecewise",
                "breakpoints": [float(b) for b in self.breakpoints],
                "coefficients": [[float(c) for c in row] for row in self.coefficients],
                "unit_bound": self.unit_bound,
            }
        return {
            "kind": "scalar",
            "representation": "samples",
            "order": self.order,
            "samples": [float(v) for v in self.samples],
            "unit_bound": self.unit_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalarProfile":
        if d.get("representation") == "piecewise":
            return cls.from_piecewise(d["breakpoints"], d["coefficients"],
                                      unit_bound=bool(d.get("unit_bound", False)))
        return cls.from_samples(d["samples"], order=int(d.get("order", 3)),
                                unit_bound=bool(d.get("unit_bound", False)))


def flip_profile(p: ScalarProfile) -> ScalarProfile:
    """Reflection t -> p(1 - t); an involution, and a fixed point on constants."""
    return p.flip()


def rearrange_monotone(q: ScalarProfile, n: int = DEFAULT_SAMPLES + 1) -> ScalarProfile:
    """Non-decreasing rearrangement of q.

    The empirical distribution of sampled values is preserved exactly: the
    output samples are the sorted input samples on the same uniform grid.
    """
    if not q.is_piecewise and q.samples.size >= 4:
        n = q.samples.size
    vals = np.sort(q.grid(n))
    return ScalarProfile.from_samples(vals, order=1, unit_bound=q.unit_bound)


def pattern_flip_family(base: ScalarProfile, slots: int, signs) -> ScalarProfile:
    """Tilt profile made of sign-flipped copies of a compactly supported pattern.

    ``base`` must be supported inside [0, 1/slots]; copy k is the translate
    of the pattern to slot k, multiplied by signs[k].  The absolute-value
    profile (hence cos of twice the tilt) is independent of the signs.
    """
    signs = np.asarray(signs, dtype=float)
    if signs.size != slots or not np.all(np.abs(signs) == 1.0):
        raise ProfileError("signs must be a sequence of +-1, one per slot")
    width = 1.0 / slots
    probe = np.linspace(0.0, 1.0, 4 * DEFAULT_SAMPLES)
    vals = base.eval(probe)
    support = probe[np.abs(vals) > 0.0]
    if support.size and support.max() > width + 1e-12:
        raise ProfileError("base support wider than one slot; copies would overlap")
    tgrid = np.linspace(0.0, 1.0, DEFAULT_SAMPLES + 1)
    out = np.zeros_like(tgrid)
    for k in range(slots):
        lo = k * width
        mask = (tgrid >= lo) & (tgrid - lo <= width)
        out[mask] += signs[k] * base.eval(tgrid[mask] - lo)
    return ScalarProfile.from_samples(out, order=3)


def random_polynomial_profile(rng: np.random.Generator, degree: int = 4,
                              sup_bound: float = 0.9, unit_bound: bool = False) -> ScalarProfile:
    """Random smooth polynomial profile with sup norm scaled to ``sup_bound``."""
    coeffs = rng.standard_normal(degree + 1)
    p = ScalarProfile.from_polynomial(coeffs)
    sup = p.sup_norm()
    if sup == 0.0:
        return ScalarProfile.constant(0.0, unit_bound=unit_bound)
    return ScalarProfile.from_polynomial(coeffs * (sup_bound / sup), unit_bound=unit_bound)


# -- dielectric tensors ----------------------------------------------


@dataclass(frozen=True, eq=False)
class DielectricProfile:
    """Relative dielectric tensor of the cell as a function of depth t.

    Kinds: ``orthorhombic`` (three diagonal profiles), ``uniaxial``
    (director given by tilt/azimuth profiles and the two constant
    eigenvalues), ``general`` (six independent symmetric entries).
    """

    kind: str
    diag: tuple = None
    tilt: ScalarProfile = None
    azimuth: ScalarProfile = None
    eps_perp: float = None
    eps_par: float = None
    entries: tuple = None

    MIN_DIAG = 1e-9

    @classmethod
    def orthorhombic(cls, e11: ScalarProfile, e22: ScalarProfile, e33: ScalarProfile):
        prof = cls(kind="orthorhombic", diag=(e11, e22, e33))
        prof._validate()
        return prof

    @classmethod
    def uniaxial(cls, tilt: ScalarProfile, eps_perp: float, eps_par: float,
                 azimuth: ScalarProfile | float = 0.0):
        if not isinstance(azimuth, ScalarProfile):
            azimuth = ScalarProfile.constant(float(azimuth))
        prof = cls(kind="uniaxial", tilt=tilt, azimuth=azimuth,
                   eps_perp=float(eps_perp), eps_par=float(eps_par))
        prof._validate()
        return prof

    @classmethod
    def general(cls, e11, e22, e33, e12, e13, e23):
        prof = cls(kind="general", entries=(e11, e22, e33, e12, e13, e23))
        prof._validate()
        return prof

    def _validate(self):
        probe = np.linspace(0.0, 1.0, 513)
        if self.kind == "uniaxial":
            if self.eps_perp <= 0 or self.eps_par <= 0:
                raise ProfileError("uniaxial eigenvalues must be positive")
            psi = self.tilt.eval(probe)
            if np.any(psi <= -np.pi / 2 - 1e-12) or np.any(psi > np.pi / 2 + 1e-12):
                raise ProfileError("tilt must lie in (-pi/2, pi/2]")
            phi = self.azimuth.eval(probe)
            if np.any(phi < -1e-12) or np.any(phi >= np.pi + 1e-12):
                raise ProfileError("azimuth must lie in [0, pi)")
            return
        comps = self.components(probe)
        for i in range(3):
            if np.any(comps[i] < self.MIN_DIAG):
                raise ProfileError("diagonal permittivity entries must stay positive")

    @property
    def n0_natural(self) -> float:
        """Matched surrounding index for uniaxial cells: n0^2 = sqrt(e_perp e_par)."""
        if self.kind != "uniaxial":
            raise ProfileError("natural index defined for uniaxial cells only")
        return (self.eps_perp * self.eps_par) ** 0.25

    def components(self, t):
        """Arrays (e11, e22, e33, e12, e13, e23) at positions t."""
        t = np.asarray(t, dtype=float)
        z = np.zeros_like(t)
        if self.kind == "orthorhombic":
            e11, e22, e33 = (p.eval(t) for p in self.diag)
            return e11, e22, e33, z, z, z
        if self.kind == "general":
            return tuple(p.eval(t) for p in self.entries)
        psi = self.tilt.eval(t)
        phi = self.azimuth.eval(t)
        de = self.eps_par - self.eps_perp
        n1 = np.cos(psi) * np.cos(phi)
        n2 = np.cos(psi) * np.sin(phi)
        n3 = np.sin(psi)
        e11 = self.eps_perp + de * n1 * n1
        e22 = self.eps_perp + de * n2 * n2
        e33 = self.eps_perp + de * n3 * n3
        return e11, e22, e33, de * n1 * n2, de * n1 * n3, de * n2 * n3

    def tensor(self, t):
        """Symmetric 3x3 tensor (or stack thereof) at positions t."""
        t_arr, scalar = _as_array(t)
        e11, e22, e33, e12, e13, e23 = self.components(t_arr)
        out = np.zeros(t_arr.shape + (3, 3))
        out[..., 0, 0], out[..., 1, 1], out[..., 2, 2] = e11, e22, e33
        out[..., 0, 1] = out[..., 1, 0] = e12
        out[..., 0, 2] = out[..., 2, 0] = e13
        out[..., 1, 2] = out[..., 2, 1] = e23
        return out

    def breakpoint_list(self) -> np.ndarray:
        pts = [np.array([0.0, 1.0])]
        profs = []
        if self.kind == "orthorhombic":
            profs = list(self.diag)
        elif self.kind == "general":
            profs = list(self.entries)
        else:
            profs = [self.tilt, self.azimuth]
        for p in profs:
            pts.append(p.breakpoint_list())
        return np.unique(np.concatenate(pts))

    def to_dict(self) -> dict:
        if self.kind == "orthorhombic":
            return {"kind": "orthorhombic",
                    "eps11": self.diag[0].to_dict(),
                    "eps22": self.diag[1].to_dict(),
                    "eps33": self.diag[2].to_dict()}
        if self.kind == "uniaxial":
            return {"kind": "uniaxial", "tilt": self.tilt.to_dict(),
                    "azimuth": self.azimuth.to_dict(),
                    "eps_perp": self.eps_perp, "eps_par": self.eps_par}
        names = ("e11", "e22", "e33", "e12", "e13", "e23")
        return {"kind": "general", **{n: p.to_dict() for n, p in zip(names, self.entries)}}

    @classmethod
    def from_dict(cls, d: dict) -> "DielectricProfile":
        kind = d["kind"]
        if kind == "orthorhombic":
            return cls.orthorhombic(*(ScalarProfile.from_dict(d[k]) for k in ("eps11", "eps22", "eps33")))
        if kind == "uniaxial":
            return cls.uniaxial(ScalarProfile.from_dict(d["tilt"]), d["eps_perp"], d["eps_par"],
                                azimuth=ScalarProfile.from_dict(d["azimuth"]))
        names = ("e11", "e22", "e33", "e12", "e13", "e23")
        return cls.general(*(ScalarProfile.from_dict(d[k]) for k in names))


# -- scaling configuration -------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalingConfig:
    """Non-dimensional measurement regime.

    eta is the reduced wavelength over slab optical thickness, alpha the
    perturbation exponent, tau the margin keeping the smallest admissible
    lambda = cos(theta) away from the evanescent regime.  The noise scale
    grows with slant as eta^(5+alpha) / lambda^5.
    """

    eta: float
    alpha: float
    tau: float
    n0: float
    lambda_grid: np.ndarray
    rng_seed: int = 0

    DENSE_EXPONENT = 1.8

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ProfileError("eta must lie in (0, 1)")
        if self.tau <= 1.0:
            raise ProfileError("tau must exceed 1")
        grid = np.asarray(self.lambda_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ProfileError("lambda grid must be strictly increasing")
        lo = self.lambda_min
        if grid[0] < lo - 1e-12 or grid[-1] > 1.0 + 1e-12:
            raise ProfileError("lambda grid outside the admissible interval")
        object.__setattr__(self, "lambda_grid", grid)
        grid.flags.writeable = False

    @property
    def lambda_min(self) -> float:
        return math.sqrt(self.tau * self.eta ** self.alpha)

    @property
    def is_dense(self) -> bool:
        return float(np.max(np.diff(self.lambda_grid))) <= self.eta ** self.DENSE_EXPONENT

    def sigma(self, lam):
        """Measurement noise scale at incidence cos(theta) = lam."""
        lam = np.asarray(lam, dtype=float)
        return self.eta ** (5.0 + self.alpha) / lam ** 5


def nondimensionalize(wavelength: float, thickness: float, n0: float,
                      angle_range: float, samples: int, alpha: float = 1.0,
                      rng_seed: int = 0) -> ScalingConfig:
    """Build the non-dimensional regime from bench quantities.

    Parameters
    ----------
    wavelength, thickness : float
        Vacuum wavelength and slab thickness, any common length unit.
    n0 : float
        Index of the surrounding isotropic medium.
    angle_range : float
        Largest incidence angle, degrees (< 90).
    samples : int
        Number of points of the uniform lambda grid.
    """
    if wavelength <= 0 or thickness <= 0 or n0 <= 0:
        raise ProfileError("physical inputs must be positive")
    if not (0.0 < angle_range < 90.0):
        raise ProfileError("angle range must lie in (0, 90) degrees")
    eta = wavelength / (n0 * thickness)
    lam_min2 = math.cos(math.radians(angle_range)) ** 2
    tau = lam_min2 / eta ** alpha
    if tau * eta ** alpha >= 1.0:
        raise ProfileError("empty admissible lambda interval")
    if tau <= 1.0:
        raise ProfileError("angle range too wide: tau <= 1 enters the evanescent regime")
    grid = np.linspace(math.sqrt(lam_min2), 1.0, int(samples))
    return ScalingConfig(eta=eta, alpha=alpha, tau=tau, n0=n0,
                         lambda_grid=grid, rng_seed=rng_seed)


def uniaxial_delta(eps_perp: float, eps_par: float):
    """Anisotropy contrast delta and matched index n0 of a uniaxial cell.

    Returns (delta, n0) with delta = (e_perp - e_par)/(e_perp + e_par) and
    n0^2 = sqrt(e_perp * e_par); |delta| < 1 always.
    """
    if eps_perp <= 0 or eps_par <= 0:
        raise ProfileError("permittivities must be positive")
    delta = (eps_perp - eps_par) / (eps_perp + eps_par)
    n0 = (eps_perp * eps_par) ** 0.25
    return delta, n0


# -- file format ------------------------------------------------------


def save_profile(path, profile) -> None:
    """Write a profile to structured text (JSON); floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile.to_dict(), fh, indent=1)
        fh.write("\n")


def load_profile(path):
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("kind") == "scalar":
        return ScalarProfile.from_dict(d)
    return DielectricProfile.from_dict(d)
