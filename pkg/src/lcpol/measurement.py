"""Sampled measurement curves and their CSV serialization.

A curve maps the incidence parameter lambda = cos(theta) to a real or
complex data value, together with the per-sample noise scale and enough
metadata to reproduce it.  Files are UTF-8 CSV with '#'-prefixed metadata
lines, a versioned header row, and 17-significant-digit floats so values
round-trip exactly.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["MeasurementCurve", "write_curve", "read_curve", "rng_stream", "atomic_write_text"]

SCHEMA_VERSION = 1


def rng_stream(seed: int, *key) -> np.random.Generator:
    """Independent generator derived from (seed, key) by counter-based splitting.

    Every random draw in the package flows through this helper, so
    parallel or reordered sweeps reproduce bit-identical outputs.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class MeasurementCurve:
    """Data value sampled against lambda, with provenance."""

    lam: np.ndarray
    value: np.ndarray
    sigma: np.ndarray | None = None
    kind: str = "generic"
    exact: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        val = np.asarray(self.value)
        if val.dtype.kind != "c":
            val = val.astype(float)
        sig = np.zeros_like(lam) if self.sigma is None else np.asarray(self.sigma, float)
        if lam.shape != val.shape or lam.shape != sig.shape:
            raise ValueError("lambda/value/sigma shapes differ")
        for name, arr in (("lam", lam), ("value", val), ("sigma", sig)):
            object.__setattr__(self, name, arr)
            arr.flags.writeable = False

    @property
    def is_complex(self) -> bool:
        return self.value.dtype.kind == "c"


def write_curve(path, curve: MeasurementCurve) -> None:
    """Serialize a curve; writes are atomic (temp file + rename)."""
    buf = io.StringIO()
    buf.write(f"# lcpol-curve v{SCHEMA_VERSION}\n")
    buf.write(f"# kind = {curve.kind}\n")
    buf.write(f"# provenance = {'exact' if curve.exact else 'noisy'}\n")
    for key in sorted(curve.meta):
        buf.write(f"# {key} = {curve.meta[key]}\n")
    if curve.is_complex:
        buf.write("lambda,value_re,value_im,sigma\n")
        for lam, v, s in zip(curve.lam, curve.value, curve.sigma):
            buf.write(f"{_fmt(lam)},{_fmt(v.real)},{_fmt(v.imag)},{_fmt(s)}\n")
    else:
        buf.write("lambda,value,sigma\n")
        for lam, v, s in zip(curve.lam, curve.value, curve.sigma):
            buf.write(f"{_fmt(lam)},{_fmt(v)},{_fmt(s)}\n")
    atomic_write_text(path, buf.getvalue())


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_curve(path) -> MeasurementCurve:
    meta = {}
    kind = "generic"
    exact = True
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("lcpol-curve"):
                    version = int(body.split("v")[-1])
                    if version != SCHEMA_VERSION:
                        raise ValueError(f"unknown curve schema version {version}")
                    meta["_versioned"] = True
                elif "=" in body:
                    key, val = (s.strip() for s in body.split("=", 1))
                    if key == "kind":
                        kind = val
                    elif key == "provenance":
                        exact = val == "exact"
                    else:
                        meta[key] = val
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not meta.pop("_versioned", False):
        raise ValueError("missing lcpol-curve version line")
    data = np.asarray(rows, dtype=float)
    if header == ["lambda", "value", "sigma"]:
        return MeasurementCurve(data[:, 0], data[:, 1], data[:, 2], kind=kind,
                                exact=exact, meta=meta)
    if header == ["lambda", "value_re", "value_im", "sigma"]:
        return MeasurementCurve(data[:, 0], data[:, 1] + 1j * data[:, 2], data[:, 3],
                                kind=kind, exact=exact, meta=meta)
    raise ValueError(f"unrecognized curve header {header}")
