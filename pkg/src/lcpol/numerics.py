"""Shared quadrature and interpolation plumbing used across the solvers."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "gauss_nodes",
    "panel_quadrature",
    "simpson",
    "cumulative_simpson",
    "segment_step_grid",
    "MonotoneInterpolant",
]


@lru_cache(maxsize=32)
def gauss_nodes(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_quadrature(edges: np.ndarray, nodes_per_panel: int = 16):
    """Composite Gauss-Legendre nodes and weights over the given panel edges."""
    x, w = gauss_nodes(nodes_per_panel)
    widths = np.diff(edges)
    pts = edges[:-1, None] + widths[:, None] * x[None, :]
    wts = widths[:, None] * w[None, :]
    return pts.ravel(), wts.ravel()


def refine_edges(breaks: np.ndarray, min_panels: int) -> np.ndarray:
    """Subdivide [0,1] so panel edges include the breakpoints."""
    breaks = np.unique(np.clip(np.asarray(breaks, float), 0.0, 1.0))
    if breaks[0] > 0.0:
        breaks = np.concatenate([[0.0], breaks])
    if breaks[-1] < 1.0:
        breaks = np.concatenate([breaks, [1.0]])
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(np.ceil((b - a) * min_panels)))
        pieces.append(np.linspace(a, b, m + 1)[:-1])
    pieces.append(np.array([1.0]))
    return np.concatenate(pieces)


def simpson(y: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Composite Simpson rule on a uniform grid with an odd number of nodes."""
    y = np.moveaxis(np.asarray(y), axis, 0)
    n = y.shape[0]
    if n % 2 == 0:
        raise ValueError("simpson needs an odd number of nodes")
    total = y[0] + y[-1] + 4.0 * y[1:-1:2].sum(axis=0) + 2.0 * y[2:-2:2].sum(axis=0)
    return total * (h / 3.0)


def cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral at every node of a uniform odd-length grid.

    Even nodes come from composite Simpson; odd nodes add the half-pair
    parabola integral, so the result is 4th-order accurate at every node.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 3 or n % 2 == 0:
        raise ValueError("cumulative_simpson needs an odd number of nodes >= 3")
    out = np.zeros_like(y)
    pair = (h / 3.0) * (y[0:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    out[2::2] = np.cumsum(pair, axis=0)
    out[1::2] = out[0:-1:2] + h * (5.0 * y[0:-1:2] + 8.0 * y[1::2] - y[2::2]) / 12.0
    return out


def segment_step_grid(breaks: np.ndarray, n_total: int) -> np.ndarray:
    """Integration nodes on [0,1]: about n_total steps, aligned to breaks."""
    breaks = np.unique(np.concatenate([[0.0, 1.0], np.asarray(breaks, float)]))
    breaks = breaks[(breaks >= 0.0) & (breaks <= 1.0)]
    nodes = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(np.ceil((b - a) * n_total)))
        nodes.append(np.linspace(a, b, m + 1)[:-1])
    nodes.append(np.array([1.0]))
    return np.concatenate(nodes)


class MonotoneInterpolant:
    """Fritsch-Carlson monotone cubic through strictly increasing data."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        h = np.diff(x)
        d = np.diff(y) / h
        m = np.empty_like(y)
        m[1:-1] = np.where(d[:-1] * d[1:] > 0,
                           2.0 * d[:-1] * d[1:] / (d[:-1] + d[1:] + 1e-300), 0.0)
        m[0] = d[0]
        m[-1] = d[-1]
        self.x, self.y, self.h, self.m = x, y, h, m

    def __call__(self, xq):
        xq = np.asarray(xq, float)
        i = np.clip(np.searchsorted(self.x, xq) - 1, 0, self.x.size - 2)
        t = (xq - self.x[i]) / self.h[i]
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return (h00 * self.y[i] + h01 * self.y[i + 1]
                + self.h[i] * (h10 * self.m[i] + h11 * self.m[i + 1]))
