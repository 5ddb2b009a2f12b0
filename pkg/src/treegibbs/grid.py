"""Composite Gauss-Legendre quadrature on [0,1] and grid-sampled functions.

Gauss nodes are interior points, but the normalizing functional of the
fixed-point operators evaluates functions at t=0, so a ``GridFunction``
carries that value explicitly instead of recovering it by interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .serialize import fmt_float

WEIGHT_SUM_TOL = 1e-14


def _frozen_array(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Composite Gauss-Legendre rule on [0,1]: ``points_per_panel`` nodes on
    each of ``panels`` equal subintervals.  Weights sum to 1."""

    nodes: np.ndarray
    weights: np.ndarray
    points_per_panel: int
    panels: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen_array(self.nodes))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        n, w = self.nodes, self.weights
        if n.ndim != 1 or n.shape != w.shape or n.size == 0:
            raise ValueError("nodes and weights must be 1-d arrays of equal nonzero length")
        if n[0] <= 0.0 or n[-1] >= 1.0 or np.any(np.diff(n) <= 0.0):
            raise ValueError("nodes must be strictly increasing and lie inside (0,1)")
        if np.any(w <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("quadrature weights must sum to 1")

    @property
    def n(self) -> int:
        return self.nodes.size

    def compatible(self, other: "Grid") -> bool:
        return self is other or (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )


def make_grid(points_per_panel: int = 12, panels: int = 8) -> Grid:
    """Build the composite Gauss-Legendre rule (default 12 x 8 = 96 nodes).

    An n-point panel integrates polynomials of degree <= 2n-1 exactly, so
    the default rule is spectrally accurate for the smooth kernels handled
    here while staying cheap to refine for convergence studies.
    """
    if points_per_panel < 1 or panels < 1:
        raise ValueError("points_per_panel and panels must both be >= 1")
    x, w = np.polynomial.legendre.leggauss(points_per_panel)
    edges = np.linspace(0.0, 1.0, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(half * (x + 1.0) + a)
        weights.append(half * w)
    return Grid(np.concatenate(nodes), np.concatenate(weights), points_per_panel, panels)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the grid nodes plus its value at t=0."""

    grid: Grid
    values: np.ndarray
    value_at_zero: float

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "value_at_zero", float(self.value_at_zero))
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("values length must match the grid node count")

    @property
    def all_samples(self) -> np.ndarray:
        """Stored samples including the t=0 value (first entry)."""
        return np.concatenate(([self.value_at_zero], self.values))


def sample_function(grid: Grid, fn) -> GridFunction:
    """Sample a callable at the grid nodes and at t=0."""
    return GridFunction(grid, fn(grid.nodes), float(fn(0.0)))


def integrate(grid: Grid, values) -> float:
    """Quadrature approximation of the integral over [0,1]."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.weights.shape:
        raise ValueError("values length must match the grid node count")
    return float(grid.weights @ values)


def sup_norm(f: GridFunction) -> float:
    """Max of |f| over all stored samples (nodes and t=0)."""
    return float(np.max(np.abs(f.all_samples)))


def interp_knots(f: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """Knots of the piecewise-linear interpolant: (0, f(0)), the nodes, and
    a constant-extrapolated right endpoint at t=1."""
    xs = np.concatenate(([0.0], f.grid.nodes, [1.0]))
    ys = np.concatenate(([f.value_at_zero], f.values, [f.values[-1]]))
    return xs, ys


def interpolate(f: GridFunction, t):
    """Piecewise-linear interpolation of f at t in [0,1] (scalar or array)."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0) or np.any(tt > 1.0):
        raise ValueError("interpolation point outside [0,1]")
    xs, ys = interp_knots(f)
    out = np.interp(tt, xs, ys)
    return float(out) if tt.ndim == 0 else out


def shift_gap(f: GridFunction, a: float) -> float:
    """Sup-norm distance between a sign-changing f and the constant a.

    For any f that takes both signs, sup|f - a| >= sup|f| / 2 no matter how
    a is chosen; callers use this gap to rule out collapse of a difference
    of two fixed points onto a constant.
    """
    samples = f.all_samples
    if not (samples.min() < 0.0 < samples.max()):
        raise ValueError("shift_gap requires a sign-changing function")
    return float(np.max(np.abs(samples - float(a))))


def gridfunction_csv(f: GridFunction, names: tuple[str, str] = ("t", "f")) -> str:
    """CSV serialization: header, then (t, f(t)) rows starting with t=0."""
    lines = [",".join(names), f"0,{fmt_float(f.value_at_zero)}"]
    for t, v in zip(f.grid.nodes, f.values):
        lines.append(f"{fmt_float(t)},{fmt_float(v)}")
    return "\n".join(lines) + "\n"
