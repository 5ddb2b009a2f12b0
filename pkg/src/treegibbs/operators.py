"""Nystrom-discretized integral operators for a positive kernel.

On a quadrature grid the linear transfer operator (Wf)(t) = int K(t,u)f(u)du
becomes a matrix-vector product; the t=0 row is kept separately because the
normalizer omega(f) = (Wf)(0) must never be interpolated.  From W we build
the normalized transfer Bf = Wf/omega(f), the order-k fixed-point map
f -> (Bf)^k, and the Hammerstein operator f -> W(f^k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction
from .kernel import KernelSpec


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """Kernel values at node pairs plus the row K(0, u_j)."""

    matrix: np.ndarray
    row_at_zero: np.ndarray
    grid: Grid
    spec: KernelSpec

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        r = np.array(self.row_at_zero, dtype=float)
        n = self.grid.n
        if m.shape != (n, n) or r.shape != (n,):
            raise ValueError("matrix/row shapes must match the grid node count")
        if np.any(m <= 0.0) or np.any(r <= 0.0):
            raise ValueError("discretized kernel entries must be strictly positive")
        m.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "row_at_zero", r)


def discretize(spec: KernelSpec, grid: Grid) -> DiscretizedKernel:
    """Evaluate the kernel at all node pairs (t_i, u_j) and along t=0."""
    nodes = grid.nodes
    matrix = spec.evaluate(nodes[:, None], nodes[None, :])
    row_at_zero = spec.evaluate(0.0, nodes)
    return DiscretizedKernel(matrix, row_at_zero, grid, spec)


def _check_grid(dk: DiscretizedKernel, f: GridFunction):
    if not dk.grid.compatible(f.grid):
        raise ValueError("grid mismatch between discretized kernel and function")


def _check_admissible(f: GridFunction):
    samples = f.all_samples
    if np.any(samples < 0.0):
        raise ValueError("function must be nonnegative")
    if not np.any(samples > 0.0):
        raise ValueError("function must not be identically zero")


def apply_transfer(dk: DiscretizedKernel, f: GridFunction) -> GridFunction:
    """Linear transfer: (Wf)(t_i) = sum_j w_j K(t_i,u_j) f(u_j), plus (Wf)(0)."""
    _check_grid(dk, f)
    weighted = dk.grid.weights * f.values
    return GridFunction(dk.grid, dk.matrix @ weighted, float(dk.row_at_zero @ weighted))


def omega(dk: DiscretizedKernel, f: GridFunction) -> float:
    """Normalizing functional omega(f) = (Wf)(0); positive for admissible f."""
    _check_grid(dk, f)
    _check_admissible(f)
    value = float(dk.row_at_zero @ (dk.grid.weights * f.values))
    if value <= 0.0:
        raise ValueError("normalizer is not positive; input function is inadmissible")
    return value


def apply_normalized_transfer(dk: DiscretizedKernel, f: GridFunction) -> GridFunction:
    """Normalized transfer Bf = Wf / omega(f); (Bf)(0) = 1 exactly."""
    _check_grid(dk, f)
    _check_admissible(f)
    w = apply_transfer(dk, f)
    om = w.value_at_zero
    if om <= 0.0:
        raise ValueError("normalizer is not positive; input function is inadmissible")
    return GridFunction(dk.grid, w.values / om, 1.0)


def apply_fixed_point_map(dk: DiscretizedKernel, f: GridFunction, k: int) -> GridFunction:
    """Order-k fixed-point map f -> (Bf)^k.

    The map is homogeneous of degree zero (scaling f changes nothing) and
    pins the output to 1 at t=0, so its fixed points are exactly the
    normalized consistent boundary laws of order k.
    """
    k = int(k)
    if k < 1:
        raise ValueError("order k must be >= 1")
    b = apply_normalized_transfer(dk, f)
    return GridFunction(dk.grid, b.values**k, 1.0)


def apply_hammerstein(dk: DiscretizedKernel, f: GridFunction, k: int) -> GridFunction:
    """Hammerstein operator of order k: t -> int K(t,u) f(u)^k du."""
    k = int(k)
    if k < 1:
        raise ValueError("order k must be >= 1")
    _check_grid(dk, f)
    if np.any(f.all_samples < 0.0):
        raise ValueError("function must be nonnegative")
    powered = GridFunction(dk.grid, f.values**k, f.value_at_zero**k)
    return apply_transfer(dk, powered)


def extend_fixed_point(dk: DiscretizedKernel, f: GridFunction, k: int, ts) -> np.ndarray:
    """Natural continuous extension of an order-k fixed point.

    Evaluates ((W f)(t)/omega(f))^k at arbitrary t using the solved node
    values; exact at the nodes up to the solve residual, and as accurate
    between them as the quadrature itself (unlike linear interpolation).
    """
    k = int(k)
    if k < 1:
        raise ValueError("order k must be >= 1")
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise ValueError("evaluation points must lie in [0,1]")
    weighted = dk.grid.weights * f.values
    om = float(dk.row_at_zero @ weighted)
    if om <= 0.0:
        raise ValueError("normalizer is not positive; input function is inadmissible")
    wt = dk.spec.evaluate(ts[:, None], dk.grid.nodes[None, :]) @ weighted
    return (wt / om) ** k
