"""Uniform periodic quadrature grids.

All spatial integrals in this package are evaluated on equispaced points of a
periodic interval [a, b) with the trapezoid rule, which on a uniform periodic
grid reduces to equal weights (b - a) / n and is spectrally accurate for
smooth periodic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuadratureGrid:
    """Equispaced points x_i = a + i*(b-a)/n, i = 0..n-1, right endpoint excluded."""

    a: float
    b: float
    n: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / self.n


def make_grid(a: float, b: float, n: int) -> QuadratureGrid:
    """Build the uniform periodic grid on [a, b) with n points.

    Raises ValueError if b <= a or n < 2.
    """
    if not b > a:
        raise ValueError(f"invalid domain: need b > a, got [{a}, {b})")
    if n < 2:
        raise ValueError(f"invalid domain: need n >= 2, got n={n}")
    h = (b - a) / n
    points = a + h * np.arange(n, dtype=float)
    weights = np.full(n, h, dtype=float)
    grid = QuadratureGrid(a=float(a), b=float(b), n=int(n), points=points, weights=weights)
    points.setflags(write=False)
    weights.setflags(write=False)
    return grid


def integrate(grid: QuadratureGrid, values: np.ndarray) -> float:
    """Discrete integral sum_i w_i * values_i over the grid points."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ValueError(f"length mismatch: expected {grid.n} values, got shape {values.shape}")
    return float(np.dot(grid.weights, values))


def inner(grid: QuadratureGrid, u: np.ndarray, v: np.ndarray) -> float:
    """Weighted inner product <u, v> = sum_i w_i u_i . v_i.

    Accepts (n,) or (components, n) arrays; components are summed.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if u.shape != v.shape or u.shape[1] != grid.n:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape} on grid of size {grid.n}")
    return float(np.einsum("j,cj,cj->", grid.weights, u, v))
