"""Conserved functionals I(u) = integral of k(u) and their parameter gradients.

Three kinds cover the benchmarks: `mass` (linear, k(u) = u), `quadratic`
(k(u) = u^2) and `hamiltonian` (two-component k(rho, v) = (rho^2 + v^2) / 2).
Vector fields use pointwise k over the component tuple, so every invariant
integrates a single scalar integrand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import param_jacobian
from .network import NetworkSpec
from .quadrature import QuadratureGrid


@dataclass(frozen=True)
class InvariantSpec:
    """A conserved functional, identified by name in reports and CSV columns."""

    kind: str  # mass | quadratic | hamiltonian
    name: str

    def __post_init__(self):
        if self.kind not in ("mass", "quadratic", "hamiltonian"):
            raise ValueError(f"unknown invariant kind {self.kind!r}")

    @property
    def degree(self) -> int:
        return 1 if self.kind == "mass" else 2

    def k(self, field: np.ndarray) -> np.ndarray:
        """Pointwise integrand; field has shape (components, n)."""
        field = np.atleast_2d(field)
        if self.kind == "mass":
            return field[0]
        if self.kind == "quadratic":
            return field[0] ** 2
        return 0.5 * np.einsum("cj,cj->j", field, field)

    def k_prime(self, field: np.ndarray) -> np.ndarray:
        """Pointwise derivative of k per component; shape (components, n)."""
        field = np.atleast_2d(field)
        if self.kind == "mass":
            return np.ones_like(field)
        if self.kind == "quadratic":
            return 2.0 * field
        return field.copy()


MASS = InvariantSpec(kind="mass", name="mass")
ENERGY = InvariantSpec(kind="quadratic", name="energy")
HAMILTONIAN = InvariantSpec(kind="hamiltonian", name="hamiltonian")


def eval_invariant(inv: InvariantSpec, grid: QuadratureGrid, field: np.ndarray) -> float:
    """I(u) = sum_i w_i k(u(x_i))."""
    field = np.atleast_2d(np.asarray(field, dtype=float))
    if field.shape[-1] != grid.n:
        raise ValueError(f"field has {field.shape[-1]} points, grid has {grid.n}")
    return float(np.dot(grid.weights, inv.k(field)))


def invariant_theta_gradient(
    inv: InvariantSpec,
    spec: NetworkSpec,
    theta: np.ndarray,
    grid: QuadratureGrid,
    jac: np.ndarray | None = None,
    field: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of I(u(theta, .)) with respect to theta.

    Equals sum_i w_i k'(u(x_i)) . grad_theta u(x_i), summed over components.
    A precomputed (values, jacobian) pair may be passed to avoid recomputing
    the network sweep.
    """
    if jac is None or field is None:
        field, jac = param_jacobian(spec, theta, grid.points)
    kp = inv.k_prime(field)  # (c, n)
    cdim = kp.shape[0]
    # row p*cdim + c of jac corresponds to weight w_p * kp[c, p]
    coeff = (grid.weights[None, :] * kp).T.reshape(-1)  # point-major
    return coeff @ jac


def tangent_conservation_defect(
    inv: InvariantSpec,
    spec: NetworkSpec,
    theta: np.ndarray,
    theta_dot: np.ndarray,
    grid: QuadratureGrid,
) -> float:
    """Instantaneous drift dI/dt = grad_theta I . theta_dot along a parameter velocity."""
    g = invariant_theta_gradient(inv, spec, theta, grid)
    theta_dot = np.asarray(theta_dot, dtype=float)
    if theta_dot.shape != g.shape:
        raise ValueError(f"theta_dot shape {theta_dot.shape} does not match {g.shape}")
    return float(g @ theta_dot)
