"""Tangent-space least-squares parameter updates.

One time step fits the parameter increment to a field increment: rows of the
Jacobian are quadrature-weighted parameter gradients of the ansatz at the
sample points, and the right-hand side is the weighted field mismatch.  The
solve uses a truncated pseudoinverse (singular values below rcond * sigma_max
are discarded, minimal-norm solution), which tolerates the rank deficiency
these Jacobians always have.

Two numerically equivalent engines are provided: `svd` factorizes the tall
Jacobian directly, `gram` eigendecomposes J^T J with the truncation rule
mapped to eigenvalues (lambda < rcond^2 * lambda_max).  The gram route is
~3x faster at our sizes and agrees with the svd route far beyond the update
accuracy that matters; tests pin the agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .autodiff import param_jacobian
from .network import NetworkSpec, forward_many
from .quadrature import QuadratureGrid


class NoProgressError(RuntimeError):
    """The first sub-iteration could not reduce the residual even fully damped."""

    def __init__(self, msg, residual=None, attempted=None):
        super().__init__(msg)
        self.residual = residual
        self.attempted = attempted


@dataclass(frozen=True)
class SolverOptions:
    """Controls for the least-squares solve and the sub-iteration loop."""

    rcond: float = 1e-6
    mode: str = "truncated-svd"  # or "sketched" (seeded row sampling, non-archival)
    engine: str = "gram"  # "gram" | "svd"
    seed: int = 0
    tol_abs: float = 1e-10
    tol_rel: float = 1e-8
    max_iters: int = 5
    max_halvings: int = 4
    frozen_jacobian: bool = False


@dataclass(frozen=True)
class LeastSquaresSystem:
    """Weighted system J dtheta ~ r; rows ordered point-major, then component."""

    jac: np.ndarray
    rhs: np.ndarray
    rcond: float = 1e-6
    mode: str = "truncated-svd"
    engine: str = "gram"
    seed: int = 0


@dataclass(frozen=True)
class UpdateReport:
    sub_iterations: int
    final_residual: float
    jacobian_rank: int
    truncated_singular_values: int
    damping_halvings: int = 0


def _row_weights(grid: QuadratureGrid, components: int) -> np.ndarray:
    return np.repeat(np.sqrt(grid.weights), components)


def weighted_residual_norm(grid: QuadratureGrid, delta_u: np.ndarray) -> float:
    """Quadrature-weighted L2 norm of a field mismatch."""
    delta_u = np.atleast_2d(delta_u)
    return float(np.sqrt(np.einsum("j,cj,cj->", grid.weights, delta_u, delta_u)))


def assemble_system(
    net: NetworkSpec,
    theta: np.ndarray,
    grid: QuadratureGrid,
    delta_u: np.ndarray,
    opts: SolverOptions = SolverOptions(),
    jac: np.ndarray | None = None,
) -> LeastSquaresSystem:
    """Build the weighted system for a field increment on the sample grid."""
    delta_u = np.atleast_2d(np.asarray(delta_u, dtype=float))
    if delta_u.shape != (net.output_dim, grid.n):
        raise ValueError(f"delta_u shape {delta_u.shape} != {(net.output_dim, grid.n)}")
    if jac is None:
        _, jac = param_jacobian(net, theta, grid.points)
    sw = _row_weights(grid, net.output_dim)
    return LeastSquaresSystem(
        jac=jac * sw[:, None],
        rhs=delta_u.T.reshape(-1) * sw,
        rcond=opts.rcond,
        mode=opts.mode,
        engine=opts.engine,
        seed=opts.seed,
    )


def solve_ls(sys: LeastSquaresSystem) -> tuple[np.ndarray, int, int]:
    """Minimal-norm truncated-pseudoinverse solution; returns (x, rank, n_truncated)."""
    jac, rhs = sys.jac, sys.rhs
    if sys.mode == "sketched":
        n_rows = jac.shape[0]
        size = min(n_rows, 4 * jac.shape[1])
        if size < n_rows:
            rng = np.random.default_rng(sys.seed)
            idx = np.sort(rng.choice(n_rows, size=size, replace=False))
            jac, rhs = jac[idx], rhs[idx]
    elif sys.mode != "truncated-svd":
        raise ValueError(f"unknown solver mode {sys.mode!r}")

    if sys.engine == "svd":
        u, s, vt = np.linalg.svd(jac, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return np.zeros(jac.shape[1]), 0, s.size
        keep = s > sys.rcond * s[0]
        x = vt[keep].T @ ((u[:, keep].T @ rhs) / s[keep])
        return x, int(keep.sum()), int(s.size - keep.sum())
    if sys.engine == "gram":
        m = jac.T @ jac
        lam, vec = np.linalg.eigh(m)
        lmax = lam[-1] if lam.size else 0.0
        if lmax <= 0.0:
            return np.zeros(jac.shape[1]), 0, lam.size
        keep = lam > (sys.rcond**2) * lmax
        proj = vec[:, keep]
        x = proj @ ((proj.T @ (jac.T @ rhs)) / lam[keep])
        return x, int(keep.sum()), int(lam.size - keep.sum())
    raise ValueError(f"unknown engine {sys.engine!r}")


GradientSource = Sequence[np.ndarray] | Callable[[np.ndarray], Sequence[np.ndarray]]


def _orthonormal_basis(gradients: Sequence[np.ndarray]) -> np.ndarray | None:
    cols = [np.asarray(g, dtype=float) for g in gradients if np.linalg.norm(g) > 1e-30]
    if not cols:
        return None
    q, r = np.linalg.qr(np.stack(cols, axis=1))
    keep = np.abs(np.diag(r)) > 1e-12 * max(np.linalg.norm(c) for c in cols)
    q = q[:, keep]
    return q if q.shape[1] else None


def tangent_update(
    net: NetworkSpec,
    theta_n: np.ndarray,
    grid: QuadratureGrid,
    u_target: np.ndarray,
    opts: SolverOptions = SolverOptions(),
    constraint_gradients: GradientSource | None = None,
) -> tuple[np.ndarray, UpdateReport]:
    """Fit theta so the ansatz matches the target field, by damped Gauss-Newton.

    Each sub-iteration reassembles the Jacobian at the current iterate (unless
    `opts.frozen_jacobian`), solves for the increment, and halves it (up to
    `max_halvings` times) whenever the weighted residual would increase.  The
    loop stops at `tol_abs`, at `tol_rel` times the initial residual, on
    `max_iters`, or when no damped increment improves the residual; if even
    the first sub-iteration cannot improve, NoProgressError is raised.

    With `constraint_gradients` (a list of parameter-space gradients, or a
    callable returning them at the current iterate), every increment is
    confined to the orthogonal complement of their span, so first-order
    invariant drift vanishes: g . dtheta = 0 for every g.
    """
    u_target = np.atleast_2d(np.asarray(u_target, dtype=float))
    theta = np.asarray(theta_n, dtype=float).copy()

    def grads_at(th):
        if constraint_gradients is None:
            return None
        g = constraint_gradients(th) if callable(constraint_gradients) else constraint_gradients
        return _orthonormal_basis(g)

    values, jac = param_jacobian(net, theta, grid.points)
    res = weighted_residual_norm(grid, u_target - values)
    r0 = res
    rank, truncated, halvings_total = 0, 0, 0
    accepted = 0

    if res <= opts.tol_abs:
        return theta, UpdateReport(0, res, rank, truncated)

    for it in range(opts.max_iters):
        sys = assemble_system(net, theta, grid, u_target - values, opts, jac=jac)
        basis = grads_at(theta)
        if basis is not None:
            sys = replace(sys, jac=sys.jac - (sys.jac @ basis) @ basis.T)
        dtheta, rank, truncated = solve_ls(sys)
        if basis is not None:
            dtheta = dtheta - basis @ (basis.T @ dtheta)

        scale, improved = 1.0, False
        for h in range(opts.max_halvings + 1):
            cand = theta + scale * dtheta
            cand_values = forward_many(net, cand, grid.points)
            cand_res = weighted_residual_norm(grid, u_target - cand_values)
            if cand_res < res:
                improved = True
                halvings_total += h
                break
            scale *= 0.5
        if not improved:
            if accepted == 0:
                raise NoProgressError(
                    f"first sub-iteration stalled at residual {res:.3e}",
                    residual=res,
                    attempted=opts.max_halvings + 1,
                )
            break

        theta, res = cand, cand_res
        values = cand_values
        accepted += 1
        if res <= opts.tol_abs or res <= opts.tol_rel * r0:
            break
        if not opts.frozen_jacobian and it < opts.max_iters - 1:
            _, jac = param_jacobian(net, theta, grid.points)

    return theta, UpdateReport(accepted, res, rank, truncated, halvings_total)


def galerkin_rhs(
    net: NetworkSpec,
    theta: np.ndarray,
    grid: QuadratureGrid,
    problem,
    eps_reg: float = 0.0,
    rcond: float = 1e-6,
) -> np.ndarray:
    """Parameter velocity of the tangent-space (Galerkin) baseline.

    Solves (M + eps*I) theta_dot = F with M = J^T J and F = J^T f(u_hat),
    both quadrature weighted, through the same truncated eigendecomposition
    as the least-squares path.
    """
    if eps_reg < 0:
        raise ValueError("eps_reg must be >= 0")
    _, jac = param_jacobian(net, theta, grid.points)
    sw = _row_weights(grid, net.output_dim)
    jw = jac * sw[:, None]
    f = problem.rhs_network(net, theta, grid).T.reshape(-1) * sw
    m = jw.T @ jw
    if eps_reg:
        m = m + eps_reg * np.eye(m.shape[0])
    lam, vec = np.linalg.eigh(m)
    lmax = lam[-1] if lam.size else 0.0
    if lmax <= 0.0:
        return np.zeros(jac.shape[1])
    keep = lam > (rcond**2) * lmax
    proj = vec[:, keep]
    return proj @ ((proj.T @ (jw.T @ f)) / lam[keep])
