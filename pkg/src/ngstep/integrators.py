"""Runge-Kutta tableaux, explicit increments and the relaxation solver.

The relaxation solver rescales one time increment u + gamma*dt*d so a chosen
invariant of the updated field matches its value before the step.  Quadratic
invariants admit a closed form; general smooth invariants fall back to a
scalar Newton iteration with bisection as a safety net.  Linear invariants
are rejected: F(gamma) = gamma*dt*I(d) has no root near 1 unless I(d) = 0,
and every Runge-Kutta method preserves linear invariants anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .invariants import InvariantSpec, eval_invariant
from .quadrature import QuadratureGrid, inner


class RelaxationRangeError(RuntimeError):
    """gamma strayed too far from 1; the step should be shrunk."""


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: np.ndarray  # (s, s)
    b: np.ndarray  # (s,)
    c: np.ndarray  # (s,)
    order: int

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def is_explicit(self) -> bool:
        return bool(np.all(np.triu(self.a) == 0.0))


def _tableau(name, a, b, order):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return ButcherTableau(name=name, a=a, b=b, c=a.sum(axis=1), order=order)


EULER = _tableau("euler", [[0.0]], [1.0], order=1)
RK4 = _tableau(
    "rk4",
    [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1.0, 0]],
    [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    order=4,
)
IMPLICIT_MIDPOINT = _tableau("implicit_midpoint", [[0.5]], [1.0], order=2)

TABLEAUX = {t.name: t for t in (EULER, RK4, IMPLICIT_MIDPOINT)}


def check_quadratic_condition(tab: ButcherTableau, tol: float = 1e-14) -> tuple[bool, float]:
    """Test b_i a_ij + b_j a_ji = b_i b_j for all stage pairs.

    Methods satisfying it preserve quadratic invariants exactly; explicit
    methods never do.  Returns (satisfied, max violation).
    """
    b, a = tab.b, tab.a
    viol = np.abs(b[:, None] * a + (b[:, None] * a).T - np.outer(b, b))
    worst = float(viol.max())
    return worst <= tol, worst


def rk_increment(
    tab: ButcherTableau,
    evaluate_rhs: Callable[[np.ndarray], np.ndarray],
    u_n: np.ndarray,
    dt: float,
    f0: np.ndarray | None = None,
) -> np.ndarray:
    """Increment d = sum_i b_i f(y_i) of one explicit step; caller forms u + gamma*dt*d.

    `f0` optionally supplies f(u_n) for the first stage (c_1 = 0), letting the
    caller evaluate the base point by a different (e.g. exact) mechanism than
    the stage fields.
    """
    if not tab.is_explicit:
        raise ValueError(f"tableau {tab.name!r} is implicit; only explicit stepping is supported")
    u_n = np.asarray(u_n, dtype=float)
    ks: list[np.ndarray] = []
    for i in range(tab.stages):
        if i == 0 and f0 is not None:
            ks.append(np.asarray(f0, dtype=float))
            continue
        y = u_n.copy()
        for j in range(i):
            if tab.a[i, j] != 0.0:
                y = y + dt * tab.a[i, j] * ks[j]
        ks.append(evaluate_rhs(y))
    d = np.zeros_like(u_n)
    for i in range(tab.stages):
        d = d + tab.b[i] * ks[i]
    return d


@dataclass(frozen=True)
class RelaxationResult:
    gamma: float
    iterations: int
    residual: float


def relax_solve(
    inv: InvariantSpec,
    grid: QuadratureGrid,
    u_n: np.ndarray,
    d_n: np.ndarray,
    dt: float,
    gamma_band: float = 0.1,
    newton_cap: int = 30,
    bisect_cap: int = 60,
    method: str = "auto",
) -> RelaxationResult:
    """Solve I(u + gamma*dt*d) = I(u) for the relaxation factor gamma.

    Quadratic invariants use the closed-form nonzero root; `method="newton"`
    forces the general path (Newton from gamma = 1, bisection fallback on
    [0.5, 1.5]) used for other smooth invariants.  Success requires
    |residual| <= 1e-13 * max(1, |I(u)|) and |gamma - 1| <= gamma_band;
    outside the band RelaxationRangeError signals that the caller should
    shrink dt.  A vanishing direction (<d,d> <= 1e-30) returns gamma = 1 by
    convention.
    """
    if inv.degree < 2:
        raise ValueError(f"relaxation needs a degree >= 2 invariant, got {inv.kind!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    u_n = np.atleast_2d(np.asarray(u_n, dtype=float))
    d_n = np.atleast_2d(np.asarray(d_n, dtype=float))

    dd = inner(grid, d_n, d_n)
    if dd <= 1e-30:
        return RelaxationResult(gamma=1.0, iterations=0, residual=0.0)

    i_ref = eval_invariant(inv, grid, u_n)
    tol = 1e-13 * max(1.0, abs(i_ref))

    def defect(gamma: float) -> float:
        return eval_invariant(inv, grid, u_n + gamma * dt * d_n) - i_ref

    if method == "auto" and inv.kind in ("quadratic", "hamiltonian"):
        ud = inner(grid, u_n, d_n)
        gamma = -2.0 * ud / (dt * dd)
        iterations = 0
    else:
        gamma, iterations = _newton_bisect(defect, grid, inv, u_n, d_n, dt, tol, newton_cap, bisect_cap)

    residual = defect(gamma)
    if abs(gamma - 1.0) > gamma_band + 1e-12:
        raise RelaxationRangeError(
            f"relaxation factor {gamma:.6g} outside 1 +/- {gamma_band}; reduce dt"
        )
    return RelaxationResult(gamma=float(gamma), iterations=iterations, residual=float(residual))


def _newton_bisect(defect, grid, inv, u_n, d_n, dt, tol, newton_cap, bisect_cap):
    gamma = 1.0
    for it in range(1, newton_cap + 1):
        f = defect(gamma)
        if abs(f) <= tol:
            return gamma, it
        kp = inv.k_prime(u_n + gamma * dt * d_n)
        fprime = dt * inner(grid, kp, d_n)
        if fprime == 0.0:
            break
        gamma -= f / fprime
    lo, hi = 0.5, 1.5
    flo = defect(lo)
    for it in range(1, bisect_cap + 1):
        mid = 0.5 * (lo + hi)
        fm = defect(mid)
        if abs(fm) <= tol:
            return mid, newton_cap + it
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi), newton_cap + bisect_cap


def build_relaxed_target(
    field: np.ndarray,
    increment: np.ndarray,
    dt: float,
    grid: QuadratureGrid,
    relax_invariant: InvariantSpec | None,
) -> tuple[np.ndarray, RelaxationResult]:
    """Assemble the step target field + gamma*dt*increment.

    With `relax_invariant` set, gamma is chosen so the target preserves that
    invariant of `field`; with None the plain target (gamma = 1) is returned.
    """
    field = np.atleast_2d(np.asarray(field, dtype=float))
    increment = np.atleast_2d(np.asarray(increment, dtype=float))
    if relax_invariant is None:
        res = RelaxationResult(gamma=1.0, iterations=0, residual=0.0)
    else:
        res = relax_solve(relax_invariant, grid, field, increment, dt)
    return field + res.gamma * dt * increment, res
