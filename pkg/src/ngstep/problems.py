"""Benchmark PDEs: inviscid Burgers, KdV and the first-order acoustic system.

Each problem supplies its right-hand side as a pointwise map on spatial jets
(value and x-derivatives), its initial condition, its conserved functionals
and a reference solution (closed form for the KdV soliton, Fourier
pseudospectral otherwise).

Right-hand sides are evaluated two ways: on the network ansatz via exact
jets from `autodiff`, and on plain grid fields via exact DFT differentiation
on the periodic grid.  The grid path supports a spectral mode cutoff: stage
fields of an explicit Runge-Kutta step feed high wavenumbers through
dt * |k|^q amplification (q = highest derivative order), so modes beyond the
stability region of the tableau must be dropped before differentiating or
rounding noise at the grid scale is blown up by many orders of magnitude.
The cutoff is chosen so that dropped modes carry no resolvable physics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import jet_eval_many
from .invariants import ENERGY, HAMILTONIAN, MASS, InvariantSpec
from .network import NetworkSpec
from .quadrature import QuadratureGrid, make_grid


class ReferenceDivergedError(RuntimeError):
    """The reference integration blew up (|u| > 1e6)."""


def rhs_burgers(v0, v1):
    """du/dt = -u u_x."""
    return -v0 * v1


def rhs_kdv(v0, v1, v3):
    """du/dt = -u u_x - u_xxx."""
    return -v0 * v1 - v3


def rhs_wave(rho_v1, v_v1):
    """(drho/dt, dv/dt) = (-v_x, -rho_x)."""
    return -v_v1, -rho_v1


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: tuple[float, float]
    components: int
    jet_order: int  # highest spatial derivative consumed by the rhs
    invariants: tuple[InvariantSpec, ...]
    relax_invariant: InvariantSpec | None  # degree >= 2 quantity relaxation acts on
    reference: str  # "analytic" | "spectral"

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def initial_condition(self, x) -> np.ndarray:
        """Closed-form u0 per component; returns (components, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.name == "burgers":
            return (1.0 + 0.3 * np.exp(-(BURGERS_B**2) * x**2))[None, :]
        if self.name == "kdv":
            return analytic_kdv(x, 0.0)[None, :]
        rho = np.exp(-9.0 * x**2)
        return np.stack([rho, np.zeros_like(rho)])

    def rhs_from_jets(self, jets: np.ndarray) -> np.ndarray:
        """Pointwise rhs from jets of shape (order+1, components, n)."""
        if self.name == "burgers":
            return rhs_burgers(jets[0, 0], jets[1, 0])[None, :]
        if self.name == "kdv":
            return rhs_kdv(jets[0, 0], jets[1, 0], jets[3, 0])[None, :]
        drho, dv = rhs_wave(jets[1, 0], jets[1, 1])
        return np.stack([drho, dv])

    def rhs_network(self, net: NetworkSpec, theta: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
        """rhs evaluated on the ansatz via exact jets."""
        jets = jet_eval_many(net, theta, grid.points, order=3)
        return self.rhs_from_jets(jets)

    def rhs_grid(self, grid: QuadratureGrid, field: np.ndarray, mode_cutoff: int | None = None) -> np.ndarray:
        """rhs evaluated on a sampled field via DFT derivatives."""
        jets = spectral_jets(grid, field, self.jet_order, mode_cutoff)
        return self.rhs_from_jets(jets)

    def stage_mode_cutoff(self, grid: QuadratureGrid, dt: float, z_max: float = 1.25) -> int | None:
        """Largest retained mode index for stage fields: dt * k^q <= z_max."""
        k_lim = (z_max / dt) ** (1.0 / self.jet_order)
        m = int(np.floor(k_lim * self.length / (2.0 * np.pi)))
        return m if m < grid.n // 2 else None


BURGERS_B = 3.0  # Gaussian width of the Burgers hump; not fixed by the benchmark
KDV_AMPLITUDE = 2.0
KDV_OFFSET = 20.0


def analytic_kdv(x, t, amplitude: float = KDV_AMPLITUDE, offset: float = KDV_OFFSET) -> np.ndarray:
    """Single soliton A / cosh^2(sqrt(3A) (x - ct - mu) / 6), speed c = A/3."""
    x = np.asarray(x, dtype=float)
    c = amplitude / 3.0
    arg = np.sqrt(3.0 * amplitude) * (x - c * t - offset) / 6.0
    return amplitude / np.cosh(arg) ** 2


BURGERS = ProblemSpec(
    name="burgers",
    domain=(-1.0, 1.0),
    components=1,
    jet_order=1,
    invariants=(MASS,),
    relax_invariant=None,
    reference="spectral",
)
KDV = ProblemSpec(
    name="kdv",
    domain=(0.0, 80.0),
    components=1,
    jet_order=3,
    invariants=(MASS, ENERGY),
    relax_invariant=ENERGY,
    reference="analytic",
)
WAVE = ProblemSpec(
    name="wave",
    domain=(-1.0, 1.0),
    components=2,
    jet_order=1,
    invariants=(HAMILTONIAN,),
    relax_invariant=HAMILTONIAN,
    reference="spectral",
)

PROBLEMS = {p.name: p for p in (BURGERS, KDV, WAVE)}


def wavenumbers(grid: QuadratureGrid) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.spacing)


def spectral_jets(
    grid: QuadratureGrid, field: np.ndarray, order: int, mode_cutoff: int | None = None
) -> np.ndarray:
    """Jets (value and derivatives 1..order) of grid fields by DFT differentiation.

    With `mode_cutoff` set, the field is first projected onto modes
    |m| <= cutoff; the returned value row is the projected field.
    """
    field = np.atleast_2d(np.asarray(field, dtype=float))
    if field.shape[-1] != grid.n:
        raise ValueError(f"field has {field.shape[-1]} points, grid has {grid.n}")
    k = wavenumbers(grid)
    fh = np.fft.fft(field, axis=-1)
    if mode_cutoff is not None:
        m = np.abs(np.fft.fftfreq(grid.n, d=1.0 / grid.n))
        fh = np.where(m <= mode_cutoff, fh, 0.0)
    jets = np.empty((order + 1, *field.shape))
    jets[0] = np.real(np.fft.ifft(fh, axis=-1))
    for p in range(1, order + 1):
        jets[p] = np.real(np.fft.ifft((1j * k) ** p * fh, axis=-1))
    if order < 3:
        full = np.zeros((4, *field.shape))
        full[: order + 1] = jets
        return full
    return jets


def resample_periodic(field: np.ndarray, n_out: int) -> np.ndarray:
    """Trigonometric interpolation of a periodic grid field onto n_out points."""
    field = np.atleast_2d(np.asarray(field, dtype=float))
    n_in = field.shape[-1]
    if n_out == n_in:
        return field.copy()
    fh = np.fft.rfft(field, axis=-1)
    n_keep = min(fh.shape[-1], n_out // 2 + 1)
    out = np.zeros((field.shape[0], n_out // 2 + 1), dtype=complex)
    out[:, :n_keep] = fh[:, :n_keep]
    if n_out > n_in and n_in % 2 == 0:
        out[:, n_in // 2] *= 0.5  # split the input Nyquist mode across +/- k
    if n_out < n_in and n_out % 2 == 0 and n_keep == n_out // 2 + 1:
        out[:, -1] = out[:, -1].real  # keep the downsampled field real-symmetric
    return np.fft.irfft(out, n=n_out, axis=-1) * (n_out / n_in)


# Dormand-Prince 5(4) coefficients; used as a fixed-step 5th-order scheme.
_DP_A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    ]
)
_DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])


def _dp45_step(rhs, u, dt):
    ks = []
    for i in range(6):
        y = u
        for j in range(i):
            if _DP_A[i, j] != 0.0:
                y = y + dt * _DP_A[i, j] * ks[j]
        ks.append(rhs(y))
    return u + dt * sum(b * k for b, k in zip(_DP_B, ks) if b != 0.0)


@dataclass(frozen=True)
class ReferenceSolution:
    problem: str
    grid: QuadratureGrid
    times: np.ndarray  # (n_snap,)
    fields: np.ndarray  # (n_snap, components, n)

    def at_time(self, t: float, tol: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > tol:
            raise ValueError(
                f"no reference snapshot within {tol} of t={t} (nearest {self.times[idx]})"
            )
        return self.fields[idx]

    def sample(self, t: float, n_out: int, tol: float) -> np.ndarray:
        return resample_periodic(self.at_time(t, tol), n_out)


def spectral_reference(
    problem: ProblemSpec,
    n_grid: int,
    dt: float,
    t_end: float,
    snapshot_times: Sequence[float] | None = None,
    dealias: bool | None = None,
) -> ReferenceSolution:
    """Fourier-collocation reference advanced with fixed-step Dormand-Prince.

    Burgers dealiases the quadratic term with the 2/3 rule by default.
    Snapshots are stored at the requested times (defaults to {0, t_end}),
    each matched to the nearest step time.
    """
    a, b = problem.domain
    grid = make_grid(a, b, n_grid)
    if dealias is None:
        dealias = problem.name == "burgers"
    cutoff = int(n_grid // 2 * 2 / 3) if dealias else None

    def rhs(u):
        return problem.rhs_grid(grid, u, mode_cutoff=cutoff)

    if snapshot_times is None:
        snapshot_times = [0.0, t_end]
    want = np.asarray(sorted(snapshot_times), dtype=float)

    u = problem.initial_condition(grid.points)
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    times, fields = [], []
    next_want = 0

    def store(t, u):
        nonlocal next_want
        while next_want < want.size and want[next_want] <= t + 0.5 * dt:
            times.append(t)
            fields.append(u.copy())
            next_want += 1

    store(0.0, u)
    for step in range(1, n_steps + 1):
        u = _dp45_step(rhs, u, dt)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e6:
            raise ReferenceDivergedError(f"{problem.name} reference diverged at step {step}")
        store(step * dt, u)
    return ReferenceSolution(
        problem=problem.name, grid=grid, times=np.asarray(times), fields=np.asarray(fields)
    )


def analytic_reference(
    problem: ProblemSpec, n_grid: int, snapshot_times: Sequence[float]
) -> ReferenceSolution:
    if problem.reference != "analytic":
        raise ValueError(f"{problem.name} has no closed-form solution")
    grid = make_grid(*problem.domain, n_grid)
    times = np.asarray(sorted(snapshot_times), dtype=float)
    fields = np.stack([analytic_kdv(grid.points, t)[None, :] for t in times])
    return ReferenceSolution(problem=problem.name, grid=grid, times=times, fields=fields)
