"""Periodic MLP ansatz and flat parameter handling.

The ansatz is u(theta, x) = MLP(sin(2*pi*x/L), cos(2*pi*x/L)) so periodicity
on an interval of length L is exact by construction.  Parameters live in a
single flat vector with layer-major layout: for each layer, the weight matrix
in row-major order followed by the bias vector.  That layout is part of the
on-disk format (see `save_params`) and must not change.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ACTIVATIONS = ("tanh", "sin", "identity")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the periodic MLP.

    domain_length: period L of the input embedding.
    hidden_widths: sizes of the hidden layers (input is the 2-dim embedding).
    activation: nonlinearity applied after every hidden layer.
    output_dim: number of solution components (1 for scalar PDEs, 2 for the
        acoustic system).
    """

    domain_length: float
    hidden_widths: tuple[int, ...]
    activation: str = "tanh"
    output_dim: int = 1

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {ACTIVATIONS}")
        if self.output_dim not in (1, 2):
            raise ValueError("output_dim must be 1 or 2")
        if not self.hidden_widths or any(wd < 1 for wd in self.hidden_widths):
            raise ValueError("hidden_widths must be a non-empty tuple of positive ints")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for each affine layer, embedding included."""
        dims = [2, *self.hidden_widths, self.output_dim]
        return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]

    @property
    def n_params(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_dims)

    def spec_hash(self) -> str:
        key = (
            f"L={self.domain_length!r};widths={self.hidden_widths};"
            f"act={self.activation};out={self.output_dim};emb=sincos"
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def check_params(spec: NetworkSpec, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(
            f"parameter length mismatch: spec has {spec.n_params}, got shape {theta.shape}"
        )
    return theta


def unflatten(spec: NetworkSpec, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) views (no copies)."""
    theta = check_params(spec, theta)
    layers = []
    pos = 0
    for fi, fo in spec.layer_dims:
        w = theta[pos : pos + fi * fo].reshape(fo, fi)
        pos += fi * fo
        b = theta[pos : pos + fo]
        pos += fo
        layers.append((w, b))
    return layers


def flatten(spec: NetworkSpec, layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=float).ravel())
        parts.append(np.asarray(b, dtype=float).ravel())
    theta = np.concatenate(parts)
    return check_params(spec, theta)


def init_params(spec: NetworkSpec, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases, reproducible per seed."""
    rng = np.random.default_rng(seed)
    layers = []
    for fi, fo in spec.layer_dims:
        bound = np.sqrt(6.0 / (fi + fo))
        w = rng.uniform(-bound, bound, size=(fo, fi))
        b = np.zeros(fo)
        layers.append((w, b))
    return flatten(spec, layers)


def embed(spec: NetworkSpec, x) -> np.ndarray:
    """Periodic input encoding (sin(2*pi*x/L), cos(2*pi*x/L)).

    Scalar x gives shape (2,); an array of m points gives (m, 2).
    """
    ang = 2.0 * np.pi * np.asarray(x, dtype=float) / spec.domain_length
    out = np.stack([np.sin(ang), np.cos(ang)], axis=-1)
    return out


def _act(spec: NetworkSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "tanh":
        return np.tanh(z)
    if spec.activation == "sin":
        return np.sin(z)
    return z


def forward_many(spec: NetworkSpec, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Evaluate the network on an array of m points; returns (output_dim, m)."""
    layers = unflatten(spec, theta)
    a = embed(spec, np.asarray(xs, dtype=float).ravel())
    for w, b in layers[:-1]:
        a = _act(spec, a @ w.T + b)
    w, b = layers[-1]
    out = a @ w.T + b
    return out.T.copy()


def forward(spec: NetworkSpec, theta: np.ndarray, x: float) -> np.ndarray:
    """Evaluate at one point; returns a vector of output_dim values."""
    return forward_many(spec, theta, np.array([x]))[:, 0]


PARAMS_MAGIC = "ngstep-params-v1"


def save_params(path, spec: NetworkSpec, theta: np.ndarray) -> None:
    """Write a parameter snapshot.

    Text format: a header line `# ngstep-params-v1 spec=<hash> n_theta=<n>`
    followed by one parameter per line in flat layout order, printed with
    `repr` so the round trip is bit exact.
    """
    theta = check_params(spec, theta)
    with open(path, "w") as fh:
        fh.write(f"# {PARAMS_MAGIC} spec={spec.spec_hash()} n_theta={spec.n_params}\n")
        for v in theta:
            fh.write(repr(float(v)) + "\n")


def load_params(path, spec: NetworkSpec) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = header.lstrip("# ").split()
        if not fields or fields[0] != PARAMS_MAGIC:
            raise ValueError(f"{path}: not a parameter snapshot (header {header!r})")
        meta = dict(kv.split("=", 1) for kv in fields[1:])
        if meta.get("spec") != spec.spec_hash():
            raise ValueError(f"{path}: snapshot was written for a different network spec")
        theta = np.array([float(line) for line in fh if line.strip()], dtype=float)
    return check_params(spec, theta)
