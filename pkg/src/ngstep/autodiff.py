"""Exact derivatives of the periodic MLP.

Two independent facilities:

* spatial jets: truncated Taylor propagation through the network giving the
  value and x-derivatives of order 1..3 in one forward sweep (composition via
  the Faa di Bruno rules with closed-form activation derivatives);
* parameter gradients: one reverse sweep per sample point giving the exact
  gradient of each output component with respect to every parameter.

Mixed derivatives d/dtheta d/dx are deliberately not offered; nothing in the
pipeline needs them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkSpec, check_params, embed, unflatten


@dataclass(frozen=True)
class Jet3:
    """Value and x-derivatives up to order 3 at a single point."""

    v0: float
    v1: float = 0.0
    v2: float = 0.0
    v3: float = 0.0


@dataclass(frozen=True)
class ParamGradient:
    """Network value and its gradient with respect to the flat parameters."""

    value: float
    grad: np.ndarray


def _activation_derivs(activation: str, z: np.ndarray, order: int) -> list[np.ndarray]:
    """[sigma(z), sigma'(z), ..., sigma^(order)(z)], all elementwise."""
    if activation == "tanh":
        t = np.tanh(z)
        s = 1.0 - t * t  # sech^2
        out = [t, s]
        if order >= 2:
            out.append(-2.0 * t * s)
        if order >= 3:
            out.append(s * (6.0 * t * t - 2.0))
        return out[: order + 1]
    if activation == "sin":
        sn, cs = np.sin(z), np.cos(z)
        return [sn, cs, -sn, -cs][: order + 1]
    # identity
    zero = np.zeros_like(z)
    return [z, np.ones_like(z), zero, zero][: order + 1]


def _compose_jet(activation: str, z: list[np.ndarray], order: int) -> list[np.ndarray]:
    """Taylor coefficients of sigma(z(x)) given those of z(x) (orders 0..3)."""
    d = _activation_derivs(activation, z[0], order)
    out = [d[0]]
    if order >= 1:
        out.append(d[1] * z[1])
    if order >= 2:
        out.append(d[1] * z[2] + d[2] * z[1] ** 2)
    if order >= 3:
        out.append(d[1] * z[3] + 3.0 * d[2] * z[1] * z[2] + d[3] * z[1] ** 3)
    return out


def _embedding_jets(spec: NetworkSpec, xs: np.ndarray, order: int) -> list[np.ndarray]:
    """Jets of (sin(kx), cos(kx)) stacked as arrays of shape (m, 2)."""
    k = 2.0 * np.pi / spec.domain_length
    ang = k * xs
    sn, cs = np.sin(ang), np.cos(ang)
    jets = [np.stack([sn, cs], axis=-1)]
    if order >= 1:
        jets.append(k * np.stack([cs, -sn], axis=-1))
    if order >= 2:
        jets.append(k * k * np.stack([-sn, -cs], axis=-1))
    if order >= 3:
        jets.append(k**3 * np.stack([-cs, sn], axis=-1))
    return jets


def jet_eval_many(spec: NetworkSpec, theta: np.ndarray, xs: np.ndarray, order: int = 3) -> np.ndarray:
    """Jets of all output components at m points; returns (order+1, output_dim, m)."""
    if not 0 <= order <= 3:
        raise ValueError("jet order must be in 0..3")
    layers = unflatten(spec, theta)
    xs = np.asarray(xs, dtype=float).ravel()
    a = _embedding_jets(spec, xs, order)
    for w, b in layers[:-1]:
        z = [a[0] @ w.T + b] + [ak @ w.T for ak in a[1:]]
        a = _compose_jet(spec.activation, z, order)
    w, b = layers[-1]
    out = [a[0] @ w.T + b] + [ak @ w.T for ak in a[1:]]
    return np.stack([o.T for o in out])  # (order+1, output_dim, m)


def jet_eval(spec: NetworkSpec, theta: np.ndarray, x: float, order: int = 3) -> list[Jet3]:
    """Jet of each output component at one point (entries above `order` are zero)."""
    vals = jet_eval_many(spec, theta, np.array([x]), order)
    padded = np.zeros((4, spec.output_dim))
    padded[: order + 1] = vals[:, :, 0]
    return [Jet3(*padded[:, c]) for c in range(spec.output_dim)]


def param_jacobian(spec: NetworkSpec, theta: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and per-sample parameter gradients at m points.

    Returns (values, jac) with values of shape (output_dim, m) and jac of
    shape (m * output_dim, n_params); row p * output_dim + c holds the
    gradient of component c at point p (point-major row order, matching the
    least-squares assembly).
    """
    theta = check_params(spec, theta)
    layers = unflatten(spec, theta)
    xs = np.asarray(xs, dtype=float).ravel()
    m = xs.size
    cdim = spec.output_dim

    # forward, keeping inputs and pre-activations of every layer
    acts = [embed(spec, xs)]  # a_0 .. a_{L-1}: inputs to each affine layer
    zs = []
    a = acts[0]
    for w, b in layers[:-1]:
        z = a @ w.T + b
        zs.append(z)
        a = _activation_derivs(spec.activation, z, 1)[0]
        acts.append(a)
    w, b = layers[-1]
    values = (acts[-1] @ w.T + b).T.copy()

    jac = np.empty((m * cdim, spec.n_params))
    for c in range(cdim):
        delta = np.zeros((m, cdim))
        delta[:, c] = 1.0
        blocks = [None] * len(layers)
        for li in range(len(layers) - 1, -1, -1):
            w, _ = layers[li]
            gw = np.einsum("po,pi->poi", delta, acts[li]).reshape(m, -1)
            blocks[li] = (gw, delta)
            if li > 0:
                sprime = _activation_derivs(spec.activation, zs[li - 1], 1)[1]
                delta = (delta @ w) * sprime
        row = np.concatenate([np.concatenate([gw, gb], axis=1) for gw, gb in blocks], axis=1)
        jac[c::cdim] = row
    return values, jac


def param_gradient(spec: NetworkSpec, theta: np.ndarray, x: float) -> list[ParamGradient]:
    """Exact gradient of each output component with respect to theta at one x."""
    values, jac = param_jacobian(spec, theta, np.array([x]))
    return [ParamGradient(value=float(values[c, 0]), grad=jac[c].copy()) for c in range(spec.output_dim)]
