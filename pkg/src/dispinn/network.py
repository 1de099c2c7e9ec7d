"""Tanh multilayer perceptron evaluated over Taylor jets.

Parameters live in one flat vector ``theta``; layer ``k`` contributes its
weight matrix ``W_k`` (shape ``d_{k+1} x d_k``, row-major) followed by its
bias ``b_k``.  The optional fixed input normalisation ``(y - shift) / scale``
is part of the architecture, not of ``theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .jets import Jet2, is_zero, jet_affine, jet_tanh, row_degrees_for


@dataclass(frozen=True)
class Architecture:
    widths: tuple[int, ...]
    input_shift: tuple[float, ...] | None = None
    input_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"invalid widths {self.widths!r}")
        if widths[-1] != 1:
            raise ValueError("scalar output network: last width must be 1")
        object.__setattr__(self, "widths", widths)
        d_in = widths[0]
        shift = self.input_shift if self.input_shift is not None else (0.0,) * d_in
        scale = self.input_scale if self.input_scale is not None else (1.0,) * d_in
        if len(shift) != d_in or len(scale) != d_in:
            raise ValueError("input normalisation must match the input width")
        if any(float(s) <= 0 for s in scale):
            raise ValueError("input scales must be positive")
        object.__setattr__(self, "input_shift", tuple(float(s) for s in shift))
        object.__setattr__(self, "input_scale", tuple(float(s) for s in scale))

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_params(self) -> int:
        return param_count(self.widths)


def param_count(widths: Sequence[int]) -> int:
    return sum((widths[k] + 1) * widths[k + 1] for k in range(len(widths) - 1))


def layer_slices(widths: Sequence[int]):
    """Yield ``(w_slice, w_shape, b_slice)`` for every layer in theta."""
    offset = 0
    for k in range(len(widths) - 1):
        d_in, d_out = widths[k], widths[k + 1]
        w = slice(offset, offset + d_in * d_out)
        offset += d_in * d_out
        b = slice(offset, offset + d_out)
        offset += d_out
        yield w, (d_out, d_in), b


def weight_mask(widths: Sequence[int]) -> np.ndarray:
    """Boolean mask selecting the weights (not biases) inside theta."""
    mask = np.zeros(param_count(widths), dtype=bool)
    for w, _, _ in layer_slices(widths):
        mask[w] = True
    return mask


def unflatten(theta, widths: Sequence[int]):
    return [(theta[w].reshape(shape), theta[b]) for w, shape, b in layer_slices(widths)]


@dataclass
class MlpParams:
    arch: Architecture
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.arch.n_params,):
            raise ValueError(f"theta has shape {self.theta.shape}, expected ({self.arch.n_params},)")

    @property
    def widths(self):
        return self.arch.widths

    @property
    def layers(self):
        return unflatten(self.theta, self.arch.widths)

    def with_theta(self, theta) -> "MlpParams":
        return MlpParams(self.arch, np.array(theta, dtype=float))


def init_params(arch: Architecture | Sequence[int], seed: int) -> MlpParams:
    """Xavier-uniform weights, zero biases, deterministic in ``seed``."""
    if not isinstance(arch, Architecture):
        arch = Architecture(tuple(arch))
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.n_params)
    for w, (d_out, d_in), _ in layer_slices(arch.widths):
        bound = np.sqrt(6.0 / (d_in + d_out))
        theta[w] = rng.uniform(-bound, bound, size=d_out * d_in)
    return MlpParams(arch, theta)


def _normalise(arch: Architecture, points):
    shift = jnp.asarray(arch.input_shift)
    scale = jnp.asarray(arch.input_scale)
    return (points - shift) / scale


def mlp_apply(theta, arch: Architecture, points):
    """Pointwise network output, shape ``points.shape[:-1]``."""
    z = _normalise(arch, jnp.asarray(points))
    layers = unflatten(theta, arch.widths)
    for W, b in layers[:-1]:
        z = jnp.tanh(z @ W.T + b)
    W, b = layers[-1]
    return (z @ W.T + b)[..., 0]


def input_jet(arch: Architecture, points, degrees, row_degrees=None) -> Jet2:
    """Jets of the normalised inputs, stacked along the last axis.

    Column 0 of ``points`` is time, column 1 is space; any further columns
    (PDE parameters) enter as constants.
    """
    I, J = degrees
    points = jnp.asarray(points)
    if points.shape[-1] != arch.n_inputs:
        raise ValueError(f"points have {points.shape[-1]} coordinates, network expects {arch.n_inputs}")
    rd = row_degrees_for((I, J), row_degrees)
    c = [[0 if j <= rd[i] else None for j in range(J + 1)] for i in range(I + 1)]
    c[0][0] = _normalise(arch, points)
    unit = np.eye(arch.n_inputs)
    if I >= 1:
        c[1][0] = jnp.asarray(unit[0] / arch.input_scale[0])
    if J >= 1:
        c[0][1] = jnp.asarray(unit[1] / arch.input_scale[1])
    return Jet2(c)


def mlp_jet(theta, arch: Architecture, points, degrees, row_degrees=None) -> Jet2:
    """Jet of the network output at every point (batch shape ``points.shape[:-1]``)."""
    z = input_jet(arch, points, degrees, row_degrees)
    layers = unflatten(theta, arch.widths)
    for W, b in layers[:-1]:
        z = jet_tanh(jet_affine(z, W, b))
    W, b = layers[-1]
    out = jet_affine(z, W, b)
    return Jet2([[c if c is None or is_zero(c) else c[..., 0] for c in row] for row in out.coeffs])


def forward_jet(params: MlpParams, points, degrees, row_degrees=None) -> Jet2:
    return mlp_jet(jnp.asarray(params.theta), params.arch, points, tuple(degrees), row_degrees)


class GradTape:
    """One recorded evaluation of a scalar loss of theta.

    Wraps ``jax.vjp``: the forward pass is traced once, and the pullback
    accumulates adjoints through every jet coefficient back to theta.
    """

    def __init__(self, loss_fn: Callable, theta):
        theta = jnp.asarray(theta)
        value, pullback = jax.vjp(loss_fn, theta)
        if jnp.ndim(value) != 0:
            raise ValueError("GradTape needs a scalar loss")
        self.theta = theta
        self.value = value
        self._pullback = pullback

    def gradient(self) -> np.ndarray:
        (g,) = self._pullback(jnp.ones_like(self.value))
        return np.asarray(g)


def loss_gradient(tape: GradTape) -> np.ndarray:
    return tape.gradient()


# checkpoint format ---------------------------------------------------------

CHECKPOINT_MAGIC = "dispinn-checkpoint v1"


def save_checkpoint(params: MlpParams, path) -> Path:
    """Write a plain-text checkpoint.

    Layout, one item per line::

        dispinn-checkpoint v1
        widths <d_1> ... <d_K>
        shift <s_1> ... <s_{d_1}>
        scale <c_1> ... <c_{d_1}>
        theta <M>
        <theta_0>
        ...

    Floats are written with ``repr`` so they round-trip bit-for-bit.
    """
    path = Path(path)
    arch = params.arch
    lines = [
        CHECKPOINT_MAGIC,
        "widths " + " ".join(str(w) for w in arch.widths),
        "shift " + " ".join(repr(float(s)) for s in arch.input_shift),
        "scale " + " ".join(repr(float(s)) for s in arch.input_scale),
        f"theta {params.theta.size}",
    ]
    lines.extend(repr(float(v)) for v in params.theta)
    path.write_text("\n".join(lines) + "\n")
    return path


def load_checkpoint(path) -> MlpParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a dispinn checkpoint")
    header = {}
    for line in lines[1:5]:
        key, *vals = line.split()
        header[key] = vals
    widths = tuple(int(v) for v in header["widths"])
    arch = Architecture(widths,
                        tuple(float(v) for v in header["shift"]),
                        tuple(float(v) for v in header["scale"]))
    m = int(header["theta"][0])
    theta = np.array([float(v) for v in lines[5:5 + m]])
    return MlpParams(arch, theta)
