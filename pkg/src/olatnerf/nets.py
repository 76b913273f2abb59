"""Fully-connected networks with hand-written gradients, plus Adam.

The model graphs used here are small and fixed, so instead of a generic
autodiff engine each network is a plain list of (W, b) arrays with explicit
forward/backward functions.  Everything is dtype-polymorphic: training runs
in float32, gradient checks run the same code in float64.

A network is ``n_hidden`` ReLU layers followed by one output affine with an
optional output activation.  A single mid-network injection point is
supported: the ReLU output of one hidden layer can be concatenated with
caller-provided features before the next affine layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

_EXP_CLAMP = 15.0

OUTPUT_ACTIVATIONS = ("none", "sigmoid", "exponential")


def trunc_exp(z: np.ndarray) -> np.ndarray:
    """Exponential with the input clamped above to avoid overflow."""
    return np.exp(np.minimum(z, _EXP_CLAMP))


def trunc_exp_grad(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of :func:`trunc_exp` given its input and output."""
    return np.where(z < _EXP_CLAMP, y, 0.0)


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one network: widths, activations, injection point."""

    in_width: int
    hidden_widths: tuple[int, ...]
    out_width: int
    output_activation: str = "none"
    inject_after: int | None = None
    inject_width: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        if len(self.hidden_widths) < 1:
            raise ValueError("at least one hidden layer is required")
        if min((self.in_width, self.out_width) + self.hidden_widths) < 1:
            raise ValueError("all widths must be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if self.inject_after is not None:
            if not 1 <= self.inject_after <= len(self.hidden_widths):
                raise ValueError("inject_after must name a hidden layer (1-based)")
            if self.inject_width < 1:
                raise ValueError("inject_width must be >= 1 when injection is used")
        elif self.inject_width:
            raise ValueError("inject_width set without inject_after")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of each affine layer, injection included."""
        widths = (self.in_width,) + self.hidden_widths + (self.out_width,)
        dims = []
        for i in range(len(widths) - 1):
            fan_in = widths[i]
            if i > 0 and self.inject_after == i:
                fan_in += self.inject_width
            dims.append((fan_in, widths[i + 1]))
        return dims


def init_mlp(spec: MlpSpec, rng: np.random.Generator, dtype=np.float32):
    """Glorot-uniform weights and zero biases for every affine layer."""
    params = []
    for fan_in, fan_out in spec.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        params.append((w, b))
    return params


def mlp_forward(spec: MlpSpec, params, x: np.ndarray, extra: np.ndarray | None = None):
    """Run the network on a batch, returning (output, cache for backward)."""
    x = np.atleast_2d(x)
    if x.shape[1] != spec.in_width:
        raise ValueError(f"input width {x.shape[1]} != spec width {spec.in_width}")
    if spec.inject_after is not None:
        if extra is None:
            raise ValueError("spec declares an injection point but no features were given")
        extra = np.atleast_2d(extra)
        if extra.shape != (x.shape[0], spec.inject_width):
            raise ValueError(
                f"injected features must be ({x.shape[0]}, {spec.inject_width}),"
                f" got {extra.shape}"
            )
    elif extra is not None:
        raise ValueError("features injected into a spec without an injection point")

    n_hidden = len(spec.hidden_widths)
    inputs, preacts = [], []
    h = x
    for i, (w, b) in enumerate(params):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        if i < n_hidden:
            h = np.maximum(z, 0.0)
            if spec.inject_after == i + 1:
                h = np.concatenate([h, extra], axis=1)
        else:
            h = _apply_output_activation(spec.output_activation, z)
    cache = {"spec": spec, "inputs": inputs, "preacts": preacts, "output": h,
             "batch": x.shape[0]}
    return h, cache


def _apply_output_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "none":
        return z
    if kind == "sigmoid":
        return expit(z)
    return trunc_exp(z)


def mlp_backward(params, cache, grad_out: np.ndarray):
    """Exact gradients for a cached forward pass.

    Returns ``(param_grads, grad_input, grad_extra)`` where ``param_grads``
    mirrors ``params`` as (dW, db) pairs and ``grad_extra`` is None unless
    the spec has an injection point.
    """
    spec: MlpSpec = cache["spec"]
    grad_out = np.atleast_2d(grad_out)
    if grad_out.shape != (cache["batch"], spec.out_width):
        raise ValueError(
            f"output gradient must be ({cache['batch']}, {spec.out_width}),"
            f" got {grad_out.shape}"
        )
    n_hidden = len(spec.hidden_widths)
    z_last = cache["preacts"][-1]
    y = cache["output"]
    if spec.output_activation == "none":
        dz = grad_out
    elif spec.output_activation == "sigmoid":
        dz = grad_out * y * (1.0 - y)
    else:
        dz = grad_out * trunc_exp_grad(z_last, y)

    param_grads = [None] * len(params)
    grad_extra = None
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        x_i = cache["inputs"][i]
        dw = x_i.T @ dz
        db = dz.sum(axis=0)
        param_grads[i] = (dw, db)
        d_input = dz @ w.T
        if i == 0:
            return param_grads, d_input, grad_extra
        # d_input is w.r.t. the (possibly concatenated) input of layer i;
        # split off the injected part before undoing the previous ReLU.
        if spec.inject_after == i:
            width = spec.hidden_widths[i - 1]
            grad_extra = d_input[:, width:]
            d_input = d_input[:, :width]
        dz = d_input * (cache["preacts"][i - 1] > 0)
    raise AssertionError("unreachable")


@dataclass
class AdamState:
    """Adam accumulators; one slot per parameter array."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    skipped: int = 0


def init_adam(params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    state.m = [np.zeros_like(p) for p in params]
    state.v = [np.zeros_like(p) for p in params]
    return state


def adam_step(params, grads, state: AdamState) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place.

    If any gradient is non-finite the whole step is skipped (and counted in
    ``state.skipped``) so a single bad batch cannot poison the accumulators.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must have equal length")
    for g in grads:
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            logger.warning("adam_step: non-finite gradient, step skipped")
            return state
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state
