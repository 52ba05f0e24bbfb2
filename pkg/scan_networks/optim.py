"""
Loss and Optimizer
==================

Mean-squared-error loss and the bias-corrected ADAM update.
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import net_forward, net_backward
import config


def mse_loss(pred, target):
    """
    Mean squared error and its gradient.

    Returns
    -------
    tuple
        (loss, gradient 2·(pred − target)/n)
    """
    if pred.shape != target.shape:
        raise ValueError(f"Shapes differ: pred {pred.shape}, target {target.shape}")
    diff = pred - target
    n = diff.size
    return float(np.sum(diff ** 2) / n), 2.0 * diff / n


@dataclass
class AdamState:
    """First/second moments per parameter plus the step counter."""

    lr: float = config.SPARK_LR
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    epsilon: float = config.ADAM_EPSILON
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"Learning rate must be > 0, got {self.lr}")


def adam_step(state, params, grads):
    """
    One ADAM update.

    Parameters
    ----------
    state : AdamState
        Updated in place (moments and t)
    params, grads : list of ndarray

    Returns
    -------
    tuple
        (new parameter list, state)
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, m in zip(params, state.m):
        if p.shape != m.shape:
            raise ValueError(f"Parameter shape {p.shape} does not match moment shape {m.shape}")

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t

    updated = []
    for index, (p, g) in enumerate(zip(params, grads)):
        state.m[index] = state.beta1 * state.m[index] + (1 - state.beta1) * g
        state.v[index] = state.beta2 * state.v[index] + (1 - state.beta2) * g ** 2
        m_hat = state.m[index] / correction1
        v_hat = state.v[index] / correction2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return updated, state


def gradient_check(network, inputs, target, eps=1e-6):
    """
    Compare net_backward against central finite differences of the MSE loss.

    Returns
    -------
    list of float
        Per-layer ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)
    """
    def loss_at(params):
        network.set_parameters(params)
        return mse_loss(net_forward(network, inputs), target)[0]

    original = [w.copy() for w in network.parameters()]
    out, cache = net_forward(network, inputs, keep_cache=True)
    analytic, _ = net_backward(network, inputs, mse_loss(out, target)[1], cache)

    errors = []
    for index, weights in enumerate(original):
        numeric = np.zeros_like(weights)
        for flat in range(weights.size):
            shifted = [w.copy() for w in original]
            shifted[index].flat[flat] += eps
            upper = loss_at(shifted)
            shifted[index].flat[flat] -= 2 * eps
            lower = loss_at(shifted)
            numeric.flat[flat] = (upper - lower) / (2 * eps)
        scale = max(np.linalg.norm(analytic[index]), np.linalg.norm(numeric), 1e-300)
        errors.append(float(np.linalg.norm(analytic[index] - numeric) / scale))
    network.set_parameters(original)
    return errors
