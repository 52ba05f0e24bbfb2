"""
Convolutional Layers and Networks
=================================

Bias-free multi-channel convolutions over three spatial axes, pointwise
activations, additive skip connections, and exact reverse-mode
gradients. 2D data uses a spatial extent of 1 on the last axis.

Arrays are (channels, D0, D1, D2); weights are (out, in, k0, k1, k2).
Convolution follows the cross-correlation convention.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


# ========================================
# CONVOLUTION
# ========================================

@dataclass
class ConvLayer:
    """
    One bias-free convolution.

    Attributes
    ----------
    weights : float ndarray
        (out_channels, in_channels, k0, k1, k2)
    padding : str
        'same' (zero-padded, shape preserving; odd kernels) or 'valid'
    dilation : tuple
        Spacing between kernel taps per spatial axis
    """

    weights: np.ndarray
    padding: str = 'same'
    dilation: tuple = (1, 1, 1)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 5:
            raise ValueError(f"Weights must be (out, in, k0, k1, k2), got shape {self.weights.shape}")
        if self.padding not in ('same', 'valid'):
            raise ValueError(f"Padding must be 'same' or 'valid', got '{self.padding}'")
        self.dilation = tuple(int(d) for d in self.dilation)
        if len(self.dilation) != 3 or any(d < 1 for d in self.dilation):
            raise ValueError(f"Dilation must be three positive integers, got {self.dilation}")
        if self.padding == 'same' and any(k % 2 == 0 for k in self.kernel):
            raise ValueError(f"'same' convolutions need odd kernels, got {self.kernel}")

    @classmethod
    def initialize(cls, in_channels, out_channels, kernel, rng, padding='same', dilation=(1, 1, 1)):
        """Uniform init in ±sqrt(1 / fan_in), fan_in = in_channels · kernel volume."""
        kernel = tuple(int(k) for k in kernel)
        fan_in = in_channels * int(np.prod(kernel))
        bound = np.sqrt(1.0 / fan_in)
        weights = rng.uniform(-bound, bound, size=(out_channels, in_channels) + kernel)
        return cls(weights=weights, padding=padding, dilation=dilation)

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel(self):
        return self.weights.shape[2:]

    @property
    def reach(self):
        """Dilated kernel extent minus one, per spatial axis."""
        return tuple(d * (k - 1) for d, k in zip(self.dilation, self.kernel))


def _same_pad(layer):
    return [(0, 0)] + [(r // 2, r // 2) for r in layer.reach]


def _output_spatial(layer, spatial):
    return tuple(n - r for n, r in zip(spatial, layer.reach))


def _tap_slices(layer, out_spatial):
    for tap in itertools.product(*(range(k) for k in layer.kernel)):
        starts = [t * d for t, d in zip(tap, layer.dilation)]
        yield tap, (slice(None),) + tuple(slice(s, s + n) for s, n in zip(starts, out_spatial))


def conv_forward(layer, x):
    """
    Multi-channel convolution without bias.

    Parameters
    ----------
    layer : ConvLayer
    x : float ndarray
        (in_channels, D0, D1, D2)

    Returns
    -------
    float ndarray
        (out_channels, ...) with spatial dims preserved for 'same' and
        reduced by the dilated kernel reach for 'valid'
    """
    if x.ndim != 4 or x.shape[0] != layer.in_channels:
        raise ValueError(
            f"Input must be ({layer.in_channels}, D0, D1, D2), got shape {x.shape}"
        )
    if layer.padding == 'same':
        x = np.pad(x, _same_pad(layer))
    out_spatial = _output_spatial(layer, x.shape[1:])
    if any(n < 1 for n in out_spatial):
        raise ValueError(f"Input {x.shape[1:]} is smaller than the kernel reach {layer.reach}")

    out = np.zeros((layer.out_channels,) + out_spatial)
    for tap, window in _tap_slices(layer, out_spatial):
        out += np.tensordot(layer.weights[(slice(None), slice(None)) + tap], x[window], axes=(1, 0))
    return out


def conv_backward(layer, x, grad_out):
    """
    Gradients of conv_forward.

    Parameters
    ----------
    layer : ConvLayer
    x : float ndarray
        The forward input
    grad_out : float ndarray
        Gradient with respect to the forward output

    Returns
    -------
    tuple
        (grad_weights, grad_input)
    """
    padded = np.pad(x, _same_pad(layer)) if layer.padding == 'same' else x
    out_spatial = grad_out.shape[1:]

    grad_w = np.zeros_like(layer.weights)
    grad_x = np.zeros_like(padded)
    for tap, window in _tap_slices(layer, out_spatial):
        index = (slice(None), slice(None)) + tap
        grad_w[index] = np.tensordot(grad_out, padded[window], axes=([1, 2, 3], [1, 2, 3]))
        grad_x[window] += np.tensordot(layer.weights[index], grad_out, axes=(0, 0))

    if layer.padding == 'same':
        crop = tuple(slice(lo, n - hi) for (lo, hi), n in zip(_same_pad(layer), grad_x.shape))
        grad_x = grad_x[crop]
    return grad_w, grad_x


# ========================================
# ACTIVATIONS
# ========================================

def relu(x):
    """max(0, x)."""
    return np.maximum(x, 0.0)


def relu_grad(x):
    # subgradient at 0 is 0
    return (x > 0).astype(float)


def custom_nl(x):
    """
    NL(x) = x + ReLU((x − 1)/2) + ReLU(−(x + 1)/2).

    Identity on [−1, 1]; slope 3/2 above 1 and 1/2 below −1.
    """
    return x + relu((x - 1) / 2) + relu(-(x + 1) / 2)


def custom_nl_grad(x):
    return 1.0 + 0.5 * (x > 1) - 0.5 * (x < -1)


def identity(x):
    return x


def identity_grad(x):
    return np.ones_like(x)


ACTIVATIONS = {
    'relu': (relu, relu_grad),
    'custom_nl': (custom_nl, custom_nl_grad),
    'identity': (identity, identity_grad),
}


# ========================================
# NETWORK
# ========================================

@dataclass
class Network:
    """
    Layer stack with per-layer activations and additive skips.

    x_0 is the input; x_k = act_k(conv_k(x_{k−1})) + Σ x_s over skips (s, k).

    Attributes
    ----------
    layers : list of ConvLayer
    activations : list of str
        One tag per layer from ACTIVATIONS
    skips : list of tuple
        (source, destination) activation indices, 0 = network input
    """

    layers: list
    activations: list
    skips: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.activations) != len(self.layers):
            raise ValueError(
                f"Need one activation per layer, got {len(self.activations)} for {len(self.layers)} layers"
            )
        for tag in self.activations:
            if tag not in ACTIVATIONS:
                raise ValueError(f"Unknown activation '{tag}', expected one of {list(ACTIVATIONS)}")
        for previous, layer in zip(self.layers, self.layers[1:]):
            if layer.in_channels != previous.out_channels:
                raise ValueError(
                    f"Channel mismatch: {previous.out_channels} -> {layer.in_channels}"
                )
        self.skips = [tuple(int(i) for i in skip) for skip in self.skips]
        channels = [self.layers[0].in_channels] + [layer.out_channels for layer in self.layers]
        for source, destination in self.skips:
            if not 0 <= source < destination <= len(self.layers):
                raise ValueError(f"Invalid skip ({source}, {destination})")
            if channels[source] != channels[destination]:
                raise ValueError(
                    f"Skip ({source}, {destination}) joins {channels[source]} and {channels[destination]} channels"
                )

    @property
    def in_channels(self):
        return self.layers[0].in_channels

    @property
    def out_channels(self):
        return self.layers[-1].out_channels

    def parameters(self):
        return [layer.weights for layer in self.layers]

    def set_parameters(self, params):
        for layer, weights in zip(self.layers, params):
            layer.weights = weights

    def n_parameters(self):
        return int(sum(w.size for w in self.parameters()))

    def flat_parameters(self):
        return np.concatenate([w.ravel() for w in self.parameters()])

    def load_flat(self, flat):
        """Restore weights from a flat vector (as written by flat_parameters)."""
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_parameters():
            raise ValueError(f"Expected {self.n_parameters()} parameters, got {flat.size}")
        offset = 0
        for layer in self.layers:
            size = layer.weights.size
            layer.weights = flat[offset:offset + size].reshape(layer.weights.shape).copy()
            offset += size

    def receptive_radius(self):
        """Per-axis reach of one output sample into the input (same padding)."""
        return tuple(sum(layer.reach[axis] // 2 for layer in self.layers) for axis in range(3))


def net_forward(net, x, keep_cache=False):
    """
    Evaluate the network.

    Parameters
    ----------
    net : Network
    x : float ndarray
        (in_channels, D0, D1, D2)
    keep_cache : bool
        Also return intermediate activations for net_backward

    Returns
    -------
    ndarray, or (ndarray, dict) when keep_cache is set
    """
    outputs = [x]
    pre_activations = []
    incoming = {}
    for source, destination in net.skips:
        incoming.setdefault(destination, []).append(source)

    for index, (layer, tag) in enumerate(zip(net.layers, net.activations), start=1):
        z = conv_forward(layer, outputs[-1])
        value = ACTIVATIONS[tag][0](z)
        for source in incoming.get(index, []):
            value = value + outputs[source]
        pre_activations.append(z)
        outputs.append(value)

    if keep_cache:
        return outputs[-1], {'outputs': outputs, 'pre_activations': pre_activations}
    return outputs[-1]


def net_backward(net, x, loss_grad, cache=None):
    """
    Reverse-mode gradients of net_forward.

    Parameters
    ----------
    net : Network
    x : float ndarray
        Network input
    loss_grad : float ndarray
        Gradient of the loss with respect to the network output
    cache : dict, optional
        From net_forward(..., keep_cache=True)

    Returns
    -------
    tuple
        (list of weight gradients, input gradient)
    """
    if cache is None:
        _, cache = net_forward(net, x, keep_cache=True)
    outputs = cache['outputs']
    pre_activations = cache['pre_activations']

    grads = [np.zeros_like(value) for value in outputs]
    grads[-1] = grads[-1] + loss_grad
    outgoing = {}
    for source, destination in net.skips:
        outgoing.setdefault(destination, []).append(source)

    weight_grads = [None] * len(net.layers)
    for index in range(len(net.layers), 0, -1):
        grad = grads[index]
        for source in outgoing.get(index, []):
            grads[source] += grad
        layer = net.layers[index - 1]
        grad_z = grad * ACTIVATIONS[net.activations[index - 1]][1](pre_activations[index - 1])
        weight_grads[index - 1], grad_in = conv_backward(layer, outputs[index - 1], grad_z)
        grads[index - 1] += grad_in

    return weight_grads, grads[0]
