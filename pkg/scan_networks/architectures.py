"""
SPARK Network Architectures
===========================

Fixed layouts of the correction networks. Both take the 2C packed
(real, imaginary) coil channels and emit the residual estimate for one
coil.

net2d: 6 layers of 3x3 convolutions, skip from the input to layer 3.
net3d: 9 layers of 3x3x3 convolutions, skips input -> 3 and 3 -> 6.
"""

import numpy as np

from .layers import ConvLayer, Network
import config


def _build(channels, kernel, activation, skips, rng):
    layers = [
        ConvLayer.initialize(c_in, c_out, kernel, rng)
        for c_in, c_out in zip(channels[:-1], channels[1:])
    ]
    activations = [activation] * (len(layers) - 1) + ['identity']
    return Network(layers=layers, activations=activations, skips=skips)


def net2d(n_coils, hidden=None, seed=None, n_outputs=2, activation='relu'):
    """
    Six-layer 2D correction network.

    2C -> H -> H -> 2C (+ input) -> H -> H -> n_outputs

    Parameters
    ----------
    n_coils : int
        Coils in the packed input
    hidden : int, optional
        Hidden channel width
    seed : int or numpy SeedSequence, optional
        Initialization seed
    n_outputs : int
        2 for joint real/imag, 1 for the split variant

    Returns
    -------
    Network
    """
    if hidden is None:
        hidden = config.SPARK_HIDDEN_2D
    rng = np.random.default_rng(seed)
    io = 2 * n_coils
    channels = [io, hidden, hidden, io, hidden, hidden, n_outputs]
    return _build(channels, (3, 3, 1), activation, [(0, 3)], rng)


def net3d(n_coils, hidden=None, seed=None, n_outputs=2, activation='custom_nl'):
    """
    Nine-layer 3D correction network.

    2C -> H -> H -> 2C (+ input) -> H -> H -> 2C (+ layer 3) -> H -> H -> n_outputs

    Returns
    -------
    Network
    """
    if hidden is None:
        hidden = config.SPARK_HIDDEN_3D
    rng = np.random.default_rng(seed)
    io = 2 * n_coils
    channels = [io, hidden, hidden, io, hidden, hidden, io, hidden, hidden, n_outputs]
    return _build(channels, (3, 3, 3), activation, [(0, 3), (3, 6)], rng)


ARCHITECTURES = {
    'net2d': net2d,
    'net3d': net3d,
}


def build_network(arch, n_coils, hidden=None, seed=None, n_outputs=2):
    """Look up and build an architecture by name."""
    if arch not in ARCHITECTURES:
        raise ValueError(f"Unknown architecture '{arch}', expected one of {list(ARCHITECTURES)}")
    return ARCHITECTURES[arch](n_coils, hidden=hidden, seed=seed, n_outputs=n_outputs)
