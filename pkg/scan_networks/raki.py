"""
RAKI Baseline
=============

Scan-specific nonlinear k-space interpolation. A small network of valid
(truncating) convolutions per coil is trained on the ACS to predict the
R − 1 missing phase lines of every lattice cell from the acquired lines.
"""

import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from kspace_engine.sampling import apply_mask
from .layers import ConvLayer, Network, net_forward, net_backward
from .optim import AdamState, adam_step, mse_loss
from .spark import pack_input, shared_scale
import config

logger = logging.getLogger(__name__)


@dataclass
class RakiConfig:
    """Layer widths, kernels and training settings of the RAKI networks."""

    channels: tuple = config.RAKI_CHANNELS
    kernels: tuple = config.RAKI_KERNELS
    epochs: int = config.RAKI_EPOCHS
    lr: float = config.RAKI_LR
    seed: int = config.DEFAULT_SEED
    n_jobs: int = config.DEFAULT_N_JOBS

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.kernels = tuple(tuple(int(k) for k in kernel) for kernel in self.kernels)
        if len(self.kernels) != len(self.channels) + 1:
            raise ValueError(
                f"Need {len(self.channels) + 1} kernels for {len(self.channels)} hidden layers, got {len(self.kernels)}"
            )
        if self.kernels[0][1] != 2 or any(k[1] != 1 for k in self.kernels[1:]):
            raise ValueError("Only the first layer may span phase lines (2 taps, R apart)")
        if self.epochs < 1 or self.lr <= 0:
            raise ValueError(f"epochs must be >= 1 and lr > 0, got {self.epochs}, {self.lr}")


def build_raki_network(n_coils, R, cfg, seed):
    """2C -> channels... -> 2(R − 1), ReLU between layers, valid padding."""
    rng = np.random.default_rng(seed)
    widths = [2 * n_coils] + list(cfg.channels) + [2 * (R - 1)]
    layers = []
    for index, kernel in enumerate(cfg.kernels):
        dilation = (1, R, 1) if index == 0 else (1, 1, 1)
        layers.append(ConvLayer.initialize(widths[index], widths[index + 1], kernel, rng,
                                           padding='valid', dilation=dilation))
    activations = ['relu'] * (len(layers) - 1) + ['identity']
    return Network(layers=layers, activations=activations)


def readout_reach(cfg):
    """Total readout samples lost to the valid convolutions."""
    return sum(kernel[0] - 1 for kernel in cfg.kernels)


def readout_margins(cfg):
    """(leading, trailing) readout samples lost; the trailing side takes the odd one."""
    reach = readout_reach(cfg)
    return reach // 2, reach - reach // 2


def _targets(acs_coil, R, margin, out_shape):
    """Missing-line targets of one coil arranged as the network output."""
    M_out, N_out, P_out = out_shape
    channels = []
    for t in range(1, R):
        block = acs_coil[margin:margin + M_out, t:t + N_out, :P_out]
        channels.extend([block.real, block.imag])
    return np.stack(channels, axis=0)


def train_raki_coil(acs_packed, acs_coil, R, coil, cfg):
    """Fit the RAKI network of one coil; returns (network, loss history)."""
    seed = np.random.SeedSequence([int(cfg.seed) % 2 ** 64, int(coil)])
    network = build_raki_network(acs_packed.shape[0] // 2, R, cfg, seed)
    margin, _ = readout_margins(cfg)

    out = net_forward(network, acs_packed)
    target = _targets(acs_coil, R, margin, out.shape[1:])

    state = AdamState(lr=cfg.lr)
    history = []
    for _ in range(cfg.epochs):
        out, cache = net_forward(network, acs_packed, keep_cache=True)
        loss, grad = mse_loss(out, target)
        history.append(loss)
        weight_grads, _ = net_backward(network, acs_packed, grad, cache)
        params, state = adam_step(state, network.parameters(), weight_grads)
        network.set_parameters(params)
    history.append(mse_loss(net_forward(network, acs_packed), target)[0])
    logger.debug("RAKI coil %d: loss %.3e -> %.3e", coil, history[0], history[-1])
    return network, history


def raki_reconstruct(ksp_under, mask, acs_bounds=None, cfg=None):
    """
    Fill missing phase lines with per-coil RAKI networks.

    Parameters
    ----------
    ksp_under : complex ndarray
        (readout, phase, partition, coil) zero-filled k-space
    mask : SamplingMask
        Uniform 1D mask with an ACS block
    acs_bounds : tuple, optional
        Defaults to the mask's ACS block
    cfg : RakiConfig, optional

    Returns
    -------
    complex ndarray
        Acquired entries unchanged, missing entries predicted

    Raises
    ------
    ValueError
        For 2D acceleration or an ACS smaller than the receptive field
    """
    if cfg is None:
        cfg = RakiConfig()
    R, R_pa = mask.accel
    if R_pa != 1:
        raise ValueError(f"RAKI supports uniform 1D acceleration only, got {mask.accel}")
    if R == 1:
        return ksp_under.copy()
    acs_bounds = acs_bounds or mask.acs_bounds
    if acs_bounds is None:
        raise ValueError("RAKI needs an ACS block")

    (pe_lo, pe_hi), (pa_lo, pa_hi) = acs_bounds
    acs = ksp_under[:, pe_lo:pe_hi + 1, pa_lo:pa_hi + 1, :]
    reach = readout_reach(cfg)
    if acs.shape[0] <= reach or acs.shape[1] <= R:
        raise ValueError(
            f"ACS {acs.shape[:2]} is smaller than the RAKI receptive field ({reach + 1}, {R + 1})"
        )

    scale = shared_scale(ksp_under)
    acs_packed = pack_input(acs, scale)
    n_coils = ksp_under.shape[-1]

    lattice = mask.lattice_only()
    source = pack_input(apply_mask(ksp_under, lattice), scale)
    leading, trailing = readout_margins(cfg)
    padded = np.pad(source, [(0, 0), (leading, trailing), (0, R), (0, 0)])

    def fit_coil(coil):
        network, _ = train_raki_coil(acs_packed, acs[..., coil] / scale, R, coil, cfg)
        return net_forward(network, padded)

    predictions = Parallel(n_jobs=cfg.n_jobs, prefer='threads')(
        delayed(fit_coil)(coil) for coil in range(n_coils)
    )

    out = ksp_under.copy()
    n_pe = ksp_under.shape[1]
    anchors = np.arange(0, n_pe, R)
    missing = ~mask.grid
    for coil, predicted in enumerate(predictions):
        for t in range(1, R):
            rows = anchors + t
            keep = rows < n_pe
            values = (predicted[2 * t - 2] + 1j * predicted[2 * t - 1])[:, anchors[keep]] * scale
            gaps = missing[rows[keep]][None, :, :]
            current = out[:, rows[keep], :, coil]
            out[:, rows[keep], :, coil] = np.where(gaps, values, current)

    logger.info("RAKI filled %d coils at R=%d", n_coils, R)
    return out
