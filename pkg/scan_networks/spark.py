"""
SPARK Correction
================

Scan-specific k-space error correction. For each coil c a network
f_c is fit on the ACS so that

    f_c(y_est) ≈ A[y_acq_c − y_est_c]

and the learned correction is then added to the whole k-space of the
coil: y_corrected_c = y_est_c + f_c(y_est).

The network sees all coils packed as (real, imaginary) channel pairs,
normalized by one shared scale = max |y_est|.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .architectures import ARCHITECTURES, build_network
from .layers import net_forward, net_backward
from .optim import AdamState, adam_step, mse_loss
import config

logger = logging.getLogger(__name__)


@dataclass
class SparkConfig:
    """Training settings shared by every coil fit."""

    arch: str = 'net2d'
    epochs: int = config.SPARK_EPOCHS
    lr: float = config.SPARK_LR
    hidden_channels: int = None
    seed: int = config.DEFAULT_SEED
    final_acs_replace: bool = config.SPARK_FINAL_ACS_REPLACE
    split_real_imag: bool = config.SPARK_SPLIT_REAL_IMAG
    n_jobs: int = config.DEFAULT_N_JOBS

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"Unknown architecture '{self.arch}', expected one of {list(ARCHITECTURES)}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.hidden_channels is None:
            self.hidden_channels = (
                config.SPARK_HIDDEN_3D if self.arch == 'net3d' else config.SPARK_HIDDEN_2D
            )


@dataclass
class AcsProjector:
    """
    The ACS projection A as inclusive per-axis bounds.

    Bounds cover (readout, phase, partition).
    """

    bounds: tuple

    def __post_init__(self):
        self.bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        if len(self.bounds) != 3:
            raise ValueError(f"ACS bounds need (readout, phase, partition) ranges, got {self.bounds}")
        for lo, hi in self.bounds:
            if lo < 0 or hi < lo:
                raise ValueError(f"ACS bounds are empty or negative: {self.bounds}")

    @classmethod
    def from_mask(cls, mask, n_readout):
        """Projector over the mask's ACS block and the full readout."""
        if mask.acs_bounds is None:
            raise ValueError("Mask declares no ACS block")
        return cls(bounds=((0, n_readout - 1),) + tuple(mask.acs_bounds))

    @property
    def shape(self):
        return tuple(hi - lo + 1 for lo, hi in self.bounds)

    def slices(self):
        return tuple(slice(lo, hi + 1) for lo, hi in self.bounds)

    def check(self, grid_shape):
        for (lo, hi), n in zip(self.bounds, grid_shape):
            if hi >= n:
                raise ValueError(f"ACS bounds {self.bounds} exceed k-space grid {grid_shape}")

    def project(self, ksp):
        """A[y]: the ACS block of k-space."""
        return ksp[self.slices()]


@dataclass
class CorrectionModel:
    """Trained correction of one coil: one joint network or a real/imag pair."""

    coil_index: int
    networks: list
    scale: float

    @property
    def network(self):
        return self.networks[0]

    @property
    def in_channels(self):
        return self.networks[0].in_channels


@dataclass
class SparkResult:
    """Corrected k-space with the per-coil models and loss curves."""

    kspace: np.ndarray
    models: list
    loss_histories: list
    scale: float
    corrections: np.ndarray = field(default=None, repr=False)


def shared_scale(y_est):
    """Max coil k-space magnitude (1 for all-zero input)."""
    peak = float(np.max(np.abs(y_est))) if y_est.size else 0.0
    return peak if peak > 0 else 1.0


def pack_input(y_est, scale):
    """
    Real network input from complex k-space.

    Channel 2c = Re(y_c)/scale, channel 2c+1 = Im(y_c)/scale.

    Parameters
    ----------
    y_est : complex ndarray
        (readout, phase, partition, coil)
    scale : float

    Returns
    -------
    float ndarray
        (2C, readout, phase, partition)
    """
    coils_first = np.moveaxis(y_est, -1, 0) / scale
    packed = np.stack([coils_first.real, coils_first.imag], axis=1)
    return packed.reshape((-1,) + y_est.shape[:3])


def unpack(packed, scale):
    """Inverse of pack_input."""
    pairs = packed.reshape((-1, 2) + packed.shape[1:])
    coils = (pairs[:, 0] + 1j * pairs[:, 1]) * scale
    return np.moveaxis(coils, 0, -1)


def training_window(acs, grid_shape, radius):
    """
    Crop around the ACS wide enough that every ACS output sees its full
    receptive field.

    Returns
    -------
    tuple
        (crop slices, ACS slices relative to the crop)
    """
    crop, inner = [], []
    for (lo, hi), n, r in zip(acs.bounds, grid_shape, radius):
        start, stop = max(lo - r, 0), min(hi + r + 1, n)
        crop.append(slice(start, stop))
        inner.append(slice(lo - start, hi - start + 1))
    return tuple(crop), tuple(inner)


def _network_seeds(seed, coil, count):
    return [np.random.SeedSequence([int(seed) % 2 ** 64, int(coil), k]) for k in range(count)]


def _fit(network, inputs, target, inner, cfg):
    """ADAM fit of one network on one training pair; returns the loss history."""
    state = AdamState(lr=cfg.lr)
    history = []
    window = (slice(None),) + inner
    for _ in range(cfg.epochs):
        out, cache = net_forward(network, inputs, keep_cache=True)
        loss, grad = mse_loss(out[window], target)
        history.append(loss)
        loss_grad = np.zeros_like(out)
        loss_grad[window] = grad
        weight_grads, _ = net_backward(network, inputs, loss_grad, cache)
        params, state = adam_step(state, network.parameters(), weight_grads)
        network.set_parameters(params)
    out = net_forward(network, inputs)
    history.append(mse_loss(out[window], target)[0])
    return history


def train_coil_model(y_acq, y_est, acs, coil, cfg, scale=None):
    """
    Fit the correction network of one coil on the ACS residual.

    Parameters
    ----------
    y_acq : complex ndarray
        Acquired k-space (ACS entries must be valid)
    y_est : complex ndarray
        Full-grid estimate from the input reconstruction
    acs : AcsProjector
    coil : int
    cfg : SparkConfig
    scale : float, optional
        Shared normalization; max |y_est| by default

    Returns
    -------
    tuple
        (CorrectionModel, loss history with epochs + 1 entries)
    """
    acs.check(y_est.shape[:3])
    if scale is None:
        scale = shared_scale(y_est)

    residual = acs.project(y_acq[..., coil] - y_est[..., coil]) / scale
    if not np.all(np.isfinite(residual)):
        raise ValueError(f"ACS residual of coil {coil} contains non-finite values")
    target = np.stack([residual.real, residual.imag], axis=0)

    n_coils = y_est.shape[-1]
    n_nets = 2 if cfg.split_real_imag else 1
    seeds = _network_seeds(cfg.seed, coil, n_nets)
    networks = [
        build_network(cfg.arch, n_coils, cfg.hidden_channels, seed, n_outputs=2 // n_nets)
        for seed in seeds
    ]

    crop, inner = training_window(acs, y_est.shape[:3], networks[0].receptive_radius())
    inputs = pack_input(y_est[crop], scale)

    if n_nets == 1:
        history = _fit(networks[0], inputs, target, inner, cfg)
    else:
        curves = [
            _fit(network, inputs, target[part:part + 1], inner, cfg)
            for part, network in enumerate(networks)
        ]
        history = list(np.mean(curves, axis=0))

    logger.debug("coil %d: ACS loss %.3e -> %.3e", coil, history[0], history[-1])
    return CorrectionModel(coil_index=coil, networks=networks, scale=scale), history


def estimate_correction(model, y_est):
    """f_c(y_est) over the whole grid, in k-space units."""
    inputs = pack_input(y_est, model.scale)
    if inputs.shape[0] != model.in_channels:
        raise ValueError(
            f"Model expects {model.in_channels} input channels, got {inputs.shape[0]}"
        )
    outputs = np.concatenate([net_forward(net, inputs) for net in model.networks], axis=0)
    return (outputs[0] + 1j * outputs[1]) * model.scale


def apply_correction(model, y_est):
    """
    Corrected k-space of the model's coil: y_est_c + f_c(y_est).

    Returns
    -------
    complex ndarray
        (readout, phase, partition)
    """
    return y_est[..., model.coil_index] + estimate_correction(model, y_est)


def spark_correct(y_acq, y_est, acs, cfg=None):
    """
    Train and apply one correction model per coil.

    Parameters
    ----------
    y_acq : complex ndarray
        Acquired k-space; never modified
    y_est : complex ndarray
        Input reconstruction on the full grid
    acs : AcsProjector
    cfg : SparkConfig, optional

    Returns
    -------
    SparkResult
    """
    if cfg is None:
        cfg = SparkConfig()
    if y_acq.shape != y_est.shape:
        raise ValueError(f"y_acq {y_acq.shape} and y_est {y_est.shape} differ in shape")

    scale = shared_scale(y_est)
    n_coils = y_est.shape[-1]

    def fit_coil(coil):
        model, history = train_coil_model(y_acq, y_est, acs, coil, cfg, scale)
        return model, history, estimate_correction(model, y_est)

    fits = Parallel(n_jobs=cfg.n_jobs, prefer='threads')(
        delayed(fit_coil)(coil) for coil in range(n_coils)
    )

    corrections = np.stack([correction for _, _, correction in fits], axis=-1)
    corrected = y_est + corrections
    if cfg.final_acs_replace:
        block = acs.slices()
        corrected[block] = y_acq[block]

    logger.info("SPARK corrected %d coils (scale %.3e)", n_coils, scale)
    return SparkResult(
        kspace=corrected,
        models=[model for model, _, _ in fits],
        loss_histories=[history for _, history, _ in fits],
        scale=scale,
        corrections=corrections,
    )


def models_to_array(models):
    """
    Stack trained weights for a `model` container.

    Returns
    -------
    float ndarray
        (n_coils, n_networks, n_parameters + 1); the last entry of every
        row is the shared scale
    """
    rows = [
        [np.append(net.flat_parameters(), model.scale) for net in model.networks]
        for model in sorted(models, key=lambda m: m.coil_index)
    ]
    return np.asarray(rows, dtype=float)


def models_from_array(array, cfg, n_coils=None):
    """
    Rebuild CorrectionModels from models_to_array output.

    Raises
    ------
    ValueError
        If the parameter count does not match the configured architecture
    """
    array = np.asarray(array, dtype=float)
    if array.ndim != 3:
        raise ValueError(f"Model array must be (coils, networks, parameters), got shape {array.shape}")
    if n_coils is None:
        n_coils = array.shape[0]
    n_nets = array.shape[1]
    models = []
    for coil in range(array.shape[0]):
        networks = []
        for row in array[coil]:
            net = build_network(cfg.arch, n_coils, cfg.hidden_channels, 0, n_outputs=2 // n_nets)
            if row.size - 1 != net.n_parameters():
                raise ValueError(
                    f"Model of coil {coil} holds {row.size - 1} parameters, "
                    f"{cfg.arch} with {cfg.hidden_channels} hidden channels needs {net.n_parameters()}"
                )
            net.load_flat(row[:-1])
            networks.append(net)
        models.append(CorrectionModel(coil_index=coil, networks=networks, scale=float(array[coil, 0, -1])))
    return models
