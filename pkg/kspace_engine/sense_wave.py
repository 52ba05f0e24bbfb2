"""
Generalized SENSE and Wave Encoding
===================================

The encoding operator E (coil sensitivities, readout oversampling,
optional wave PSF, Fourier encoding, sampling mask), its exact adjoint,
and a conjugate-gradient least-squares solver on the normal equations.

Forward model per coil c:

    y_c = M · F_yz · Psf · F_x · Pad · (S_c · x)

Slice groups replace F_yz by a phase-only transform and sum the
CAIPI-modulated slice contributions into one collapsed k-space.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .tensors import fftc, ifftc, crop_center, pad_center
from .sampling import SamplingMask
import config

logger = logging.getLogger(__name__)


# ========================================
# WAVE PSF
# ========================================

@dataclass
class WavePsf:
    """Pure-phase wave PSF over (oversampled kx, y, z)."""

    phase: np.ndarray
    oversample: int = config.WAVE_OVERSAMPLE

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=complex)
        if self.phase.ndim == 2:
            self.phase = self.phase[:, :, None]
        if self.oversample < 1:
            raise ValueError(f"Oversample must be >= 1, got {self.oversample}")
        if self.phase.shape[0] % self.oversample:
            raise ValueError(
                f"PSF readout extent {self.phase.shape[0]} is not a multiple of oversample {self.oversample}"
            )
        deviation = np.max(np.abs(np.abs(self.phase) - 1.0)) if self.phase.size else 0.0
        if deviation > 1e-12:
            raise ValueError(f"Wave PSF must be pure phase, got |psf| deviation {deviation:.3e}")

    def slices(self, indices):
        """PSF restricted to a subset of partitions."""
        return WavePsf(phase=self.phase[:, :, list(indices)], oversample=self.oversample)


def make_wave_psf(m, n, p=1, cycles=None, amplitude_rad=None, oversample=None):
    """
    Synthetic corkscrew wave PSF.

        psf(kx, y, z) = exp(i·A·(sin(2π·c·kx/K)·ŷ + cos(2π·c·kx/K)·ẑ))

    with ŷ, ẑ in [−1/2, 1/2) centered on n // 2, K = oversample·m. The z
    term is dropped when p = 1.

    Parameters
    ----------
    m, n, p : int
        Image matrix (readout, phase, partition)
    cycles : float, optional
        Sinusoidal cycles across the readout
    amplitude_rad : float, optional
        Peak phase at the FOV edge
    oversample : int, optional
        Readout oversampling factor

    Returns
    -------
    WavePsf
    """
    if cycles is None:
        cycles = config.WAVE_CYCLES
    if amplitude_rad is None:
        amplitude_rad = config.WAVE_AMPLITUDE_RAD
    if oversample is None:
        oversample = config.WAVE_OVERSAMPLE

    K = oversample * m
    kx = np.arange(K)[:, None, None]
    y = ((np.arange(n) - n // 2) / n)[None, :, None]
    z = ((np.arange(p) - p // 2) / p)[None, None, :]

    angle = 2 * np.pi * cycles * kx / K
    phase = amplitude_rad * np.sin(angle) * y
    if p > 1:
        phase = phase + amplitude_rad * np.cos(angle) * z
    phase = np.broadcast_to(phase, (K, n, p))
    return WavePsf(phase=np.exp(1j * phase), oversample=oversample)


def caipi_ramps(n_slices, n_pe, shift):
    """
    Per-slice CAIPI phase ramps over ky: exp(−2πi·s·shift·(ky − N//2)/S).

    Returns
    -------
    complex ndarray
        (S, N)
    """
    ky = np.arange(n_pe) - n_pe // 2
    s = np.arange(n_slices)[:, None]
    return np.exp(-2j * np.pi * s * shift * ky[None, :] / n_slices)


# ========================================
# ENCODING MODEL
# ========================================

@dataclass
class EncodingModel:
    """
    The operator E mapping an image to multi-coil k-space.

    Attributes
    ----------
    maps : complex ndarray
        (M, N, P, C) sensitivities; for slice groups P indexes the slices
    mask : SamplingMask or None
        None samples the full grid
    psf : WavePsf or None
        None for cartesian encoding
    oversample : int
        Readout oversampling of the k-space grid
    slice_ramps : complex ndarray or None
        (S, N) CAIPI ramps; present only for slice-group models
    """

    maps: np.ndarray
    mask: SamplingMask = None
    psf: WavePsf = None
    oversample: int = 1
    slice_ramps: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=complex)
        if self.maps.ndim == 3:
            self.maps = self.maps[:, :, None, :]
        if self.maps.ndim != 4:
            raise ValueError(f"Maps must be (M, N, P, C), got shape {self.maps.shape}")
        if self.psf is not None:
            self.oversample = self.psf.oversample
            expected = (self.oversample * self.maps.shape[0],) + self.maps.shape[1:3]
            if self.psf.phase.shape != expected:
                raise ValueError(f"PSF dims {self.psf.phase.shape} must equal {expected}")
        if self.slice_ramps is not None:
            expected = (self.maps.shape[2], self.maps.shape[1])
            if self.slice_ramps.shape != expected:
                raise ValueError(f"Slice ramps must have shape {expected}, got {self.slice_ramps.shape}")
        if self.mask is not None and self.mask.shape != self.kspace_shape[1:3]:
            raise ValueError(f"Mask {self.mask.shape} does not match k-space grid {self.kspace_shape[1:3]}")

    @property
    def image_dims(self):
        return self.maps.shape[:3]

    @property
    def n_coils(self):
        return self.maps.shape[3]

    @property
    def is_slice_group(self):
        return self.slice_ramps is not None

    @property
    def kspace_shape(self):
        M, N, P, C = self.maps.shape
        partitions = 1 if self.is_slice_group else P
        return (self.oversample * M, N, partitions, C)

    def full(self):
        """Copy of the model sampling every k-space location."""
        return replace(self, mask=None)


def _mask_weights(E):
    if E.mask is None:
        return None
    return E.mask.grid[None, :, :, None]


def forward(E, x):
    """
    Apply E to an image.

    Parameters
    ----------
    E : EncodingModel
    x : complex ndarray
        (M, N, P) image; for slice groups (M, N, S)

    Returns
    -------
    complex ndarray
        (oversample·M, N, P or 1, C) k-space
    """
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape != E.image_dims:
        raise ValueError(f"Image dims {x.shape} do not match model dims {E.image_dims}")

    K = E.oversample * E.image_dims[0]
    coils = x[..., None] * E.maps
    hybrid = fftc(pad_center(coils, (K,)), 'readout')
    if E.psf is not None:
        hybrid = hybrid * E.psf.phase[..., None]

    if E.is_slice_group:
        ksp = fftc(hybrid, 'phase')
        ksp = np.sum(ksp * E.slice_ramps.T[None, :, :, None], axis=2, keepdims=True)
    else:
        ksp = fftc(hybrid, ('phase', 'partition'))

    weights = _mask_weights(E)
    return ksp if weights is None else ksp * weights


def adjoint(E, y):
    """
    Apply Eᴴ to k-space.

    Parameters
    ----------
    E : EncodingModel
    y : complex ndarray
        k-space of shape E.kspace_shape

    Returns
    -------
    complex ndarray
        Image of shape E.image_dims
    """
    if y.shape != E.kspace_shape:
        raise ValueError(f"k-space dims {y.shape} do not match model {E.kspace_shape}")
    weights = _mask_weights(E)
    if weights is not None:
        y = y * weights

    if E.is_slice_group:
        spread = y * np.conj(E.slice_ramps.T)[None, :, :, None]
        hybrid = ifftc(spread, 'phase')
    else:
        hybrid = ifftc(y, ('phase', 'partition'))

    if E.psf is not None:
        hybrid = hybrid * np.conj(E.psf.phase)[..., None]
    coils = crop_center(ifftc(hybrid, 'readout'), (E.image_dims[0],))
    return np.sum(np.conj(E.maps) * coils, axis=-1)


def normal(E, x):
    """EᴴE x."""
    return adjoint(E, forward(E, x))


# ========================================
# CONJUGATE GRADIENT
# ========================================

@dataclass
class CgResult:
    """Solution plus per-iteration residual histories."""

    x: np.ndarray
    residuals: list
    data_residuals: list
    iterations: int
    converged: bool


def cg_solve(E, y_acq, max_iter=None, tol=None):
    """
    Least squares min ‖E x − y‖ by CG on EᴴE x = Eᴴy from x = 0.

    Stops when ‖Eᴴ(y − E x)‖ / ‖Eᴴy‖ ≤ tol or after max_iter iterations.

    Parameters
    ----------
    E : EncodingModel
    y_acq : complex ndarray
    max_iter : int, optional
    tol : float, optional

    Returns
    -------
    CgResult
        residuals are the normal-equation relative residuals;
        data_residuals are ‖y − E x‖ / ‖y‖, non-increasing
    """
    if max_iter is None:
        max_iter = config.SENSE_MAX_ITER
    if tol is None:
        tol = config.SENSE_TOL
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    x = np.zeros(E.image_dims, dtype=complex)
    r = adjoint(E, y_acq)
    rhs_norm = np.linalg.norm(r)
    y_norm = np.linalg.norm(y_acq)
    if rhs_norm == 0 or y_norm == 0:
        return CgResult(x=x, residuals=[0.0], data_residuals=[0.0], iterations=0, converged=True)

    data = y_acq.copy()
    if E.mask is not None:
        data = data * _mask_weights(E)
    p = r.copy()
    rs = np.real(np.vdot(r, r))
    residuals = [1.0]
    data_residuals = [np.linalg.norm(data) / y_norm]
    converged = False

    iteration = 0
    for iteration in range(1, max_iter + 1):
        Ep = forward(E, p)
        q = adjoint(E, Ep)
        alpha = rs / np.real(np.vdot(p, q))
        x += alpha * p
        r -= alpha * q
        data -= alpha * Ep

        rs_new = np.real(np.vdot(r, r))
        residuals.append(np.sqrt(rs_new) / rhs_norm)
        data_residuals.append(np.linalg.norm(data) / y_norm)
        if residuals[-1] <= tol:
            converged = True
            break
        p = r + (rs_new / rs) * p
        rs = rs_new

    logger.debug("CG stopped after %d iterations, relative residual %.3e",
                 iteration, residuals[-1])
    return CgResult(x=x, residuals=residuals, data_residuals=data_residuals,
                    iterations=iteration, converged=converged)


def recon_to_kspace(x_est, E_full):
    """
    Model-based complete k-space estimate y_est = E_full x_est.

    E_full is normally E.full(), the model without undersampling.
    """
    if E_full.mask is not None:
        E_full = E_full.full()
    return forward(E_full, x_est)


def deconvolve_wave(ksp_wave, psf):
    """
    Convert wave-encoded k-space to cartesian (oversampled) k-space.

    Transforms to the hybrid (kx, y, z) space, removes the PSF with
    conj(psf), and transforms back.

    Parameters
    ----------
    ksp_wave : complex ndarray
        (K, N, P, C) fully sampled wave k-space
    psf : WavePsf

    Returns
    -------
    complex ndarray
    """
    if ksp_wave.shape[:3] != psf.phase.shape:
        raise ValueError(f"k-space dims {ksp_wave.shape[:3]} do not match PSF {psf.phase.shape}")
    hybrid = ifftc(ksp_wave, ('phase', 'partition'))
    return fftc(hybrid * np.conj(psf.phase)[..., None], ('phase', 'partition'))


def slice_group_model(maps_slices, psf_slices=None, mask_2d=None, caipi_shift=None,
                      oversample=None):
    """
    Joint encoding of slices collapsed by partition undersampling.

    Parameters
    ----------
    maps_slices : complex ndarray
        (M, N, S, C) sensitivities, one partition per slice
    psf_slices : WavePsf, optional
        (K, N, S) per-slice PSF; None for cartesian encoding
    mask_2d : SamplingMask, optional
        (N, 1) phase-encode pattern of the collapsed k-space
    caipi_shift : int, optional
        CAIPI shift between adjacent slices
    oversample : int, optional
        Readout oversampling when psf_slices is None

    Returns
    -------
    EncodingModel
    """
    if caipi_shift is None:
        caipi_shift = config.DEFAULT_CAIPI_SHIFT
    maps_slices = np.asarray(maps_slices, dtype=complex)
    n_pe, n_slices = maps_slices.shape[1], maps_slices.shape[2]
    ramps = caipi_ramps(n_slices, n_pe, caipi_shift)
    if psf_slices is not None:
        oversample = psf_slices.oversample
    return EncodingModel(
        maps=maps_slices,
        mask=mask_2d,
        psf=psf_slices,
        oversample=oversample or 1,
        slice_ramps=ramps,
    )
