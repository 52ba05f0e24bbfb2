"""
GRAPPA Interpolation
====================

Tikhonov-regularized GRAPPA calibration on the ACS, lattice-cell
interpolation of missing k-space for 2D and 3D undersampling, ACS
replacement, and conjugate-symmetric virtual coils (VC-GRAPPA).

One kernel per lattice cell predicts all R_pe·R_pa − 1 target offsets
for all coils at once:

    (AᴴA + λ·tr(AᴴA)/n·I) W = AᴴB

A holds source neighborhoods (columns ordered offset-major, coil-minor),
B the matching targets.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .sampling import SamplingMask, lattice_pattern, apply_mask
import config

logger = logging.getLogger(__name__)


@dataclass
class GrappaKernel:
    """
    Calibrated interpolation weights for one undersampling geometry.

    Attributes
    ----------
    accel : tuple
        (R_pe, R_pa)
    taps : tuple
        (k_read, k_pe, k_pa) source extents in acquired-sample units
    weights : complex ndarray
        (n_groups·n_src·C, n_tgt·C)
    lam : float
        Tikhonov weight in normalized-trace units
    n_coils : int
        Physical coil count
    virtual_offset : tuple or None
        Lattice shift of the virtual-coil sources; None for plain GRAPPA
    """

    accel: tuple
    taps: tuple
    weights: np.ndarray
    lam: float
    n_coils: int
    virtual_offset: tuple = None

    def __post_init__(self):
        sources, targets = kernel_offsets(self.accel, self.taps)
        groups = 1 if self.virtual_offset is None else 2
        expected = (groups * len(sources) * self.n_coils, len(targets) * self.n_coils)
        if self.weights.shape != expected:
            raise ValueError(f"Kernel weights must have shape {expected}, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("Kernel weights contain non-finite values")

    @property
    def source_offsets(self):
        return kernel_offsets(self.accel, self.taps)[0]

    @property
    def target_offsets(self):
        return kernel_offsets(self.accel, self.taps)[1]


def kernel_offsets(accel, taps):
    """
    Source and target offsets relative to a lattice anchor.

    Readout sources span -(k_read // 2)..k_read // 2 (k_read odd). Phase
    and partition sources sit on the acquired lattice at
    R·(j − (k − 1) // 2), j = 0..k−1. Targets are every non-anchor
    position of the lattice cell.

    Parameters
    ----------
    accel : tuple
        (R_pe, R_pa)
    taps : tuple
        (k_read, k_pe, k_pa)

    Returns
    -------
    tuple of int ndarray
        (sources (n_src, 3), targets (R_pe·R_pa − 1, 3))
    """
    r_pe, r_pa = (int(r) for r in accel)
    k_read, k_pe, k_pa = (int(k) for k in taps)
    if k_read < 1 or k_read % 2 == 0:
        raise ValueError(f"Readout taps must be a positive odd number, got {k_read}")
    if k_pe < 1 or k_pa < 1:
        raise ValueError(f"Phase/partition taps must be >= 1, got {taps}")
    if r_pe < 1 or r_pa < 1:
        raise ValueError(f"Acceleration must be >= 1, got {accel}")

    read = np.arange(k_read) - k_read // 2
    pe = r_pe * (np.arange(k_pe) - (k_pe - 1) // 2)
    pa = r_pa * (np.arange(k_pa) - (k_pa - 1) // 2)
    sources = np.array([(a, b, c) for b in pe for c in pa for a in read], dtype=int)

    targets = np.array(
        [(0, tp, tq) for tp in range(r_pe) for tq in range(r_pa) if (tp, tq) != (0, 0)],
        dtype=int,
    ).reshape(-1, 3)
    return sources, targets


# ========================================
# NEIGHBORHOOD GATHERING
# ========================================

def _windows(data, origin, counts, steps, offsets):
    """
    Stack data[origin + offset + step·k] for k < counts, per offset.

    Returns an array of shape counts + (n_offsets, C).
    """
    blocks = []
    for offset in offsets:
        index = tuple(
            slice(o + d, o + d + s * (n - 1) + 1, s)
            for o, d, n, s in zip(origin, offset, counts, steps)
        )
        blocks.append(data[index])
    return np.stack(blocks, axis=-2)


def _source_matrix(physical, virtual, origin, counts, steps, sources, virtual_offset):
    """Rows = anchors, columns = (group, offset, coil)."""
    n_rows = int(np.prod(counts))
    blocks = [_windows(physical, origin, counts, steps, sources).reshape(n_rows, -1)]
    if virtual is not None:
        shifted = sources + np.asarray(virtual_offset, dtype=int)
        blocks.append(_windows(virtual, origin, counts, steps, shifted).reshape(n_rows, -1))
    return np.concatenate(blocks, axis=1)


def _all_offsets(sources, targets, virtual_offset):
    offsets = [sources, targets, np.zeros((1, 3), dtype=int)]
    if virtual_offset is not None:
        offsets.append(sources + np.asarray(virtual_offset, dtype=int))
    return np.concatenate(offsets, axis=0)


def calibration_system(acs, accel, taps, n_coils=None, virtual_offset=None):
    """
    Build the calibration matrices A (sources) and B (targets).

    Every ACS position whose sources and targets all fall inside the ACS
    block contributes one equation.

    Parameters
    ----------
    acs : complex ndarray
        Fully sampled (readout, phase, partition, coil) block; for VC the
        virtual coils follow the physical ones
    accel, taps : tuple
        Kernel geometry
    n_coils : int, optional
        Physical coil count (defaults to all coils)
    virtual_offset : tuple, optional
        Lattice shift applied to the virtual-coil sources

    Returns
    -------
    tuple
        (A, B) complex matrices

    Raises
    ------
    ValueError
        If no equation fits inside the ACS
    """
    if acs.ndim != 4:
        raise ValueError(f"ACS must be 4D (readout, phase, partition, coil), got rank {acs.ndim}")
    if n_coils is None:
        n_coils = acs.shape[-1]
    physical = acs[..., :n_coils]
    virtual = acs[..., n_coils:] if virtual_offset is not None else None

    sources, targets = kernel_offsets(accel, taps)
    offsets = _all_offsets(sources, targets, virtual_offset)
    low = offsets.min(axis=0)
    high = offsets.max(axis=0)
    counts = tuple(int(n - (hi - lo)) for n, lo, hi in zip(acs.shape[:3], low, high))
    if any(c < 1 for c in counts):
        raise ValueError(
            f"ACS {acs.shape[:3]} is smaller than the kernel footprint {tuple(high - low + 1)}"
        )

    origin = tuple(int(-lo) for lo in low)
    steps = (1, 1, 1)
    A = _source_matrix(physical, virtual, origin, counts, steps, sources, virtual_offset)
    B = _windows(physical, origin, counts, steps, targets).reshape(int(np.prod(counts)), -1)
    return A, B


def solve_tikhonov(A, B, lam):
    """
    Normalized-trace Tikhonov least squares.

    Raises
    ------
    ValueError
        If lam = 0 and AᴴA is singular, or lam < 0
    """
    if lam < 0:
        raise ValueError(f"Tikhonov lambda must be >= 0, got {lam}")
    AHA = A.conj().T @ A
    AHB = A.conj().T @ B
    n = AHA.shape[0]

    if lam == 0:
        rank = np.linalg.matrix_rank(AHA, hermitian=True)
        if rank < n:
            raise ValueError(
                f"Calibration normal matrix is singular (rank {rank} < {n}) and lambda = 0"
            )
        return scipy.linalg.solve(AHA, AHB, assume_a='her')

    reg = lam * np.real(np.trace(AHA)) / n
    return scipy.linalg.solve(AHA + reg * np.eye(n), AHB, assume_a='her')


def calibrate(acs, accel, taps=None, lam=None, n_coils=None, virtual_offset=None):
    """
    Calibrate a GRAPPA kernel on a fully sampled ACS block.

    Parameters
    ----------
    acs : complex ndarray
        (readout, phase, partition, coil) calibration data
    accel : tuple
        (R_pe, R_pa)
    taps : tuple, optional
        (k_read, k_pe, k_pa); defaults from config
    lam : float, optional
        Tikhonov weight (normalized-trace units)
    n_coils : int, optional
        Physical coil count when acs carries virtual coils
    virtual_offset : tuple, optional
        Mirrored-lattice shift for VC calibration

    Returns
    -------
    GrappaKernel
    """
    accel = tuple(int(r) for r in accel)
    if taps is None:
        taps = config.GRAPPA_TAPS_3D if accel[1] > 1 else config.GRAPPA_TAPS_2D
    if lam is None:
        lam = config.GRAPPA_LAMBDA
    if n_coils is None:
        n_coils = acs.shape[-1] if virtual_offset is None else acs.shape[-1] // 2

    A, B = calibration_system(acs, accel, taps, n_coils, virtual_offset)
    weights = solve_tikhonov(A, B, lam)
    logger.debug("calibrated kernel R=%s taps=%s: %d equations, %d unknowns",
                 accel, tuple(taps), A.shape[0], A.shape[1])
    return GrappaKernel(
        accel=accel,
        taps=tuple(int(k) for k in taps),
        weights=weights,
        lam=float(lam),
        n_coils=n_coils,
        virtual_offset=None if virtual_offset is None else tuple(int(v) for v in virtual_offset),
    )


def interpolate(ksp_under, mask, kernel):
    """
    Fill missing lattice targets with the kernel's weighted sources.

    Sources outside the k-space grid read as zero. Acquired entries are
    never modified.

    Parameters
    ----------
    ksp_under : complex ndarray
        (readout, phase, partition, coil) zero-filled k-space; for VC
        kernels the mirrored coils follow the physical ones
    mask : SamplingMask
        Acquisition pattern on the physical grid
    kernel : GrappaKernel

    Returns
    -------
    complex ndarray
        Physical-coil k-space
    """
    if isinstance(mask, SamplingMask) and mask.accel != kernel.accel:
        raise ValueError(f"Mask acceleration {mask.accel} does not match kernel {kernel.accel}")
    grid = mask.grid if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    C = kernel.n_coils
    out = ksp_under[..., :C].copy()
    if kernel.accel == (1, 1):
        return out

    sources, targets = kernel_offsets(kernel.accel, kernel.taps)
    offsets = _all_offsets(sources, targets, kernel.virtual_offset)
    pad = np.abs(offsets).max(axis=0)
    widths = [(int(p), int(p)) for p in pad] + [(0, 0)]
    padded = np.pad(ksp_under, widths)

    shape = ksp_under.shape[:3]
    steps = (1,) + tuple(kernel.accel)
    counts = tuple(-(-n // s) for n, s in zip(shape, steps))
    origin = tuple(int(p) for p in pad)

    physical = padded[..., :C]
    virtual = padded[..., C:] if kernel.virtual_offset is not None else None
    A = _source_matrix(physical, virtual, origin, counts, steps, sources, kernel.virtual_offset)
    predicted = (A @ kernel.weights).reshape(counts + (len(targets), C))

    anchors_pe = np.arange(0, shape[1], kernel.accel[0])
    anchors_pa = np.arange(0, shape[2], kernel.accel[1])
    for t, (_, tp, tq) in enumerate(targets):
        pe = anchors_pe + tp
        pa = anchors_pa + tq
        keep_pe = pe < shape[1]
        keep_pa = pa < shape[2]
        rows = pe[keep_pe][:, None]
        cols = pa[keep_pa][None, :]
        values = predicted[:, keep_pe][:, :, keep_pa][..., t, :]
        missing = ~grid[rows, cols]
        current = out[:, rows, cols, :]
        out[:, rows, cols, :] = np.where(missing[None, :, :, None], values, current)
    return out


def acs_replace(ksp_recon, ksp_acq, acs_bounds):
    """
    Copy acquired entries inside the ACS block into a reconstruction.

    Parameters
    ----------
    ksp_recon, ksp_acq : complex ndarray
        (readout, phase, partition, coil)
    acs_bounds : tuple or None
        ((pe_lo, pe_hi), (pa_lo, pa_hi)) inclusive; None leaves recon as is

    Returns
    -------
    complex ndarray
    """
    out = ksp_recon.copy()
    if not acs_bounds:
        return out
    (pe_lo, pe_hi), (pa_lo, pa_hi) = acs_bounds
    block = (slice(None), slice(pe_lo, pe_hi + 1), slice(pa_lo, pa_hi + 1))
    out[block] = ksp_acq[block]
    return out


def extract_acs(ksp, acs_bounds):
    """The ACS block of full-grid k-space."""
    if not acs_bounds:
        raise ValueError("Mask declares no ACS block")
    (pe_lo, pe_hi), (pa_lo, pa_hi) = acs_bounds
    return ksp[:, pe_lo:pe_hi + 1, pa_lo:pa_hi + 1, :].copy()


def grappa_reconstruct(ksp_acq, mask, taps=None, lam=None, replace_acs=False):
    """
    Calibrate on the mask's ACS and interpolate from the lattice samples.

    Interpolation reads only the lattice, so ACS lines are re-estimated
    unless replace_acs is set.

    Parameters
    ----------
    ksp_acq : complex ndarray
        Acquired (zero-filled) k-space
    mask : SamplingMask
        Mask with an integrated ACS block
    taps : tuple, optional
    lam : float, optional
    replace_acs : bool
        Copy acquired ACS entries back at the end

    Returns
    -------
    complex ndarray
    """
    if mask.accel == (1, 1):
        return ksp_acq.copy()
    kernel = calibrate(extract_acs(ksp_acq, mask.acs_bounds), mask.accel, taps, lam)
    lattice = mask.lattice_only()
    recon = interpolate(apply_mask(ksp_acq, lattice), lattice, kernel)
    if replace_acs:
        recon = acs_replace(recon, ksp_acq, mask.acs_bounds)
    return recon


def lambda_sweep(ksp_acq, mask, lambdas=None, taps=None):
    """
    GRAPPA reconstructions over a list of Tikhonov weights.

    Returns
    -------
    dict
        lambda -> reconstructed k-space
    """
    if lambdas is None:
        lambdas = config.GRAPPA_LAMBDA_SWEEP
    return {lam: grappa_reconstruct(ksp_acq, mask, taps, lam) for lam in lambdas}


# ========================================
# VIRTUAL COILS
# ========================================

def mirror_index(n):
    """Index reversal about n // 2: i -> (2·(n // 2) − i) mod n."""
    return (2 * (n // 2) - np.arange(n)) % n


def mirror_kspace(ksp):
    """conj(y(−k)) on the readout, phase and partition axes."""
    mirrored = ksp
    for axis in range(3):
        mirrored = np.take(mirrored, mirror_index(ksp.shape[axis]), axis=axis)
    return np.conj(mirrored)


def make_virtual_coils(ksp):
    """
    Append conjugate-symmetric virtual coils.

    Returns
    -------
    complex ndarray
        2C coils; coils C..2C−1 are conj(y_c(−k))
    """
    return np.concatenate([ksp, mirror_kspace(ksp)], axis=-1)


def virtual_lattice_offset(shape, accel):
    """Phase of the mirrored lattice: (2·(n // 2)) mod R on each axis."""
    return (0,) + tuple((2 * (n // 2)) % r for n, r in zip(shape, accel))


def mirrored_acs_bounds(acs_bounds, shape):
    """
    Intersection of the ACS block with its mirror image.

    Raises
    ------
    ValueError
        If the intersection is empty
    """
    bounds = []
    for (lo, hi), n in zip(acs_bounds, shape):
        center = n // 2
        new_lo, new_hi = max(lo, 2 * center - hi), min(hi, 2 * center - lo)
        if new_lo > new_hi:
            raise ValueError(f"Mirrored sampling leaves no calibration region for ACS {acs_bounds}")
        bounds.append((new_lo, new_hi))
    return tuple(bounds)


def vc_grappa(ksp_under, mask, acs_bounds=None, accel=None, taps=None, lam=None,
              replace_acs=False):
    """
    GRAPPA on data augmented with conjugate-symmetric virtual coils.

    The kernel is calibrated where both a sample and its mirror are
    acquired; virtual sources sit on the mirrored lattice, and only
    physical coils are predicted.

    Parameters
    ----------
    ksp_under : complex ndarray
        Acquired (zero-filled) k-space
    mask : SamplingMask
    acs_bounds : tuple, optional
        Defaults to the mask's ACS block
    accel : tuple, optional
        Defaults to the mask's acceleration
    taps, lam : optional
        Kernel geometry and Tikhonov weight
    replace_acs : bool

    Returns
    -------
    complex ndarray
        Physical-coil k-space
    """
    accel = tuple(accel or mask.accel)
    acs_bounds = acs_bounds or mask.acs_bounds
    if accel == (1, 1):
        return ksp_under.copy()

    grid_shape = ksp_under.shape[1:3]
    C = ksp_under.shape[-1]
    augmented = make_virtual_coils(ksp_under)
    calib_bounds = mirrored_acs_bounds(acs_bounds, grid_shape)
    offset = virtual_lattice_offset(grid_shape, accel)

    kernel = calibrate(extract_acs(augmented, calib_bounds), accel, taps, lam,
                       n_coils=C, virtual_offset=offset)

    lattice = SamplingMask(grid=mask.grid & lattice_pattern(grid_shape, accel), accel=accel)
    lattice_data = apply_mask(ksp_under, lattice)
    recon = interpolate(make_virtual_coils(lattice_data), lattice, kernel)
    if replace_acs:
        recon = acs_replace(recon, ksp_under, acs_bounds)
    return recon
