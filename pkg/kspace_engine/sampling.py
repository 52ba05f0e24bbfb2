"""
Undersampling Patterns
======================

Deterministic (phase, partition) sampling masks: uniform 1D and 2D
lattices with a centered ACS block, CAIPI-shifted lattices, elliptical
exterior filtering, and the hybrid scheme that samples the ACS block and
the periphery at different rates.

Lattices anchor at index 0; ACS blocks center on n // 2.
"""

import logging
from dataclasses import dataclass

import numpy as np

import config

logger = logging.getLogger(__name__)


@dataclass
class SamplingMask:
    """
    Boolean sampling pattern over (phase, partition).

    Attributes
    ----------
    grid : bool ndarray
        (n_pe, n_pa); n_pa = 1 for 2D acquisitions
    acs_bounds : tuple or None
        ((pe_lo, pe_hi), (pa_lo, pa_hi)) inclusive, or None
    accel : tuple
        Nominal exterior acceleration (R_pe, R_pa)
    acs_accel : tuple
        Lattice rate inside the ACS block; (1, 1) for fully sampled ACS
    caipi_shift : int
        Phase offset added per sampled partition
    """

    grid: np.ndarray
    acs_bounds: tuple = None
    accel: tuple = (1, 1)
    acs_accel: tuple = (1, 1)
    caipi_shift: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=bool)
        if self.grid.ndim == 1:
            self.grid = self.grid[:, None]
        if self.grid.ndim != 2:
            raise ValueError(f"Mask grid must be (n_pe, n_pa), got shape {self.grid.shape}")
        self.accel = tuple(int(r) for r in self.accel)
        self.acs_accel = tuple(int(r) for r in self.acs_accel)
        if any(r < 1 for r in self.accel + self.acs_accel):
            raise ValueError(f"Acceleration factors must be >= 1, got {self.accel} / {self.acs_accel}")

        if self.acs_bounds is not None:
            self.acs_bounds = tuple((int(lo), int(hi)) for lo, hi in self.acs_bounds)
            for (lo, hi), n in zip(self.acs_bounds, self.grid.shape):
                if not 0 <= lo <= hi < n:
                    raise ValueError(f"ACS bounds {self.acs_bounds} exceed grid {self.grid.shape}")
            required = self.acs_region() & lattice_pattern(self.shape, self.acs_accel)
            if not np.all(self.grid[required]):
                raise ValueError(
                    f"ACS block {self.acs_bounds} is not fully sampled at rate {self.acs_accel}"
                )

    @property
    def shape(self):
        return self.grid.shape

    @property
    def count(self):
        return int(np.count_nonzero(self.grid))

    @property
    def net_acceleration(self):
        """Grid size over the realized sample count."""
        if self.count == 0:
            return float('inf')
        return self.grid.size / self.count

    @property
    def has_acs(self):
        return self.acs_bounds is not None

    def acs_region(self):
        """Boolean grid of the declared ACS block."""
        region = np.zeros(self.shape, dtype=bool)
        if self.acs_bounds is not None:
            (pe_lo, pe_hi), (pa_lo, pa_hi) = self.acs_bounds
            region[pe_lo:pe_hi + 1, pa_lo:pa_hi + 1] = True
        return region

    def acs_shape(self):
        if self.acs_bounds is None:
            return (0, 0)
        return tuple(hi - lo + 1 for lo, hi in self.acs_bounds)

    def lattice(self):
        """The nominal exterior sampling lattice over the full grid."""
        return lattice_pattern(self.shape, self.accel, self.caipi_shift)

    def lattice_only(self):
        """Copy keeping only lattice samples (ACS-only lines removed)."""
        return SamplingMask(
            grid=self.grid & self.lattice(),
            acs_bounds=None,
            accel=self.accel,
            caipi_shift=self.caipi_shift,
        )


def lattice_pattern(shape, accel, shift=0):
    """
    Lattice anchored at 0 with an optional CAIPI shear.

    Entry (pe, pa) is on the lattice when pa ≡ 0 (mod R_pa) and
    pe ≡ shift·(pa / R_pa) (mod R_pe).
    """
    n_pe, n_pa = shape
    r_pe, r_pa = accel
    pe = np.arange(n_pe)[:, None]
    pa = np.arange(n_pa)[None, :]
    return (pa % r_pa == 0) & ((pe - shift * (pa // r_pa)) % r_pe == 0)


def centered_block(n, size):
    """Inclusive (lo, hi) of a length-`size` block centered on n // 2."""
    lo = n // 2 - size // 2
    return (lo, lo + size - 1)


def _validate_rate(n, r, name):
    if not 1 <= r <= n:
        raise ValueError(f"{name} must satisfy 1 <= R <= {n}, got {r}")


def uniform_1d(n_pe, R, n_acs):
    """
    Every R-th phase line from index 0 plus a centered block of ACS lines.

    Parameters
    ----------
    n_pe : int
        Phase-encode lines
    R : int
        Acceleration factor
    n_acs : int
        Fully sampled center lines (0 for none)

    Returns
    -------
    SamplingMask
        Grid of shape (n_pe, 1)
    """
    _validate_rate(n_pe, R, 'R')
    if not 0 <= n_acs <= n_pe:
        raise ValueError(f"n_acs must satisfy 0 <= n_acs <= {n_pe}, got {n_acs}")
    return uniform_2d(n_pe, 1, R, 1, n_acs, 1 if n_acs else 0)


def uniform_2d(n_pe, n_pa, R_pe, R_pa, acs_pe=0, acs_pa=0):
    """
    Uniform 2D lattice with a centered acs_pe x acs_pa fully sampled block.

    Returns
    -------
    SamplingMask
    """
    _validate_rate(n_pe, R_pe, 'R_pe')
    _validate_rate(n_pa, R_pa, 'R_pa')
    if not (0 <= acs_pe <= n_pe and 0 <= acs_pa <= n_pa):
        raise ValueError(f"ACS size ({acs_pe}, {acs_pa}) exceeds grid ({n_pe}, {n_pa})")

    grid = lattice_pattern((n_pe, n_pa), (R_pe, R_pa))
    bounds = None
    if acs_pe > 0 and acs_pa > 0:
        bounds = (centered_block(n_pe, acs_pe), centered_block(n_pa, acs_pa))
        (pe_lo, pe_hi), (pa_lo, pa_hi) = bounds
        grid[pe_lo:pe_hi + 1, pa_lo:pa_hi + 1] = True

    return SamplingMask(grid=grid, acs_bounds=bounds, accel=(R_pe, R_pa))


def caipi_2d(n_pe, n_pa, R_pe, R_pa, shift=None):
    """
    CAIPI lattice: each sampled partition shifts its phase offset by `shift`.

    Returns
    -------
    SamplingMask
    """
    if shift is None:
        shift = config.DEFAULT_CAIPI_SHIFT
    _validate_rate(n_pe, R_pe, 'R_pe')
    _validate_rate(n_pa, R_pa, 'R_pa')
    grid = lattice_pattern((n_pe, n_pa), (R_pe, R_pa), shift)
    return SamplingMask(grid=grid, accel=(R_pe, R_pa), caipi_shift=shift)


def ellipse_region(shape):
    """Entries inside the ellipse inscribed in the (phase, partition) grid."""
    n_pe, n_pa = shape
    pe = (np.arange(n_pe)[:, None] - n_pe // 2) / (n_pe / 2)
    pa = (np.arange(n_pa)[None, :] - n_pa // 2) / (n_pa / 2)
    return pe ** 2 + pa ** 2 <= 1.0


def elliptical_filter(mask):
    """
    Drop samples outside the inscribed ellipse; the ACS block is exempt.

    Returns
    -------
    SamplingMask
    """
    keep = ellipse_region(mask.shape) | mask.acs_region()
    return SamplingMask(
        grid=mask.grid & keep,
        acs_bounds=mask.acs_bounds,
        accel=mask.accel,
        acs_accel=mask.acs_accel,
        caipi_shift=mask.caipi_shift,
    )


def hybrid_mask(n_pe, n_pa, acs_pe, acs_pa, R_acs=None, R_ext=None, elliptical=True):
    """
    Differently sampled ACS block and exterior.

    The centered block is sampled on the R_acs lattice and the rest of the
    grid on the R_ext lattice; both lattices anchor at index 0. The
    elliptical filter touches the exterior only.

    Parameters
    ----------
    n_pe, n_pa : int
        Grid size
    acs_pe, acs_pa : int
        ACS block size
    R_acs, R_ext : tuple of int
        Lattice rates inside and outside the block
    elliptical : bool
        Apply elliptical exterior filtering

    Returns
    -------
    SamplingMask
    """
    R_acs = tuple(R_acs or config.HYBRID_ACS_ACCEL)
    R_ext = tuple(R_ext or config.HYBRID_EXTERIOR_ACCEL)
    if not (1 <= acs_pe <= n_pe and 1 <= acs_pa <= n_pa):
        raise ValueError(f"ACS size ({acs_pe}, {acs_pa}) must lie within grid ({n_pe}, {n_pa})")

    bounds = (centered_block(n_pe, acs_pe), centered_block(n_pa, acs_pa))
    block = np.zeros((n_pe, n_pa), dtype=bool)
    (pe_lo, pe_hi), (pa_lo, pa_hi) = bounds
    block[pe_lo:pe_hi + 1, pa_lo:pa_hi + 1] = True

    exterior = lattice_pattern((n_pe, n_pa), R_ext) & ~block
    if elliptical:
        exterior &= ellipse_region((n_pe, n_pa))
    grid = exterior | (lattice_pattern((n_pe, n_pa), R_acs) & block)

    mask = SamplingMask(grid=grid, acs_bounds=bounds, accel=R_ext, acs_accel=R_acs)
    logger.debug("hybrid mask %s: net acceleration %.2f", mask.shape, mask.net_acceleration)
    return mask


def apply_mask(ksp, mask):
    """
    Zero the unsampled (phase, partition) entries of 4D k-space.

    Parameters
    ----------
    ksp : complex ndarray
        (readout, phase, partition, coil)
    mask : SamplingMask or bool ndarray

    Returns
    -------
    complex ndarray
    """
    grid = mask.grid if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    if grid.shape != ksp.shape[1:3]:
        raise ValueError(f"Mask shape {grid.shape} does not match k-space grid {ksp.shape[1:3]}")
    return ksp * grid[None, :, :, None]
