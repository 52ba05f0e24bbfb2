"""
Image Export
============

8-bit binary PGM export of reconstructions, error maps and k-space
log-magnitude maps.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)


def display_slice(image, partition=None):
    """2D view of an (M, N) or (M, N, P) image; middle partition by default."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image
    if image.ndim == 3:
        if partition is None:
            partition = image.shape[2] // 2
        return image[:, :, partition]
    raise ValueError(f"Image must have rank 2 or 3, got shape {image.shape}")


def window_image(image, window=None):
    """
    Linear window to [0, 255].

    Parameters
    ----------
    image : float ndarray
    window : tuple, optional
        (lo, hi); None means (0, max)

    Returns
    -------
    uint8 ndarray

    Raises
    ------
    ValueError
        If the window is empty
    """
    image = np.asarray(image, dtype=float)
    if window is None:
        window = (0.0, float(np.max(image)) if image.size else 0.0)
    lo, hi = float(window[0]), float(window[1])
    if hi == lo:
        raise ValueError(f"Window must satisfy lo != hi, got ({lo}, {hi})")
    scaled = (image - lo) / (hi - lo) * 255.0
    return np.round(np.clip(scaled, 0.0, 255.0)).astype(np.uint8)


def export_pgm(image, path, window=None, partition=None):
    """
    Write a real image as a binary (P5) portable graymap.

    Returns
    -------
    Path
    """
    pixels = window_image(display_slice(image, partition), window)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode='L').save(path, format='PPM')
    logger.debug("exported %s (%dx%d)", path, *pixels.shape)
    return path


def export_error_map(recon, reference, path, window=None, gain=1.0, partition=None):
    """
    Write |recon − reference| using the reference's window divided by gain.
    """
    reference = np.abs(np.asarray(reference))
    if window is None:
        window = (0.0, float(np.max(display_slice(reference, partition))) / gain)
    error = np.abs(np.asarray(recon) - reference)
    return export_pgm(error, path, window, partition)


def kspace_log_magnitude(ksp, coil=None):
    """log(1 + |k|), summed over coils unless one coil is chosen."""
    ksp = np.asarray(ksp)
    if coil is not None:
        ksp = ksp[..., coil]
    elif ksp.ndim == 4:
        ksp = np.sqrt(np.sum(np.abs(ksp) ** 2, axis=-1))
    return np.log1p(np.abs(ksp))
