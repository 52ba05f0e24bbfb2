"""
Centered Transforms and Coil Combination
========================================

Centered orthonormal FFTs, coil combination, and center-aligned
crop/pad on dense complex arrays.

Every k-space array in the toolkit is ordered (readout, phase, partition,
coil). The DC sample of every transformed axis sits at index n // 2.
"""

import logging

import numpy as np
import scipy.fft

import config

logger = logging.getLogger(__name__)

AXIS_INDEX = {name: index for index, name in enumerate(config.AXIS_NAMES)}


def resolve_axes(axes):
    """
    Convert axis names (or integers) to integer indices.

    Parameters
    ----------
    axes : str, int or sequence of str/int
        Axis labels drawn from ('readout', 'phase', 'partition', 'coil')

    Returns
    -------
    tuple of int

    Raises
    ------
    ValueError
        If a name is not a known axis label
    """
    if isinstance(axes, (str, int, np.integer)):
        axes = (axes,)

    resolved = []
    for axis in axes:
        if isinstance(axis, str):
            if axis not in AXIS_INDEX:
                raise ValueError(
                    f"Unknown axis name '{axis}', expected one of {list(AXIS_INDEX)}"
                )
            resolved.append(AXIS_INDEX[axis])
        else:
            resolved.append(int(axis))
    return tuple(resolved)


def _check_axes(t, axes):
    for axis in axes:
        if not -t.ndim <= axis < t.ndim:
            raise ValueError(f"Axis {axis} does not exist for array of rank {t.ndim}")


def fftc(t, axes):
    """
    Centered orthonormal forward FFT.

    ifftshift moves the DC index n // 2 to position 0, the unitary FFT is
    applied, and fftshift moves DC back to n // 2.

    Parameters
    ----------
    t : ndarray
        Complex (or real) array
    axes : str, int or sequence
        Axes to transform

    Returns
    -------
    complex ndarray
        Same shape as t
    """
    axes = resolve_axes(axes)
    _check_axes(t, axes)
    shifted = scipy.fft.ifftshift(t, axes=axes)
    transformed = scipy.fft.fftn(shifted, axes=axes, norm='ortho')
    return scipy.fft.fftshift(transformed, axes=axes)


def ifftc(t, axes):
    """
    Centered orthonormal inverse FFT (inverse of fftc).

    Parameters
    ----------
    t : ndarray
        Complex array
    axes : str, int or sequence
        Axes to transform

    Returns
    -------
    complex ndarray
    """
    axes = resolve_axes(axes)
    _check_axes(t, axes)
    shifted = scipy.fft.ifftshift(t, axes=axes)
    transformed = scipy.fft.ifftn(shifted, axes=axes, norm='ortho')
    return scipy.fft.fftshift(transformed, axes=axes)


def kspace_to_image(ksp):
    """Per-coil image from (readout, phase, partition, coil) k-space."""
    return ifftc(ksp, ('readout', 'phase', 'partition'))


def image_to_kspace(img):
    """Per-coil k-space from (M, N, P, C) coil images."""
    return fftc(img, ('readout', 'phase', 'partition'))


def sos_combine(coil_images, coil_axis=-1):
    """
    Root-sum-of-squares coil combination.

    Parameters
    ----------
    coil_images : ndarray
        Coil images with a coil axis
    coil_axis : int
        Position of the coil axis (last by default)

    Returns
    -------
    float ndarray
        Non-negative magnitude image with the coil axis removed
    """
    coil_images = np.asarray(coil_images)
    return np.sqrt(np.sum(np.abs(coil_images) ** 2, axis=coil_axis))


def complex_combine(coil_images, maps):
    """
    Sensitivity-weighted complex coil combination.

        m = Σ_c conj(S_c) · img_c / Σ_c |S_c|²

    Voxels where Σ|S_c|² = 0 return 0.

    Parameters
    ----------
    coil_images : complex ndarray
        (..., C) coil images
    maps : complex ndarray
        (..., C) coil sensitivities with the same shape

    Returns
    -------
    complex ndarray
        Combined image, coil axis removed
    """
    coil_images = np.asarray(coil_images)
    maps = np.asarray(maps)
    if coil_images.shape != maps.shape:
        raise ValueError(
            f"Coil images and maps must share shape, got {coil_images.shape} and {maps.shape}"
        )

    numerator = np.sum(np.conj(maps) * coil_images, axis=-1)
    denominator = np.sum(np.abs(maps) ** 2, axis=-1)

    combined = np.zeros(numerator.shape, dtype=complex)
    support = denominator > 0
    combined[support] = numerator[support] / denominator[support]
    return combined


def _center_slices(source_shape, target_shape):
    """Slices of the smaller window inside the larger, aligned at n // 2."""
    slices = []
    for big, small in zip(source_shape, target_shape):
        start = big // 2 - small // 2
        slices.append(slice(start, start + small))
    return tuple(slices)


def crop_center(t, target):
    """
    Crop to target dims keeping the n // 2 center aligned.

    Trailing axes not named in target are kept whole.

    Raises
    ------
    ValueError
        If any target extent exceeds the source extent
    """
    target = tuple(int(n) for n in target)
    shape = t.shape[:len(target)]
    if any(m > n or m < 1 for n, m in zip(shape, target)):
        raise ValueError(f"Crop target {target} must lie within source dims {t.shape}")
    return t[_center_slices(shape, target)].copy()


def pad_center(t, target):
    """
    Zero-pad to target dims keeping the n // 2 center aligned.

    Raises
    ------
    ValueError
        If any target extent is smaller than the source extent
    """
    target = tuple(int(n) for n in target)
    shape = t.shape[:len(target)]
    if any(m < n for n, m in zip(shape, target)):
        raise ValueError(f"Pad target {target} must contain source dims {t.shape}")
    out = np.zeros(target + t.shape[len(target):], dtype=t.dtype)
    out[_center_slices(target, shape)] = t
    return out
