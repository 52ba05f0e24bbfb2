"""
KSPC Binary Container
=====================

Little-endian tensor container:

    magic   4 bytes  b'KSPC'
    version u32      1
    kind    u32      0 tensor, 1 mask, 2 psf, 3 model, 4 maps
    rank    u32
    dims    rank x u64
    dtype   u32      0 complex128 (interleaved), 1 float64, 2 uint8
    payload          row-major values
"""

import logging
import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path
from functools import reduce

import numpy as np

from kspace_engine.sampling import SamplingMask, lattice_pattern

logger = logging.getLogger(__name__)

MAGIC = b'KSPC'
VERSION = 1
HEADER = struct.Struct('<4sIII')
DTYPE_FIELD = struct.Struct('<I')

KINDS = {'tensor': 0, 'mask': 1, 'psf': 2, 'model': 3, 'maps': 4}
KIND_NAMES = {code: name for name, code in KINDS.items()}
DTYPES = {0: np.dtype('<c16'), 1: np.dtype('<f8'), 2: np.dtype('u1')}


class ContainerError(ValueError):
    """Malformed or mismatched container; the message names the field."""


@dataclass
class Container:
    """Decoded container contents."""

    kind: str
    data: np.ndarray


def _dtype_code(array):
    if np.iscomplexobj(array):
        return 0
    if array.dtype == np.uint8 or array.dtype == bool:
        return 2
    return 1


def encode(array, kind='tensor'):
    """Serialize an array to container bytes."""
    if kind not in KINDS:
        raise ContainerError(f"kind: unknown tag '{kind}', expected one of {list(KINDS)}")
    array = np.asarray(array)
    if array.ndim == 0:
        array = array.reshape(1)
    code = _dtype_code(array)
    payload = np.ascontiguousarray(array, dtype=DTYPES[code]).tobytes()
    header = HEADER.pack(MAGIC, VERSION, KINDS[kind], array.ndim)
    dims = struct.pack(f'<{array.ndim}Q', *array.shape)
    return header + dims + DTYPE_FIELD.pack(code) + payload


def decode(blob, expected_kind=None):
    """
    Parse container bytes.

    Raises
    ------
    ContainerError
        On magic, version, kind, dtype or length problems
    """
    if len(blob) < HEADER.size:
        raise ContainerError(f"length: header needs {HEADER.size} bytes, got {len(blob)}")
    magic, version, kind, rank = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ContainerError(f"magic: expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise ContainerError(f"version: expected {VERSION}, got {version}")
    if kind not in KIND_NAMES:
        raise ContainerError(f"kind: unknown tag {kind}")
    if expected_kind is not None and KIND_NAMES[kind] != expected_kind:
        raise ContainerError(f"kind: expected '{expected_kind}', got '{KIND_NAMES[kind]}'")

    offset = HEADER.size
    dims_size = 8 * rank
    if len(blob) < offset + dims_size + DTYPE_FIELD.size:
        raise ContainerError(f"length: truncated header for rank {rank}")
    dims = struct.unpack_from(f'<{rank}Q', blob, offset)
    offset += dims_size
    (code,) = DTYPE_FIELD.unpack_from(blob, offset)
    offset += DTYPE_FIELD.size
    if code not in DTYPES:
        raise ContainerError(f"dtype: unknown code {code}")

    dtype = DTYPES[code]
    expected = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
    actual = len(blob) - offset
    if actual != expected:
        raise ContainerError(f"length: payload has {actual} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype=dtype, count=expected // dtype.itemsize, offset=offset)
    return Container(kind=KIND_NAMES[kind], data=data.reshape(dims).copy())


def write_container(path, array, kind='tensor'):
    """Write an array as a container file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(array, kind))
    logger.debug("wrote %s container %s %s", kind, path, np.shape(array))
    return path


def read_container(path, expected_kind=None):
    """
    Read a container file.

    Raises
    ------
    OSError
        If the file is missing
    ContainerError
        If the bytes are malformed
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such container: {path}")
    return decode(path.read_bytes(), expected_kind)


# ========================================
# MASKS
# ========================================

SAMPLED_BIT = 1
ACS_BIT = 2


def _rate(indices):
    indices = np.unique(indices)
    if indices.size < 2:
        return 1
    return int(reduce(gcd, np.diff(indices).tolist()))


def mask_to_bits(mask):
    """uint8 grid: bit 0 sampled, bit 1 inside the ACS block."""
    bits = mask.grid.astype(np.uint8) * SAMPLED_BIT
    bits |= mask.acs_region().astype(np.uint8) * ACS_BIT
    return bits


def mask_from_bits(bits):
    """
    Rebuild a SamplingMask; rates are inferred from sample spacing.

    Exterior rates come from the samples outside the ACS block, the ACS
    rate from the samples inside it.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    grid = (bits & SAMPLED_BIT).astype(bool)
    block = (bits & ACS_BIT).astype(bool)

    acs_bounds = None
    acs_accel = (1, 1)
    if np.any(block):
        rows, cols = np.nonzero(block)
        acs_bounds = ((int(rows.min()), int(rows.max())), (int(cols.min()), int(cols.max())))
        inner_rows, inner_cols = np.nonzero(grid & block)
        acs_accel = (_rate(inner_rows), _rate(inner_cols))

    exterior = grid & ~block
    accel, shift = (1, 1), 0
    if np.any(exterior):
        columns = np.nonzero(exterior.any(axis=0))[0]
        r_pa = _rate(columns)
        per_column = [np.nonzero(exterior[:, c])[0] for c in columns]
        r_pe = reduce(gcd, [_rate(rows) for rows in per_column if rows.size > 1], 0) or 1
        accel = (r_pe, r_pa)
        if len(columns) > 1 and r_pe > 1:
            shift = (int(per_column[1][0]) - int(per_column[0][0])) % r_pe
        if not np.all(grid[exterior] & lattice_pattern(grid.shape, accel, shift)[exterior]):
            shift = 0

    return SamplingMask(grid=grid, acs_bounds=acs_bounds, accel=accel,
                        acs_accel=acs_accel, caipi_shift=shift)


def save_mask(path, mask):
    return write_container(path, mask_to_bits(mask), kind='mask')


def load_mask(path):
    return mask_from_bits(read_container(path, expected_kind='mask').data)
