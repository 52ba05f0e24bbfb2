"""
Test Suite for Storage
======================

Tests for the binary tensor container, mask persistence and the JSON
run configuration.
"""

import json
import struct

import pytest
import numpy as np
from tests import TEST_SEED


# ========================================
# CONTAINER TESTS
# ========================================

@pytest.mark.parametrize("array,kind", [
    (np.arange(6).reshape(2, 3) * (1 + 0.5j), 'tensor'),
    (np.linspace(-1, 1, 24).reshape(2, 3, 4), 'psf'),
    (np.array([[0, 1], [3, 2]], dtype=np.uint8), 'mask'),
])
def test_container_is_bit_exact(array, kind, tmp_path):
    """Values, shape and kind survive a file write."""
    from storage.container import write_container, read_container

    path = write_container(tmp_path / 'data.kspc', array, kind=kind)
    container = read_container(path, expected_kind=kind)
    assert container.kind == kind
    assert container.data.shape == array.shape
    assert container.data.tobytes() == np.ascontiguousarray(array).tobytes()


def test_container_header_layout():
    """Magic, version, kind, rank, dims and dtype precede the payload."""
    from storage.container import encode

    blob = encode(np.zeros(3), kind='tensor')
    assert blob[:4] == b'KSPC'
    assert struct.unpack_from('<III', blob, 4) == (1, 0, 1)
    assert struct.unpack_from('<Q', blob, 16) == (3,)
    assert struct.unpack_from('<I', blob, 24) == (1,)
    assert len(blob) == 28 + 3 * 8


def test_container_maps_kind_is_complex():
    """Complex arrays use the interleaved complex code."""
    from storage.container import encode

    blob = encode(np.ones((2, 2), dtype=complex), kind='maps')
    assert struct.unpack_from('<I', blob, 8) == (4,)
    assert struct.unpack_from('<I', blob, 4 + 12 + 16) == (0,)


@pytest.mark.parametrize("mutate,field", [
    (lambda blob: b'XXXX' + blob[4:], 'magic'),
    (lambda blob: blob[:4] + struct.pack('<I', 2) + blob[8:], 'version'),
    (lambda blob: blob[:8] + struct.pack('<I', 9) + blob[12:], 'kind'),
    (lambda blob: blob[:-1], 'length'),
    (lambda blob: blob[:10], 'length'),
])
def test_malformed_container_names_field(mutate, field):
    """Errors start with the offending header field."""
    from storage.container import encode, decode, ContainerError

    blob = mutate(encode(np.arange(4.0), kind='tensor'))
    with pytest.raises(ContainerError, match=f"^{field}"):
        decode(blob)


def test_unexpected_kind():
    """Readers can demand a specific kind."""
    from storage.container import encode, decode, ContainerError

    with pytest.raises(ContainerError, match="^kind"):
        decode(encode(np.zeros(2), kind='tensor'), expected_kind='mask')
    with pytest.raises(ContainerError, match="^kind"):
        encode(np.zeros(2), kind='volume')


def test_missing_container(tmp_path):
    """Missing files raise FileNotFoundError naming the path."""
    from storage.container import read_container

    path = tmp_path / 'absent.kspc'
    with pytest.raises(FileNotFoundError, match='absent.kspc'):
        read_container(path)


# ========================================
# MASK PERSISTENCE TESTS
# ========================================

def assert_same_mask(restored, mask):
    assert np.array_equal(restored.grid, mask.grid)
    assert restored.acs_bounds == mask.acs_bounds
    assert restored.accel == mask.accel
    assert restored.acs_accel == mask.acs_accel
    assert restored.caipi_shift == mask.caipi_shift


def test_uniform_mask_file(tmp_path):
    """Uniform masks keep their rate and ACS block."""
    from storage.container import save_mask, load_mask
    from kspace_engine.sampling import uniform_1d

    mask = uniform_1d(24, 4, 8)
    assert_same_mask(load_mask(save_mask(tmp_path / 'mask.kspc', mask)), mask)


def test_caipi_mask_bits():
    """CAIPI shifts are recovered from the lattice."""
    from storage.container import mask_to_bits, mask_from_bits
    from kspace_engine.sampling import caipi_2d

    mask = caipi_2d(12, 6, 3, 2, shift=1)
    assert_same_mask(mask_from_bits(mask_to_bits(mask)), mask)


def test_hybrid_mask_bits():
    """Hybrid masks keep distinct ACS and exterior rates."""
    from storage.container import mask_to_bits, mask_from_bits, ACS_BIT
    from kspace_engine.sampling import hybrid_mask

    mask = hybrid_mask(24, 18, 8, 6, (3, 2), (4, 3), elliptical=False)
    bits = mask_to_bits(mask)
    assert np.count_nonzero(bits & ACS_BIT) == 8 * 6
    assert_same_mask(mask_from_bits(bits), mask)


# ========================================
# RUN CONFIG TESTS
# ========================================

def test_run_config_defaults():
    """An empty document gives the defaults."""
    from storage.run_config import parse_run_config, RunConfig

    run_config = parse_run_config({})
    assert run_config == RunConfig()
    assert run_config.method == 'grappa'
    assert not run_config.is_3d


def test_run_config_overrides():
    """Section values replace defaults key by key."""
    from storage.run_config import parse_run_config

    run_config = parse_run_config({
        'method': 'wave',
        'seed': TEST_SEED,
        'phantom': {'dims': [32, 24, 8]},
        'spark': {'epochs': 7},
    })
    assert run_config.method == 'wave'
    assert run_config.seed == TEST_SEED
    assert run_config.is_3d
    assert run_config.spark.epochs == 7
    assert run_config.spark.lr > 0


@pytest.mark.parametrize("document,message", [
    ({'spark': {'epoch': 3}}, "spark.epoch"),
    ({'sparks': {}}, "sparks"),
    ({'method': 'raki'}, "method"),
    ({'phantom': {'dims': [32]}}, "dims"),
    ({'noise': 0.1}, "noise"),
])
def test_run_config_rejections(document, message):
    """Unknown keys are reported with their dotted path."""
    from storage.run_config import parse_run_config

    with pytest.raises(ValueError, match=message):
        parse_run_config(document)


def test_run_config_dump_is_complete(tmp_path):
    """Dumped configs reload to the same settings."""
    from storage.run_config import RunConfig, dump_run_config, load_run_config

    run_config = RunConfig(method='vc_grappa')
    run_config.mask.accel = [5, 1]
    path = tmp_path / 'run.json'
    path.write_text(dump_run_config(run_config))

    document = json.loads(path.read_text())
    assert set(document) >= {'method', 'seed', 'mask', 'spark', 'raki', 'metrics'}
    assert load_run_config(path) == run_config


def test_missing_run_config(tmp_path):
    """Missing config files name the path."""
    from storage.run_config import load_run_config

    with pytest.raises(FileNotFoundError, match='nope.json'):
        load_run_config(tmp_path / 'nope.json')


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
