"""
Test Suite for SENSE and Wave Encoding
======================================

Tests for the encoding operator, its adjoint, the wave PSF, slice-group
models and the conjugate-gradient solver.
"""

import pytest
import numpy as np
from tests import TEST_SEED, TEST_N_COILS, TEST_TOLERANCE


def coil_maps(dims, n_coils=TEST_N_COILS):
    from kspace_engine.phantom import CoilGeometry, generate_sensitivities
    return generate_sensitivities(CoilGeometry(n_coils=n_coils), dims)


def random_complex(shape, rng):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def build_model(kind):
    """Small encoding models covering each operator path."""
    from kspace_engine.sense_wave import EncodingModel, make_wave_psf, slice_group_model
    from kspace_engine.sampling import uniform_1d, uniform_2d

    if kind == 'sense':
        return EncodingModel(maps=coil_maps((12, 10)), mask=uniform_1d(10, 2, 4))
    if kind == 'wave':
        psf = make_wave_psf(12, 10, 1, oversample=2)
        return EncodingModel(maps=coil_maps((12, 10)), mask=uniform_1d(10, 3, 0), psf=psf)
    if kind == 'wave3d':
        psf = make_wave_psf(8, 6, 4, oversample=2)
        return EncodingModel(maps=coil_maps((8, 6, 4)), mask=uniform_2d(6, 4, 2, 2), psf=psf)
    psf = make_wave_psf(8, 9, 3, oversample=2)
    return slice_group_model(coil_maps((8, 9, 3)), psf, uniform_1d(9, 3, 0), caipi_shift=1)


# ========================================
# ADJOINT TESTS
# ========================================

@pytest.mark.parametrize("kind", ['sense', 'wave', 'wave3d', 'slice_group'])
def test_adjoint_identity(kind):
    """<E x, y> equals <x, Eᴴ y>."""
    from kspace_engine.sense_wave import forward, adjoint

    E = build_model(kind)
    rng = np.random.default_rng(TEST_SEED)
    x = random_complex(E.image_dims, rng)
    y = random_complex(E.kspace_shape, rng)
    Ex = forward(E, x)
    lhs = np.vdot(y, Ex)
    rhs = np.vdot(adjoint(E, y), x)
    assert abs(lhs - rhs) / (np.linalg.norm(Ex) * np.linalg.norm(y)) <= TEST_TOLERANCE


@pytest.mark.parametrize("kind", ['sense', 'wave', 'slice_group'])
def test_normal_operator(kind):
    """EᴴE equals the composed operators and is Hermitian positive semidefinite."""
    from kspace_engine.sense_wave import forward, adjoint, normal

    E = build_model(kind)
    rng = np.random.default_rng(TEST_SEED)
    x = random_complex(E.image_dims, rng)
    z = random_complex(E.image_dims, rng)
    Nx = normal(E, x)
    assert np.allclose(Nx, adjoint(E, forward(E, x)), rtol=0, atol=1e-12)
    lhs = np.vdot(z, Nx)
    rhs = np.vdot(normal(E, z), x)
    assert abs(lhs - rhs) / (np.linalg.norm(Nx) * np.linalg.norm(z)) <= TEST_TOLERANCE
    quadratic = np.vdot(x, Nx)
    assert quadratic.real >= 0
    assert abs(quadratic.imag) <= TEST_TOLERANCE * abs(quadratic)


def test_forward_zeroes_unsampled_lines():
    """Masked models return zeros off the sampling pattern."""
    from kspace_engine.sense_wave import forward

    E = build_model('sense')
    y = forward(E, np.ones(E.image_dims))
    assert np.all(y[:, ~E.mask.grid[:, 0]] == 0)


def test_slice_group_collapses_partitions():
    """Slice groups produce one collapsed partition."""
    E = build_model('slice_group')
    assert E.is_slice_group
    assert E.kspace_shape == (16, 9, 1, TEST_N_COILS)


def test_model_validation():
    """Mask and PSF dims must fit the maps."""
    from kspace_engine.sense_wave import EncodingModel, make_wave_psf
    from kspace_engine.sampling import uniform_1d

    maps = coil_maps((8, 6))
    with pytest.raises(ValueError):
        EncodingModel(maps=maps, mask=uniform_1d(8, 2, 0))
    with pytest.raises(ValueError):
        EncodingModel(maps=maps, psf=make_wave_psf(8, 7, 1))
    with pytest.raises(ValueError):
        EncodingModel(maps=np.ones((4, 4)))


def test_forward_rejects_wrong_image():
    """Image dims must equal the model dims."""
    from kspace_engine.sense_wave import forward

    E = build_model('sense')
    with pytest.raises(ValueError):
        forward(E, np.ones((12, 9)))


# ========================================
# WAVE PSF TESTS
# ========================================

def test_wave_psf_is_pure_phase():
    """Synthetic PSFs have unit magnitude on the oversampled grid."""
    from kspace_engine.sense_wave import make_wave_psf

    psf = make_wave_psf(8, 6, 1, oversample=3)
    assert psf.phase.shape == (24, 6, 1)
    assert np.allclose(np.abs(psf.phase), 1.0)


def test_wave_psf_zero_at_center_line():
    """The phase-encode center line carries no wave phase in 2D."""
    from kspace_engine.sense_wave import make_wave_psf

    psf = make_wave_psf(8, 6, 1)
    assert np.allclose(psf.phase[:, 3, 0], 1.0)


@pytest.mark.parametrize("phase,oversample", [
    (np.full((8, 4), 2.0 + 0j), 2),
    (np.ones((9, 4), dtype=complex), 2),
    (np.ones((8, 4), dtype=complex), 0),
])
def test_wave_psf_validation(phase, oversample):
    """Non-unit magnitudes, misfit extents and bad oversampling are rejected."""
    from kspace_engine.sense_wave import WavePsf

    with pytest.raises(ValueError):
        WavePsf(phase=phase, oversample=oversample)


def test_deconvolve_wave_gives_cartesian_kspace():
    """Removing the PSF yields oversampled cartesian k-space."""
    from kspace_engine.sense_wave import EncodingModel, forward, make_wave_psf, deconvolve_wave

    rng = np.random.default_rng(TEST_SEED)
    maps = coil_maps((8, 6, 4))
    psf = make_wave_psf(8, 6, 4, oversample=3)
    x = random_complex((8, 6, 4), rng)
    wave = forward(EncodingModel(maps=maps, psf=psf), x)
    cartesian = forward(EncodingModel(maps=maps, oversample=3), x)
    assert np.allclose(deconvolve_wave(wave, psf), cartesian, atol=1e-10)


def test_caipi_ramps():
    """Slice 0 is unmodulated and every ramp is pure phase."""
    from kspace_engine.sense_wave import caipi_ramps

    ramps = caipi_ramps(3, 6, 1)
    assert ramps.shape == (3, 6)
    assert np.allclose(ramps[0], 1.0)
    assert np.allclose(np.abs(ramps), 1.0)
    assert np.isclose(ramps[1, 3], 1.0)


# ========================================
# CONJUGATE GRADIENT TESTS
# ========================================

def test_cg_recovers_fully_sampled_image():
    """Full sampling with normalized maps is solved exactly."""
    from kspace_engine.sense_wave import EncodingModel, forward, cg_solve
    from kspace_engine.phantom import generate_phantom

    E = EncodingModel(maps=coil_maps((16, 12)))
    image = generate_phantom(None, (16, 12))
    result = cg_solve(E, forward(E, image), max_iter=20, tol=1e-10)
    assert result.converged
    assert np.allclose(result.x, image, atol=1e-8)


def test_cg_data_residual_non_increasing():
    """The data misfit never grows across iterations."""
    from kspace_engine.sense_wave import cg_solve

    E = build_model('wave')
    rng = np.random.default_rng(TEST_SEED)
    result = cg_solve(E, random_complex(E.kspace_shape, rng), max_iter=15, tol=1e-12)
    assert len(result.data_residuals) == result.iterations + 1
    assert np.all(np.diff(result.data_residuals) <= 1e-10)


def test_cg_zero_data():
    """Zero k-space returns the zero image immediately."""
    from kspace_engine.sense_wave import cg_solve

    E = build_model('sense')
    result = cg_solve(E, np.zeros(E.kspace_shape, dtype=complex))
    assert result.iterations == 0
    assert result.converged
    assert np.all(result.x == 0)


@pytest.mark.parametrize("max_iter,tol", [(0, 1e-6), (5, 0.0)])
def test_cg_argument_validation(max_iter, tol):
    """max_iter must be positive and tol strictly positive."""
    from kspace_engine.sense_wave import cg_solve

    E = build_model('sense')
    with pytest.raises(ValueError):
        cg_solve(E, np.ones(E.kspace_shape, dtype=complex), max_iter=max_iter, tol=tol)


def test_slice_group_cross_talk():
    """Three slices with disjoint support separate with under 1% leaked energy."""
    from kspace_engine.sense_wave import slice_group_model, make_wave_psf, forward, cg_solve
    from kspace_engine.sampling import uniform_1d

    slices = [1, 4, 7]
    maps = coil_maps((16, 12, 9), n_coils=8)[:, :, slices]
    psf = make_wave_psf(16, 12, 9, oversample=3).slices(slices)
    E = slice_group_model(maps, psf, uniform_1d(12, 2, 0), caipi_shift=1)

    rng = np.random.default_rng(TEST_SEED)
    support = np.zeros((16, 12, 3), dtype=bool)
    support[2:7, 1:5, 0] = True
    support[9:14, 4:8, 1] = True
    support[4:12, 8:11, 2] = True
    truth = np.where(support, 1.0 + rng.random(support.shape), 0.0)

    result = cg_solve(E, forward(E, truth), max_iter=500, tol=1e-10)
    leaked = np.sum(np.abs(result.x[~support]) ** 2)
    assert leaked < 0.01 * np.sum(np.abs(truth) ** 2)


def test_recon_to_kspace_uses_full_model():
    """Model-based k-space estimates cover the unsampled lines too."""
    from kspace_engine.sense_wave import forward, recon_to_kspace

    E = build_model('wave')
    rng = np.random.default_rng(TEST_SEED)
    x = random_complex(E.image_dims, rng)
    estimate = recon_to_kspace(x, E)
    assert np.allclose(estimate, forward(E.full(), x))
    assert E.mask is not None
    assert np.count_nonzero(estimate[:, ~E.mask.grid[:, 0]]) > 0


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
