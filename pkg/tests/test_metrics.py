"""
Test Suite for Metrics
======================

Tests for percent RMSE scoring and the pseudo-replica noise analysis.
"""

import math

import pytest
import numpy as np
from tests import TEST_MATRIX_2D, TEST_N_COILS, TEST_SEED


def replica_setup(sigma):
    """Fully sampled phantom k-space with a coil-combining reconstruction."""
    from kspace_engine.phantom import CoilGeometry, generate_phantom, generate_sensitivities
    from kspace_engine.phantom import synthesize_kspace, make_noise_model
    from kspace_engine.sampling import uniform_1d
    from kspace_engine.tensors import kspace_to_image, complex_combine

    image = generate_phantom(None, TEST_MATRIX_2D)
    maps = generate_sensitivities(CoilGeometry(n_coils=TEST_N_COILS), TEST_MATRIX_2D)
    full = synthesize_kspace(image, maps)
    mask = uniform_1d(TEST_MATRIX_2D[1], 1, 0)
    noise = make_noise_model(TEST_N_COILS, 0.1, TEST_SEED)

    def recon_fn(ksp):
        return complex_combine(kspace_to_image(ksp), maps)

    return recon_fn, full, mask, noise, image


# ========================================
# RMSE TESTS
# ========================================

def test_rmse_identical_is_zero():
    """A perfect reconstruction scores 0."""
    from kspace_engine.metrics import rmse_percent

    reference = np.arange(1.0, 7.0)
    assert rmse_percent(reference, reference) == 0.0


def test_rmse_ten_percent():
    """A 10% uniform gain scores 10."""
    from kspace_engine.metrics import rmse_percent

    reference = np.linspace(1, 2, 20)
    assert math.isclose(rmse_percent(1.1 * reference, reference), 10.0)


def test_rmse_errors():
    """Shape mismatches and zero references are rejected."""
    from kspace_engine.metrics import rmse_percent

    with pytest.raises(ValueError):
        rmse_percent(np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        rmse_percent(np.ones(3), np.zeros(3))


def test_slice_rmse():
    """One score per partition."""
    from kspace_engine.metrics import slice_rmse

    reference = np.ones((4, 4, 2))
    recon = reference.copy()
    recon[:, :, 1] *= 1.2
    scores = slice_rmse(recon, reference)
    assert len(scores) == 2
    assert scores[0] == 0.0
    assert math.isclose(scores[1], 20.0)


def test_error_map_and_support():
    """Voxelwise errors and the non-zero support."""
    from kspace_engine.metrics import error_map, support_mask

    reference = np.array([0.0, 1.0, 2.0])
    assert error_map(np.array([0.5, 1.0, 1.0]), reference).tolist() == [0.5, 0.0, 1.0]
    assert support_mask(reference).tolist() == [False, True, True]


def test_eval_report_records():
    """Flat records include slice scores; CV is NaN without a mean."""
    from kspace_engine.metrics import EvalReport

    report = EvalReport(rmse_percent=3.0, slice_rmse=[1.0, 2.0], replica_rmse_mean=4.0, replica_rmse_std=0.2)
    records = report.records()
    assert records['slice1_rmse_percent'] == 2.0
    assert math.isclose(report.replica_cv, 0.05)
    assert math.isnan(EvalReport().replica_cv)


# ========================================
# PSEUDO-REPLICA TESTS
# ========================================

def test_pseudo_replica_with_noise():
    """Replica spread is positive and the proxy finite on the support."""
    from kspace_engine.metrics import pseudo_replica

    recon_fn, full, mask, noise, image = replica_setup(0.01)
    report = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=4, reference=image)
    assert report.n_replicas == 4
    assert report.std_map.shape == image.shape
    assert report.zero_std_count == 0
    assert report.replica_rmse_mean > 0
    assert np.isfinite(report.support_proxy_mean) and report.support_proxy_mean > 0


def test_pseudo_replica_without_noise():
    """Zero noise gives zero std everywhere and a zero proxy."""
    from kspace_engine.metrics import pseudo_replica

    recon_fn, full, mask, noise, image = replica_setup(0.0)
    report = pseudo_replica(recon_fn, full, mask, noise, 0.0, n_replicas=2, reference=image)
    assert report.zero_std_count == image.size
    assert np.all(report.proxy_map == 0)
    assert report.support_proxy_mean == 0.0


def test_pseudo_replica_needs_two_replicas():
    """A single replica has no spread."""
    from kspace_engine.metrics import pseudo_replica

    recon_fn, full, mask, noise, _ = replica_setup(0.01)
    with pytest.raises(ValueError):
        pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=1)


def test_pseudo_replica_worker_independent():
    """Replica draws do not depend on the worker count."""
    from kspace_engine.metrics import pseudo_replica

    recon_fn, full, mask, noise, image = replica_setup(0.01)
    serial = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=3, reference=image, n_jobs=1)
    threaded = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=3, reference=image, n_jobs=2)
    assert np.allclose(serial.std_map, threaded.std_map, rtol=0, atol=1e-12)
    assert math.isclose(serial.replica_rmse_mean, threaded.replica_rmse_mean, rel_tol=1e-12)


def test_pseudo_replica_linear_in_sigma():
    """A linear reconstruction doubles its std map when sigma doubles."""
    from kspace_engine.metrics import pseudo_replica

    recon_fn, full, mask, noise, image = replica_setup(0.01)
    single = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=4, reference=image)
    double = pseudo_replica(recon_fn, full, mask, noise, 0.02, n_replicas=4, reference=image)
    assert np.allclose(double.std_map, 2.0 * single.std_map, rtol=1e-6, atol=1e-12)


def test_pseudo_replica_reproducible():
    """The same noise seed gives the same report; another seed does not."""
    from kspace_engine.metrics import pseudo_replica
    from kspace_engine.phantom import make_noise_model

    recon_fn, full, mask, noise, image = replica_setup(0.01)
    first = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=3, reference=image)
    again = pseudo_replica(recon_fn, full, mask, noise, 0.01, n_replicas=3, reference=image)
    assert np.array_equal(first.std_map, again.std_map)
    assert first.records() == again.records()

    other_noise = make_noise_model(TEST_N_COILS, 0.1, TEST_SEED + 1)
    other = pseudo_replica(recon_fn, full, mask, other_noise, 0.01, n_replicas=3, reference=image)
    assert not np.allclose(first.std_map, other.std_map)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
