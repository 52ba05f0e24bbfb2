"""
Reproduction Scenarios
======================

Named end-to-end runs on seeded synthetic phantoms. Each scenario returns
a list of checks (measured value, limit, pass flag) that the `repro`
command prints as a table.

Scenario sizes are desk scale: networks are narrower and trained for
fewer epochs than the library defaults so every run finishes in minutes.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from kspace_engine.tensors import fftc, ifftc
from kspace_engine.phantom import generate_phantom, generate_sensitivities, synthesize_kspace
from kspace_engine.sampling import uniform_1d, hybrid_mask, apply_mask
from kspace_engine.grappa import (
    calibration_system, calibrate, interpolate, acs_replace, lambda_sweep,
)
from kspace_engine.sense_wave import (
    EncodingModel, make_wave_psf, slice_group_model, forward, adjoint, normal,
)
from kspace_engine.metrics import rmse_percent
from scan_networks.layers import ConvLayer, Network
from scan_networks.optim import gradient_check
from scan_networks.spark import AcsProjector, SparkConfig, spark_correct
from storage.container import encode, mask_to_bits
from storage.run_config import parse_run_config
from workflows.pipelines import (
    simulate_scan, mask_for_config, spark_pipeline, raki_pipeline, prepare_method,
    pseudo_replica_comparison, spark_config_for, cartesian_image,
)
import config

logger = logging.getLogger(__name__)

NOISE_SIGMA_2D = 0.005
DESK_SPARK = {'hidden_channels': 32, 'epochs': 200}


@dataclass
class Check:
    """One comparison in a scenario table."""

    name: str
    value: float
    limit: float
    passed: bool

    def line(self, scenario):
        status = 'pass' if self.passed else 'fail'
        return (f"scenario={scenario} check={self.name} value={self.value:.6g} "
                f"limit={self.limit:.6g} status={status}")


@dataclass
class Outcome:
    name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def table(self):
        lines = [check.line(self.name) for check in self.checks]
        lines.append(f"scenario={self.name} status={'pass' if self.passed else 'fail'}")
        return lines


@dataclass
class Scenario:
    name: str
    description: str
    run: object


SCENARIOS = {}


def scenario(name, description):
    """Register a scenario function under a CLI name."""
    def register(fn):
        SCENARIOS[name] = Scenario(name=name, description=description, run=fn)
        return fn
    return register


def at_most(name, value, limit):
    return Check(name, float(value), float(limit), bool(value <= limit))


def at_least(name, value, limit):
    return Check(name, float(value), float(limit), bool(value >= limit))


def within(name, value, lo, hi):
    return Check(name, float(value), float(hi), bool(lo <= value <= hi))


def run_scenario(name):
    """
    Run one registered scenario.

    Raises
    ------
    ValueError
        For an unknown name
    """
    if name not in SCENARIOS:
        raise ValueError(f"Unknown scenario '{name}', expected one of {sorted(SCENARIOS)}")
    logger.info("running scenario %s", name)
    return Outcome(name=name, checks=SCENARIOS[name].run())


def desk_config(method, **sections):
    """2D 128x128, 8-coil GRAPPA-style run config with desk-scale SPARK."""
    document = {
        'method': method,
        'phantom': {'dims': [128, 128]},
        'noise': {'sigma': NOISE_SIGMA_2D},
        'spark': dict(DESK_SPARK),
    }
    for key, values in sections.items():
        document.setdefault(key, {}).update(values)
    return parse_run_config(document)


def _spark_run(run_config, scan=None):
    if scan is None:
        scan = simulate_scan(run_config, with_wave=run_config.method in ('wave', 'sense'))
    return spark_pipeline(run_config.method, scan, mask_for_config(run_config), run_config)


def _relative_distance(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ========================================
# OPERATOR ORACLES
# ========================================

def _adjoint_error(E, rng):
    x = rng.standard_normal(E.image_dims) + 1j * rng.standard_normal(E.image_dims)
    y = rng.standard_normal(E.kspace_shape) + 1j * rng.standard_normal(E.kspace_shape)
    lhs = np.vdot(forward(E, x), y)
    rhs = np.vdot(x, adjoint(E, y))
    return abs(lhs - rhs) / abs(lhs)


def _normal_error(E, rng):
    """Hermitian mismatch of EᴴE on two random images."""
    x = rng.standard_normal(E.image_dims) + 1j * rng.standard_normal(E.image_dims)
    z = rng.standard_normal(E.image_dims) + 1j * rng.standard_normal(E.image_dims)
    lhs = np.vdot(normal(E, x), z)
    rhs = np.vdot(x, normal(E, z))
    return abs(lhs - rhs) / abs(lhs)


@scenario('operators', 'centered FFT round trip and encoding adjoint tests')
def operators():
    rng = np.random.default_rng(config.DEFAULT_SEED)
    t = rng.standard_normal((32, 24, 8, 4)) + 1j * rng.standard_normal((32, 24, 8, 4))
    axes = ('readout', 'phase', 'partition')
    checks = [at_most('fft_round_trip', np.max(np.abs(ifftc(fftc(t, axes), axes) - t)), 1e-12)]

    maps_2d = generate_sensitivities(None, (32, 24))
    maps_3d = generate_sensitivities(None, (16, 12, 8))
    mask_2d = uniform_1d(24, 4, 8)
    models = {
        'cartesian_2d': EncodingModel(maps=maps_2d, mask=mask_2d),
        'wave_2d': EncodingModel(maps=maps_2d, mask=mask_2d, psf=make_wave_psf(32, 24, 1, oversample=3)),
        'cartesian_3d': EncodingModel(maps=maps_3d),
        'slice_group': slice_group_model(maps_3d[:, :, [1, 4, 7]],
                                         make_wave_psf(16, 12, 8).slices([1, 4, 7]), uniform_1d(12, 2, 4)),
    }
    for name, E in models.items():
        checks.append(at_most(f'adjoint_{name}', _adjoint_error(E, rng), 1e-10))
        checks.append(at_most(f'normal_{name}', _normal_error(E, rng), 1e-10))
    return checks


def planted_kernel_kspace(n_readout=16, n_pe=16, seed=0):
    """
    Two coils where coil 1 is coil 0 shifted by one phase line.

    GRAPPA with R=2 and taps (3, 2, 1) recovers such data exactly.
    """
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n_readout, n_pe, 1)) + 1j * rng.standard_normal((n_readout, n_pe, 1))
    base[:, :2] = 0
    base[:, n_pe - 2:] = 0
    return np.stack([base, np.roll(base, 1, axis=1)], axis=-1)


@scenario('grappa-oracle', 'GRAPPA calibration against a dense solve and a planted kernel')
def grappa_oracle():
    rng = np.random.default_rng(config.DEFAULT_SEED)
    acs = rng.standard_normal((16, 16, 1, 2)) + 1j * rng.standard_normal((16, 16, 1, 2))
    accel, taps, lam = (2, 1), (3, 2, 1), 0.01
    A, B = calibration_system(acs, accel, taps)
    AhA = A.conj().T @ A
    n = AhA.shape[0]
    dense = np.linalg.solve(AhA + lam * np.real(np.trace(AhA)) / n * np.eye(n), A.conj().T @ B)
    kernel = calibrate(acs, accel, taps, lam)

    full = planted_kernel_kspace()
    mask = uniform_1d(16, 2, 0)
    recovered = interpolate(apply_mask(full, mask), mask, calibrate(full, accel, taps, 0.0))
    return [
        at_most('dense_solve', np.max(np.abs(kernel.weights - dense)), 1e-10),
        at_most('planted_kernel', np.max(np.abs(recovered - full)), 1e-8),
    ]


@scenario('nn-gradients', 'finite-difference check of the convolution network gradients')
def nn_gradients():
    rng = np.random.default_rng(config.DEFAULT_SEED)
    checks = []
    for activation in ('relu', 'custom_nl'):
        layers = [
            ConvLayer.initialize(4, 3, (3, 3, 1), rng),
            ConvLayer.initialize(3, 3, (3, 3, 1), rng),
            ConvLayer.initialize(3, 4, (3, 3, 1), rng),
        ]
        net = Network(layers=layers, activations=[activation, activation, 'identity'], skips=[(0, 3)])
        x = 2.0 * rng.standard_normal((4, 6, 5, 1))
        target = rng.standard_normal((4, 6, 5, 1))
        errors = gradient_check(net, x, target)
        checks.append(at_most(f'{activation}_max_relative_error', max(errors), 1e-5))
    return checks


# ========================================
# SPARK ON 2D GRAPPA
# ========================================

@scenario('zero-residual', 'SPARK on an exact input leaves the image unchanged')
def zero_residual():
    image = generate_phantom(None, (64, 64))
    maps = generate_sensitivities(None, (64, 64))
    full = synthesize_kspace(image, maps)
    mask = uniform_1d(64, 4, 16)
    acs = AcsProjector.from_mask(mask, 64)
    result = spark_correct(apply_mask(full, mask), full, acs, SparkConfig(hidden_channels=16))
    before = rmse_percent(cartesian_image(full), image)
    after = rmse_percent(cartesian_image(result.kspace), image)
    final_loss = max(history[-1] for history in result.loss_histories)
    return [at_most('final_loss', final_loss, 1e-6), at_most('rmse_change', abs(after - before), 0.1)]


def _grappa_claim(accel, acs_lines):
    run_config = desk_config('grappa', mask={'accel': [accel, 1], 'acs': [acs_lines, 1]})
    result = _spark_run(run_config)
    return [
        within('grappa_rmse', result.rmse_baseline, 5.0, 20.0),
        at_most('spark_over_grappa', result.rmse_spark / result.rmse_baseline, 0.9),
    ]


@scenario('spark-grappa-r4', 'SPARK vs GRAPPA at R=4 with 24 ACS lines')
def spark_grappa_r4():
    return _grappa_claim(4, 24)


@scenario('spark-grappa-r5', 'SPARK vs GRAPPA at R=5 with 30 ACS lines')
def spark_grappa_r5():
    return _grappa_claim(5, 30)


@scenario('small-acs-raki', 'SPARK on GRAPPA vs RAKI at R=5 with 16 ACS lines')
def small_acs_raki():
    run_config = desk_config('grappa', mask={'accel': [5, 1], 'acs': [16, 1]})
    scan = simulate_scan(run_config, with_wave=False)
    result = _spark_run(run_config, scan)
    _, raki_rmse = raki_pipeline(scan, mask_for_config(run_config), run_config)
    return [at_most('spark_minus_raki', result.rmse_spark - raki_rmse, 0.0)]


@scenario('acs-sweep', 'GRAPPA, SPARK and RAKI over ACS sizes at R=5')
def acs_sweep():
    checks = []
    sizes = [16, 24, 30]
    for size in tqdm(sizes, desc='acs sizes', disable=not config.SHOW_PROGRESS):
        run_config = desk_config('grappa', mask={'accel': [5, 1], 'acs': [size, 1]})
        scan = simulate_scan(run_config, with_wave=False)
        result = _spark_run(run_config, scan)
        _, raki_rmse = raki_pipeline(scan, mask_for_config(run_config), run_config)
        logger.info("ACS %d: GRAPPA %.2f%% SPARK %.2f%% RAKI %.2f%%",
                    size, result.rmse_baseline, result.rmse_spark, raki_rmse)
        checks.append(at_most(f'acs{size}_spark_minus_grappa', result.rmse_spark - result.rmse_baseline, 0.0))
        checks.append(Check(f'acs{size}_raki_rmse', raki_rmse, float('nan'), True))
    return checks


@scenario('vc-convergence', 'SPARK pulls GRAPPA and VC-GRAPPA images together at R=5')
def vc_convergence():
    run_config = desk_config('grappa', mask={'accel': [5, 1], 'acs': [30, 1]})
    scan = simulate_scan(run_config, with_wave=False)
    plain = _spark_run(run_config, scan)
    run_config.method = 'vc_grappa'
    virtual = _spark_run(run_config, scan)
    before = _relative_distance(plain.baseline_image, virtual.baseline_image)
    after = _relative_distance(plain.image, virtual.image)
    return [
        at_most('vc_over_grappa_rmse', virtual.rmse_baseline / plain.rmse_baseline, 1.0),
        at_most('spark_distance_over_input_distance', after / before, 1.0),
    ]


@scenario('tikhonov-sweep', 'SPARK over GRAPPA inputs with increasing regularization')
def tikhonov_sweep():
    run_config = desk_config('grappa', spark={'epochs': 100})
    scan = simulate_scan(run_config, with_wave=False)
    mask = mask_for_config(run_config)
    acquired = apply_mask(scan.kspace, mask)
    acs = AcsProjector.from_mask(mask, acquired.shape[0])
    cfg = spark_config_for(run_config)

    checks = []
    for lam, y_est in lambda_sweep(acquired, mask, run_config.grappa.lambda_sweep).items():
        baseline = rmse_percent(cartesian_image(acs_replace(y_est, acquired, mask.acs_bounds)), scan.image)
        corrected = rmse_percent(cartesian_image(spark_correct(acquired, y_est, acs, cfg).kspace), scan.image)
        checks.append(at_most(f'lambda{lam:g}_spark_minus_grappa', corrected - baseline, 0.0))
    return checks


@scenario('pseudo-replica', 'replica RMSE spread and retained-SNR proxy at R=5')
def pseudo_replica_scenario():
    run_config = desk_config('grappa', mask={'accel': [5, 1], 'acs': [30, 1]},
                             metrics={'n_replicas': 20, 'n_jobs': config.MAX_THREADS})
    scan = simulate_scan(run_config, with_wave=False)
    reports = pseudo_replica_comparison(scan, mask_for_config(run_config), run_config)
    grappa, spark = reports['grappa'], reports['spark']
    return [
        at_most('spark_minus_grappa_replica_rmse', spark.replica_rmse_mean - grappa.replica_rmse_mean, 0.0),
        at_most('grappa_replica_cv', grappa.replica_cv, 0.05),
        at_most('spark_replica_cv', spark.replica_cv, 0.05),
        at_least('spark_minus_grappa_proxy', spark.support_proxy_mean - grappa.support_proxy_mean, 0.0),
    ]


# ========================================
# MODEL-BASED INPUTS
# ========================================

@scenario('wave-conditioning', 'wave vs cartesian SENSE at R=5 with identical noise')
def wave_conditioning():
    run_config = desk_config('wave', mask={'accel': [5, 1], 'acs': [24, 1]})
    scan = simulate_scan(run_config, with_wave=True)
    mask = mask_for_config(run_config)
    wave = spark_pipeline('wave', scan, mask, run_config)
    sense_setup = prepare_method('sense', scan, mask, run_config)
    sense_rmse = rmse_percent(sense_setup.to_image(sense_setup.baseline), scan.image)
    return [
        at_most('wave_minus_sense', wave.rmse_baseline - sense_rmse, 0.0),
        at_most('spark_minus_wave', wave.rmse_spark - wave.rmse_baseline, 0.0),
    ]


@scenario('slice-group-wave', '3-slice wave-CAIPI group with SPARK at R=5x3')
def slice_group_wave():
    run_config = parse_run_config({
        'method': 'wave_slice_group',
        'phantom': {'dims': [64, 60, 30]},
        'noise': {'sigma': NOISE_SIGMA_2D},
        'mask': {'accel': [5, 3], 'acs': [20, 1]},
        'spark': dict(DESK_SPARK),
    })
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline('wave_slice_group', scan, mask_for_config(run_config), run_config)
    sense_slices = [rmse_percent(result.setup.extras['sense_image'][:, :, s], result.reference[:, :, s])
                    for s in range(result.reference.shape[2])]
    checks = []
    for index, (corrected, wave, sense) in enumerate(
            zip(result.slice_rmse_spark, result.slice_rmse_baseline, sense_slices)):
        checks.append(at_most(f'slice{index}_spark_minus_wave', corrected - wave, 0.0))
        checks.append(at_most(f'slice{index}_wave_minus_sense', wave - sense, 0.0))
    return checks


# ========================================
# 3D HYBRID SAMPLING
# ========================================

@scenario('hybrid-3d', '3D hybrid mask with reference calibration vs uniform 4x3 GRAPPA')
def hybrid_3d():
    full_size = hybrid_mask(112, 96, 48, 48, (3, 2), (4, 3), elliptical=True)
    run_config = parse_run_config({
        'method': 'grappa3d_hybrid',
        'phantom': {'dims': [64, 48, 32]},
        'noise': {'sigma': NOISE_SIGMA_2D},
        'mask': {'kind': 'hybrid', 'accel': [4, 3], 'acs': [24, 24], 'acs_accel': [3, 2],
                 'elliptical': True, 'reference': [24, 24]},
        'spark': {'hidden_channels': 8, 'epochs': 40, 'n_jobs': config.MAX_THREADS},
    })
    result = _spark_run(run_config)
    return [
        within('full_size_net_acceleration', full_size.net_acceleration, 11.0, 13.0),
        at_most('spark_minus_grappa', result.rmse_spark - result.rmse_baseline, 0.0),
    ]


# ========================================
# DETERMINISM
# ========================================

def _determinism_run():
    run_config = parse_run_config({
        'phantom': {'dims': [48, 48]},
        'coils': {'n_coils': 4},
        'noise': {'sigma': NOISE_SIGMA_2D},
        'mask': {'accel': [3, 1], 'acs': [12, 1]},
        'spark': {'hidden_channels': 8, 'epochs': 10, 'n_jobs': 2},
    })
    scan = simulate_scan(run_config, with_wave=False)
    mask = mask_for_config(run_config)
    result = spark_pipeline('grappa', scan, mask, run_config)
    blobs = [encode(scan.kspace, 'tensor'), encode(mask_to_bits(mask), 'mask'),
             encode(result.image, 'tensor')]
    return blobs, result.records()


@scenario('determinism', 'identical config produces identical containers and reports')
def determinism():
    first_blobs, first_records = _determinism_run()
    second_blobs, second_records = _determinism_run()
    identical = sum(a == b for a, b in zip(first_blobs, second_blobs))
    return [
        at_least('identical_containers', identical, len(first_blobs)),
        at_least('identical_reports', float(first_records == second_records), 1.0),
    ]
