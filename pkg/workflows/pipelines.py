"""
Reconstruction Pipelines
========================

End-to-end runs: simulate a scan, undersample it, build the input
reconstruction of the chosen method, correct it with SPARK, and score
both against the ground truth.

Every method produces the same MethodSetup: the SPARK training data
(y_acq and the ACS projector), the input estimate y_est, the baseline
k-space, and the k-space -> image mapping of that method.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from kspace_engine.tensors import kspace_to_image, sos_combine, complex_combine
from kspace_engine.phantom import (
    CoilGeometry, generate_phantom, generate_sensitivities, synthesize_kspace,
    add_correlated_noise, make_noise_model,
)
from kspace_engine.sampling import (
    SamplingMask, uniform_1d, uniform_2d, caipi_2d, hybrid_mask, elliptical_filter,
    apply_mask, lattice_pattern,
)
from kspace_engine.grappa import (
    calibrate, interpolate, acs_replace, extract_acs, vc_grappa,
)
from kspace_engine.sense_wave import (
    EncodingModel, WavePsf, make_wave_psf, forward, cg_solve, recon_to_kspace,
    deconvolve_wave, slice_group_model,
)
from kspace_engine.metrics import rmse_percent, slice_rmse, pseudo_replica
from scan_networks.spark import SparkConfig, AcsProjector, spark_correct, estimate_correction
from scan_networks.raki import RakiConfig, raki_reconstruct
from storage.container import read_container, write_container, load_mask
import config

logger = logging.getLogger(__name__)

REFERENCE_DRAW_INDEX = 2 ** 31


# ========================================
# SCAN DATA
# ========================================

@dataclass
class ScanData:
    """
    One simulated acquisition.

    Attributes
    ----------
    image : float ndarray
        (M, N, P) ground truth
    maps : complex ndarray
        (M, N, P, C) sensitivities
    kspace : complex ndarray
        Noisy, fully sampled cartesian k-space (draw 0)
    kspace_clean : complex ndarray or None
        Noise-free k-space (needed for pseudo-replicas)
    psf : WavePsf or None
    wave_kspace : complex ndarray or None
        Noisy fully sampled wave k-space (oversampled readout)
    reference : complex ndarray or None
        Separately noised low-resolution calibration scan
    noise, sigma
        Noise model and scale used for every draw
    """

    image: np.ndarray
    maps: np.ndarray
    kspace: np.ndarray
    kspace_clean: np.ndarray = None
    psf: WavePsf = None
    wave_kspace: np.ndarray = None
    reference: np.ndarray = None
    noise: object = None
    sigma: float = 0.0

    @property
    def dims(self):
        return self.image.shape

    @property
    def n_coils(self):
        return self.maps.shape[-1]


def noise_model_for(run_config):
    return make_noise_model(run_config.coils.n_coils, run_config.noise.correlation, run_config.seed)


def simulate_scan(run_config, with_wave=True):
    """
    Phantom, maps, noisy cartesian and wave k-space, and reference scan.

    Parameters
    ----------
    run_config : RunConfig
    with_wave : bool
        Also synthesize wave-encoded k-space

    Returns
    -------
    ScanData
    """
    dims = tuple(run_config.phantom.dims)
    coils = run_config.coils
    geometry = CoilGeometry(
        n_coils=coils.n_coils, ring_radius=coils.ring_radius, width=coils.width,
        phase_slope=coils.phase_slope, phase_curvature=coils.phase_curvature,
        z_offset=coils.z_offset,
    )
    image = generate_phantom(None, dims)
    maps = generate_sensitivities(geometry, dims)
    clean = synthesize_kspace(image, maps)

    noise = noise_model_for(run_config)
    sigma = run_config.noise.sigma
    kspace = add_correlated_noise(clean, noise, sigma, draw_index=0)
    reference = reference_scan(clean, noise, sigma, run_config.mask.reference)

    psf = wave = None
    if with_wave:
        M, N, P = image.shape
        psf = make_wave_psf(M, N, P, run_config.wave.cycles, run_config.wave.amplitude_rad,
                            run_config.wave.oversample)
        wave_clean = forward(EncodingModel(maps=maps, psf=psf), image)
        wave = add_correlated_noise(wave_clean, noise, sigma, draw_index=0)

    logger.info("simulated scan %s with %d coils, sigma %.3g", dims, coils.n_coils, sigma)
    return ScanData(image=image, maps=maps, kspace=kspace, kspace_clean=clean, psf=psf,
                    wave_kspace=wave, reference=reference, noise=noise, sigma=sigma)


def reference_scan(clean, noise, sigma, size):
    """Center crop of an independently noised copy of the full k-space."""
    n_pe, n_pa = clean.shape[1:3]
    ref_pe = min(int(size[0]), n_pe)
    ref_pa = min(int(size[1]), n_pa) if n_pa > 1 else 1
    noisy = add_correlated_noise(clean, noise, sigma, draw_index=REFERENCE_DRAW_INDEX)
    pe0 = n_pe // 2 - ref_pe // 2
    pa0 = n_pa // 2 - ref_pa // 2
    return noisy[:, pe0:pe0 + ref_pe, pa0:pa0 + ref_pa, :].copy()


SCAN_FILES = {
    'image': ('image.kspc', 'tensor'),
    'maps': ('maps.kspc', 'maps'),
    'kspace': ('kspace.kspc', 'tensor'),
    'kspace_clean': ('kspace_clean.kspc', 'tensor'),
    'wave_kspace': ('wave.kspc', 'tensor'),
    'reference': ('reference.kspc', 'tensor'),
}


def save_scan(scan, directory):
    """Write every array of a scan as containers; returns the paths."""
    directory = Path(directory)
    paths = {}
    for name, (filename, kind) in SCAN_FILES.items():
        value = getattr(scan, name)
        if value is not None:
            paths[name] = write_container(directory / filename, value, kind)
    if scan.psf is not None:
        paths['psf'] = write_container(directory / 'psf.kspc', scan.psf.phase, 'psf')
    return paths


def load_scan(directory, run_config):
    """
    Read a scan written by save_scan.

    Raises
    ------
    FileNotFoundError
        If a required container is missing (the message names the path)
    """
    directory = Path(directory)
    values = {}
    for name, (filename, kind) in SCAN_FILES.items():
        path = directory / filename
        if name in ('image', 'maps', 'kspace') or path.is_file():
            values[name] = read_container(path, expected_kind=kind).data
    psf_path = directory / 'psf.kspc'
    if psf_path.is_file():
        values['psf'] = WavePsf(phase=read_container(psf_path, 'psf').data,
                                oversample=run_config.wave.oversample)
    return ScanData(noise=noise_model_for(run_config), sigma=run_config.noise.sigma, **values)


# ========================================
# MASKS AND CONFIGS
# ========================================

def build_mask(run_config, grid_shape):
    """
    Sampling mask of the configured kind over (n_pe, n_pa).

    Raises
    ------
    ValueError
        For an unknown kind
    """
    section = run_config.mask
    n_pe, n_pa = grid_shape
    R_pe, R_pa = (int(r) for r in section.accel)
    acs_pe, acs_pa = (int(a) for a in section.acs)

    if section.kind == 'uniform_1d':
        if n_pa != 1:
            raise ValueError(f"uniform_1d masks need 2D data, got grid {grid_shape}")
        return uniform_1d(n_pe, R_pe, acs_pe)
    if section.kind == 'uniform_2d':
        mask = uniform_2d(n_pe, n_pa, R_pe, R_pa, acs_pe, min(acs_pa, n_pa))
        return elliptical_filter(mask) if section.elliptical else mask
    if section.kind == 'caipi_2d':
        return caipi_2d(n_pe, n_pa, R_pe, R_pa, section.caipi_shift)
    if section.kind == 'hybrid':
        return hybrid_mask(n_pe, n_pa, acs_pe, acs_pa, tuple(section.acs_accel), (R_pe, R_pa),
                           section.elliptical)
    raise ValueError(
        f"mask.kind must be one of ['uniform_1d', 'uniform_2d', 'caipi_2d', 'hybrid'], got '{section.kind}'"
    )


def mask_for_config(run_config):
    """Mask matching the run config's method and phantom dims."""
    dims = list(run_config.phantom.dims)
    if normalize_method(run_config.method) == 'wave_slice_group':
        return slice_group_mask(run_config, dims[1])
    return build_mask(run_config, (dims[1], dims[2] if len(dims) == 3 else 1))


def default_arch(method):
    return 'net3d' if method in ('grappa3d', 'grappa3d_hybrid') else 'net2d'


def spark_config_for(run_config, method=None):
    section = run_config.spark
    return SparkConfig(
        arch=section.arch or default_arch(method or run_config.method),
        epochs=section.epochs,
        lr=section.lr,
        hidden_channels=section.hidden_channels,
        seed=run_config.seed,
        final_acs_replace=section.final_acs_replace,
        split_real_imag=section.split_real_imag,
        n_jobs=section.n_jobs,
    )


def raki_config_for(run_config):
    section = run_config.raki
    return RakiConfig(channels=section.channels, kernels=section.kernels, epochs=section.epochs,
                      lr=section.lr, seed=run_config.seed, n_jobs=run_config.spark.n_jobs)


def grappa_taps(run_config, is_3d):
    if run_config.grappa.taps:
        return tuple(run_config.grappa.taps)
    return config.GRAPPA_TAPS_3D if is_3d else config.GRAPPA_TAPS_2D


def normalize_method(method):
    return method.replace('-', '_')


# ========================================
# METHOD SETUPS
# ========================================

@dataclass
class MethodSetup:
    """Everything SPARK and the scoring need from one input method."""

    method: str
    y_acq: np.ndarray
    y_est: np.ndarray
    acs: AcsProjector
    baseline: np.ndarray
    to_image: object
    reference: np.ndarray
    extras: dict = field(default_factory=dict)


def cartesian_image(ksp):
    """Sum-of-squares magnitude image of cartesian k-space."""
    return sos_combine(kspace_to_image(ksp))


def _setup_grappa(method, scan, mask, run_config):
    if not mask.has_acs:
        raise ValueError(f"{method} needs a mask with an integrated ACS block")
    acquired = apply_mask(scan.kspace, mask)
    taps = grappa_taps(run_config, method == 'grappa3d')
    lam = run_config.grappa.lam
    extras = {}

    if mask.accel == (1, 1):
        y_est = acquired.copy()
    elif method == 'vc_grappa':
        y_est = vc_grappa(acquired, mask, taps=taps, lam=lam)
    else:
        kernel = calibrate(extract_acs(acquired, mask.acs_bounds), mask.accel, taps, lam)
        lattice = mask.lattice_only()
        y_est = interpolate(apply_mask(acquired, lattice), lattice, kernel)
        extras['kernel'] = kernel

    return MethodSetup(
        method=method,
        y_acq=acquired,
        y_est=y_est,
        acs=AcsProjector.from_mask(mask, acquired.shape[0]),
        baseline=acs_replace(y_est, acquired, mask.acs_bounds),
        to_image=cartesian_image,
        reference=scan.image,
        extras=extras,
    )


def _complete_hybrid_acs(acquired, mask, kernel_acs):
    """GRAPPA-complete the undersampled ACS block on the full grid."""
    block = mask.acs_region()
    block_mask = SamplingMask(grid=mask.grid & block, accel=mask.acs_accel)
    completed = interpolate(apply_mask(acquired, block_mask), block_mask, kernel_acs)
    return completed * block[None, :, :, None]


def _setup_hybrid(scan, mask, run_config):
    if scan.reference is None:
        raise ValueError("grappa3d_hybrid needs an external reference scan")
    taps = grappa_taps(run_config, True)
    lam = run_config.grappa.lam
    acquired = apply_mask(scan.kspace, mask)
    kernel_acs = calibrate(scan.reference, mask.acs_accel, taps, lam)
    kernel_ext = calibrate(scan.reference, mask.accel, taps, lam)

    block = mask.acs_region()
    completed = _complete_hybrid_acs(acquired, mask, kernel_acs)

    exterior_lattice = lattice_pattern(mask.shape, mask.accel)
    ext_grid = (mask.grid & ~block) | (exterior_lattice & block)
    ext_mask = SamplingMask(grid=ext_grid, accel=mask.accel)
    ext_data = apply_mask(acquired, mask.grid & ~block) + completed * (exterior_lattice & block)[None, :, :, None]
    y_est = interpolate(ext_data, ext_mask, kernel_ext)

    baseline_mask = elliptical_filter(uniform_2d(*mask.shape, *mask.accel))
    baseline = interpolate(apply_mask(scan.kspace, baseline_mask), baseline_mask, kernel_ext)

    return MethodSetup(
        method='grappa3d_hybrid',
        y_acq=completed,
        y_est=y_est,
        acs=AcsProjector.from_mask(mask, acquired.shape[0]),
        baseline=baseline,
        to_image=cartesian_image,
        reference=scan.image,
        extras={'baseline_mask': baseline_mask, 'net_acceleration': mask.net_acceleration,
                'baseline_net_acceleration': baseline_mask.net_acceleration},
    )


def _model_solver(E_full, run_config):
    def to_image(ksp):
        return np.abs(cg_solve(E_full, ksp, run_config.sense.max_iter, run_config.sense.tol).x)
    return to_image


def _setup_sense(method, scan, mask, run_config):
    if method == 'wave':
        if scan.psf is None or scan.wave_kspace is None:
            raise ValueError("wave method needs a wave PSF and wave k-space")
        data = scan.wave_kspace
        E = EncodingModel(maps=scan.maps, mask=mask, psf=scan.psf)
    elif scan.wave_kspace is not None and scan.psf is not None:
        data = deconvolve_wave(scan.wave_kspace, scan.psf)
        E = EncodingModel(maps=scan.maps, mask=mask, oversample=scan.psf.oversample)
    else:
        data = scan.kspace
        E = EncodingModel(maps=scan.maps, mask=mask)
    return _setup_model_based(method, data, E, mask, run_config, scan.image)


def _setup_model_based(method, data, E, mask, run_config, reference):
    """Shared path for SENSE, wave and slice-group models."""
    acquired = apply_mask(data, mask)
    iters, tol = run_config.sense.max_iter, run_config.sense.tol
    E_full = E.full()

    lattice = mask.lattice_only()
    x_est = cg_solve(replace(E, mask=lattice), apply_mask(acquired, lattice), iters, tol).x
    y_est = recon_to_kspace(x_est, E_full)

    x_base = cg_solve(E, acquired, iters, tol)
    return MethodSetup(
        method=method,
        y_acq=acquired,
        y_est=y_est,
        acs=AcsProjector.from_mask(mask, acquired.shape[0]),
        baseline=forward(E_full, x_base.x),
        to_image=_model_solver(E_full, run_config),
        reference=reference,
        extras={'x_est': x_est, 'baseline_residuals': x_base.data_residuals},
    )


def slice_indices(run_config, n_partitions):
    """Partitions collapsed into one slice group."""
    if run_config.mask.slices:
        return [int(s) for s in run_config.mask.slices]
    n_slices = int(run_config.mask.accel[1])
    spacing = n_partitions // n_slices
    start = spacing // 2
    return [start + k * spacing for k in range(n_slices)]


def slice_group_data(scan, run_config, mask, wave=True):
    """
    Collapsed k-space of one slice group and its encoding model.

    Cartesian and wave variants share one noise draw.
    """
    slices = slice_indices(run_config, scan.dims[2])
    truth = scan.image[:, :, slices]
    maps = scan.maps[:, :, slices, :]
    psf = None
    oversample = run_config.wave.oversample
    if wave:
        M, N, P = scan.dims
        psf = make_wave_psf(M, N, P, run_config.wave.cycles, run_config.wave.amplitude_rad,
                            oversample).slices(slices)
    E = slice_group_model(maps, psf, mask, run_config.mask.caipi_shift, oversample)
    clean = forward(E.full(), truth)
    noisy = add_correlated_noise(clean, scan.noise, scan.sigma, draw_index=0)
    return E, noisy, truth


def _setup_slice_group(scan, mask, run_config):
    if scan.dims[2] < int(run_config.mask.accel[1]):
        raise ValueError(f"wave_slice_group needs 3D data with at least {run_config.mask.accel[1]} partitions")
    E, data, truth = slice_group_data(scan, run_config, mask, wave=True)
    setup = _setup_model_based('wave_slice_group', data, E, mask, run_config, truth)

    E_cart, data_cart, _ = slice_group_data(scan, run_config, mask, wave=False)
    sense = cg_solve(E_cart, apply_mask(data_cart, mask), run_config.sense.max_iter, run_config.sense.tol)
    setup.extras['sense_image'] = np.abs(sense.x)
    return setup


def slice_group_mask(run_config, n_pe):
    """Phase-encode mask of the collapsed slice-group k-space."""
    return uniform_1d(n_pe, int(run_config.mask.accel[0]), int(run_config.mask.acs[0]))


def prepare_method(method, scan, mask, run_config):
    """
    Build the input reconstruction of one method.

    Raises
    ------
    ValueError
        On unknown methods or method/mask/data mismatches
    """
    method = normalize_method(method)
    if method in ('grappa', 'vc_grappa', 'grappa3d'):
        return _setup_grappa(method, scan, mask, run_config)
    if method == 'grappa3d_hybrid':
        return _setup_hybrid(scan, mask, run_config)
    if method in ('sense', 'wave'):
        return _setup_sense(method, scan, mask, run_config)
    if method == 'wave_slice_group':
        return _setup_slice_group(scan, mask, run_config)
    raise ValueError(f"Unknown method '{method}'")


# ========================================
# PIPELINES
# ========================================

@dataclass
class PipelineResult:
    """Corrected and baseline images with their scores."""

    method: str
    image: np.ndarray
    baseline_image: np.ndarray
    reference: np.ndarray
    rmse_spark: float
    rmse_baseline: float
    spark: object = None
    setup: MethodSetup = None
    slice_rmse_spark: list = field(default_factory=list)
    slice_rmse_baseline: list = field(default_factory=list)

    def records(self):
        out = {
            'method': self.method,
            'rmse_baseline': self.rmse_baseline,
            'rmse_spark': self.rmse_spark,
        }
        for index, (base, corrected) in enumerate(zip(self.slice_rmse_baseline, self.slice_rmse_spark)):
            out[f'slice{index}_rmse_baseline'] = base
            out[f'slice{index}_rmse_spark'] = corrected
        if self.spark is not None:
            out['loss_initial'] = float(np.mean([h[0] for h in self.spark.loss_histories]))
            out['loss_final'] = float(np.mean([h[-1] for h in self.spark.loss_histories]))
        return out


def run_baseline(method, scan, mask, run_config):
    """Input method alone (with ACS replacement where it applies)."""
    setup = prepare_method(method, scan, mask, run_config)
    return setup, setup.to_image(setup.baseline)


def spark_pipeline(method, scan, mask, run_config, cfg=None):
    """
    Input reconstruction -> SPARK correction -> images and RMSE.

    Parameters
    ----------
    method : str
        grappa, vc_grappa, grappa3d, grappa3d_hybrid, sense, wave or
        wave_slice_group
    scan : ScanData
    mask : SamplingMask
    run_config : RunConfig
    cfg : SparkConfig, optional
        Overrides the run config's SPARK section

    Returns
    -------
    PipelineResult
    """
    method = normalize_method(method)
    setup = prepare_method(method, scan, mask, run_config)
    if cfg is None:
        cfg = spark_config_for(run_config, method)

    baseline_image = setup.to_image(setup.baseline)
    if mask.accel == (1, 1) and method in ('grappa', 'vc_grappa', 'grappa3d'):
        image, spark = baseline_image, None
    else:
        spark = spark_correct(setup.y_acq, setup.y_est, setup.acs, cfg)
        image = setup.to_image(spark.kspace)

    result = PipelineResult(
        method=method,
        image=image,
        baseline_image=baseline_image,
        reference=setup.reference,
        rmse_spark=rmse_percent(image, setup.reference),
        rmse_baseline=rmse_percent(baseline_image, setup.reference),
        spark=spark,
        setup=setup,
    )
    if method == 'wave_slice_group':
        result.slice_rmse_spark = slice_rmse(image, setup.reference)
        result.slice_rmse_baseline = slice_rmse(baseline_image, setup.reference)
    logger.info("%s: baseline %.2f%%, SPARK %.2f%%", method, result.rmse_baseline, result.rmse_spark)
    return result


def raki_pipeline(scan, mask, run_config):
    """RAKI image and RMSE on cartesian k-space."""
    acquired = apply_mask(scan.kspace, mask)
    ksp = raki_reconstruct(acquired, mask, cfg=raki_config_for(run_config))
    image = cartesian_image(ksp)
    return image, rmse_percent(image, scan.image)


# ========================================
# PSEUDO-REPLICAS
# ========================================

def replica_recon_functions(setup, scan, mask, spark_result, final_acs_replace=True):
    """
    GRAPPA and GRAPPA+SPARK replica reconstructions with frozen calibration.

    Returns
    -------
    tuple of callables
        (grappa_fn, spark_fn), each acquired k-space -> complex image
    """
    if 'kernel' not in setup.extras:
        raise ValueError(f"pseudo-replica needs a GRAPPA input method, got '{setup.method}'")
    kernel = setup.extras['kernel']
    lattice = mask.lattice_only()

    def combine(ksp):
        return complex_combine(kspace_to_image(ksp), scan.maps)

    def grappa_fn(acquired):
        y_est = interpolate(apply_mask(acquired, lattice), lattice, kernel)
        return combine(acs_replace(y_est, acquired, mask.acs_bounds))

    def spark_fn(acquired):
        y_est = interpolate(apply_mask(acquired, lattice), lattice, kernel)
        corrections = np.stack([estimate_correction(model, y_est) for model in spark_result.models], axis=-1)
        corrected = y_est + corrections
        if final_acs_replace:
            corrected = acs_replace(corrected, acquired, mask.acs_bounds)
        return combine(corrected)

    return grappa_fn, spark_fn


def pseudo_replica_comparison(scan, mask, run_config, method='grappa', n_replicas=None):
    """
    Pseudo-replica reports of the GRAPPA input and its SPARK correction.

    Returns
    -------
    dict
        'grappa' -> EvalReport, 'spark' -> EvalReport
    """
    if scan.kspace_clean is None:
        raise ValueError("pseudo-replica needs the noise-free k-space")
    if n_replicas is None:
        n_replicas = run_config.metrics.n_replicas
    cfg = spark_config_for(run_config, method)
    setup = prepare_method(method, scan, mask, run_config)
    spark = spark_correct(setup.y_acq, setup.y_est, setup.acs, cfg)
    grappa_fn, spark_fn = replica_recon_functions(setup, scan, mask, spark, cfg.final_acs_replace)

    reports = {}
    for name, fn in (('grappa', grappa_fn), ('spark', spark_fn)):
        reports[name] = pseudo_replica(
            fn, scan.kspace_clean, mask, scan.noise, scan.sigma, n_replicas,
            reference=scan.image, n_jobs=run_config.metrics.n_jobs,
            original=fn(apply_mask(scan.kspace, mask)),
        )
    return reports


def load_inputs(data_dir, mask_path, run_config):
    """Scan plus mask from disk."""
    return load_scan(data_dir, run_config), load_mask(mask_path)
