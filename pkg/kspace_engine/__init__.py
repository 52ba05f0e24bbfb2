"""
K-space Engine Module
=====================

Core k-space calculations for the SPARK toolkit.

This module contains:
- Centered FFTs and coil combination
- Phantom, coil sensitivity and noise simulation
- Undersampling patterns
- GRAPPA and VC-GRAPPA
- SENSE / wave encoding and CG inversion
- RMSE and pseudo-replica metrics

Author: Justin D
Version: 0.1.0
"""

from .tensors import (
    fftc,
    ifftc,
    sos_combine,
    complex_combine,
    crop_center,
    pad_center,
    kspace_to_image,
    image_to_kspace
)

from .phantom import (
    Ellipse,
    PhantomSpec,
    CoilGeometry,
    NoiseModel,
    shepp_logan_spec,
    generate_phantom,
    generate_sensitivities,
    synthesize_kspace,
    add_correlated_noise,
    estimate_noise_covariance,
    make_noise_model
)

from .sampling import (
    SamplingMask,
    uniform_1d,
    uniform_2d,
    caipi_2d,
    elliptical_filter,
    hybrid_mask,
    apply_mask
)

from .grappa import (
    GrappaKernel,
    calibrate,
    interpolate,
    acs_replace,
    make_virtual_coils,
    vc_grappa,
    grappa_reconstruct
)

from .sense_wave import (
    WavePsf,
    EncodingModel,
    make_wave_psf,
    forward,
    adjoint,
    cg_solve,
    recon_to_kspace,
    deconvolve_wave,
    slice_group_model
)

from .metrics import (
    EvalReport,
    rmse_percent,
    pseudo_replica
)

__all__ = [
    # Tensors
    'fftc',
    'ifftc',
    'sos_combine',
    'complex_combine',
    'crop_center',
    'pad_center',
    'kspace_to_image',
    'image_to_kspace',

    # Phantom
    'Ellipse',
    'PhantomSpec',
    'CoilGeometry',
    'NoiseModel',
    'shepp_logan_spec',
    'generate_phantom',
    'generate_sensitivities',
    'synthesize_kspace',
    'add_correlated_noise',
    'estimate_noise_covariance',
    'make_noise_model',

    # Sampling
    'SamplingMask',
    'uniform_1d',
    'uniform_2d',
    'caipi_2d',
    'elliptical_filter',
    'hybrid_mask',
    'apply_mask',

    # GRAPPA
    'GrappaKernel',
    'calibrate',
    'interpolate',
    'acs_replace',
    'make_virtual_coils',
    'vc_grappa',
    'grappa_reconstruct',

    # SENSE / wave
    'WavePsf',
    'EncodingModel',
    'make_wave_psf',
    'forward',
    'adjoint',
    'cg_solve',
    'recon_to_kspace',
    'deconvolve_wave',
    'slice_group_model',

    # Metrics
    'EvalReport',
    'rmse_percent',
    'pseudo_replica'
]

__version__ = '0.1.0'
__author__ = 'Justin D'
