"""
Scan Networks Module
====================

Scan-specific neural networks trained on a single acquisition.

This module contains:
- A bias-free convolution engine with exact gradients
- MSE loss and ADAM
- The 2D and 3D SPARK correction networks
- SPARK training and correction
- The RAKI interpolation baseline

Author: Justin D
Version: 0.1.0
"""

from .layers import (
    ConvLayer,
    Network,
    conv_forward,
    conv_backward,
    relu,
    custom_nl,
    net_forward,
    net_backward
)

from .optim import (
    AdamState,
    mse_loss,
    adam_step,
    gradient_check
)

from .architectures import (
    net2d,
    net3d,
    build_network
)

from .spark import (
    SparkConfig,
    AcsProjector,
    CorrectionModel,
    SparkResult,
    pack_input,
    unpack,
    train_coil_model,
    estimate_correction,
    apply_correction,
    spark_correct,
    models_to_array,
    models_from_array
)

from .raki import (
    RakiConfig,
    raki_reconstruct
)

__all__ = [
    # Layers
    'ConvLayer',
    'Network',
    'conv_forward',
    'conv_backward',
    'relu',
    'custom_nl',
    'net_forward',
    'net_backward',

    # Optimization
    'AdamState',
    'mse_loss',
    'adam_step',
    'gradient_check',

    # Architectures
    'net2d',
    'net3d',
    'build_network',

    # SPARK
    'SparkConfig',
    'AcsProjector',
    'CorrectionModel',
    'SparkResult',
    'pack_input',
    'unpack',
    'train_coil_model',
    'estimate_correction',
    'apply_correction',
    'spark_correct',
    'models_to_array',
    'models_from_array',

    # RAKI
    'RakiConfig',
    'raki_reconstruct'
]

__version__ = '0.1.0'
__author__ = 'Justin D'
