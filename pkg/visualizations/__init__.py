"""
Visualizations Module
=====================

Image export and comparison figures for reconstructions.

This module contains:
- 8-bit PGM export of images, error maps and k-space magnitude
- Comparison panels with RMSE titles
- k-space correction maps and SPARK loss curves

Author: Justin D
Version: 0.1.0
"""

from .export import (
    display_slice,
    window_image,
    export_pgm,
    export_error_map,
    kspace_log_magnitude
)

from .figures import (
    comparison_panel,
    correction_maps,
    loss_curves
)

__all__ = [
    # Export
    'display_slice',
    'window_image',
    'export_pgm',
    'export_error_map',
    'kspace_log_magnitude',

    # Figures
    'comparison_panel',
    'correction_maps',
    'loss_curves'
]

__version__ = '0.1.0'
__author__ = 'Justin D'
