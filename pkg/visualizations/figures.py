"""
Comparison Figures
==================

Side-by-side reconstruction and error panels, k-space correction maps,
and SPARK loss curves rendered with matplotlib.
"""

import logging
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt

from .export import display_slice, kspace_log_magnitude
import config

logger = logging.getLogger(__name__)


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=config.FIGURE_DPI, bbox_inches='tight')
    plt.close(fig)
    logger.debug("saved figure %s", path)
    return path


def comparison_panel(images, reference, path, error_gain=None, partition=None):
    """
    Reconstructions in the top row, gained error maps below.

    Parameters
    ----------
    images : dict
        Method name -> magnitude image
    reference : ndarray
        Ground-truth magnitude image
    path : str or Path
        PNG destination
    error_gain : float, optional
        Error maps are windowed to max(reference) / error_gain

    Returns
    -------
    Path
    """
    from kspace_engine.metrics import rmse_percent

    if error_gain is None:
        error_gain = config.ERROR_GAIN
    reference = np.abs(np.asarray(reference))
    ref_view = display_slice(reference, partition)
    vmax = float(np.max(ref_view)) or 1.0

    fig, axes = plt.subplots(2, len(images), figsize=(3 * len(images), 6), squeeze=False)
    for column, (name, image) in enumerate(images.items()):
        view = display_slice(np.abs(image), partition)
        axes[0, column].imshow(view, cmap=config.IMAGE_CMAP, vmin=0, vmax=vmax)
        axes[0, column].set_title(f"{name}\n{rmse_percent(np.abs(image), reference):.2f}%")
        axes[1, column].imshow(np.abs(view - ref_view), cmap=config.IMAGE_CMAP,
                               vmin=0, vmax=vmax / error_gain)
        axes[1, column].set_title(f"error x{error_gain:g}")
        for ax in axes[:, column]:
            ax.axis('off')
    return _save(fig, path)


def correction_maps(y_est, corrections, path, coil=0, partition=None):
    """Log-magnitude k-space of the input estimate and of the learned correction."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    panels = [('input k-space', y_est), ('correction', corrections)]
    for ax, (title, ksp) in zip(axes, panels):
        ax.imshow(display_slice(kspace_log_magnitude(ksp, coil), partition), cmap=config.KSPACE_CMAP)
        ax.set_title(f"{title} (coil {coil})")
        ax.axis('off')
    return _save(fig, path)


def loss_curves(histories, path):
    """Per-coil ACS loss against epoch on a log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for coil, history in enumerate(histories):
        ax.semilogy(history, linewidth=1, label=f"coil {coil}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("ACS loss")
    if len(histories) <= 8:
        ax.legend(fontsize='small')
    return _save(fig, path)
