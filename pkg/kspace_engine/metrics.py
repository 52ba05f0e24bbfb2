"""
Reconstruction Metrics
======================

Percent RMSE on magnitude images and the pseudo-replica retained-SNR
analysis.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .phantom import add_correlated_noise
from .sampling import apply_mask
import config

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """
    Evaluation summary of one reconstruction method.

    Attributes
    ----------
    rmse_percent : float
        RMSE of the original reconstruction (nan without a reference)
    slice_rmse : list
        Per-slice RMSE for slice-group reconstructions
    replica_rmse_mean, replica_rmse_std : float
        Spread of replica RMSEs
    proxy_map : ndarray
        Retained-SNR proxy |original| / std
    std_map : ndarray
        Standard deviation of the real part across replicas
    zero_std_count : int
        Voxels with zero std (proxy reported as 0)
    support_proxy_mean : float
        Proxy averaged over the object support
    n_replicas : int
    """

    rmse_percent: float = float('nan')
    slice_rmse: list = field(default_factory=list)
    replica_rmse_mean: float = float('nan')
    replica_rmse_std: float = float('nan')
    proxy_map: np.ndarray = None
    std_map: np.ndarray = None
    zero_std_count: int = 0
    support_proxy_mean: float = float('nan')
    n_replicas: int = 0

    @property
    def replica_cv(self):
        """Coefficient of variation of the replica RMSEs."""
        if not self.replica_rmse_mean:
            return float('nan')
        return self.replica_rmse_std / self.replica_rmse_mean

    def records(self):
        """Flat key -> value mapping for report output."""
        out = {
            'rmse_percent': self.rmse_percent,
            'replica_rmse_mean': self.replica_rmse_mean,
            'replica_rmse_std': self.replica_rmse_std,
            'support_proxy_mean': self.support_proxy_mean,
            'zero_std_count': self.zero_std_count,
            'n_replicas': self.n_replicas,
        }
        for index, value in enumerate(self.slice_rmse):
            out[f'slice{index}_rmse_percent'] = value
        return out


def rmse_percent(recon, reference):
    """
    100·‖recon − reference‖ / ‖reference‖.

    Raises
    ------
    ValueError
        On shape mismatch or a zero reference
    """
    recon = np.asarray(recon)
    reference = np.asarray(reference)
    if recon.shape != reference.shape:
        raise ValueError(f"Shapes differ: recon {recon.shape}, reference {reference.shape}")
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0:
        raise ValueError("Reference image has zero norm")
    return float(100.0 * np.linalg.norm(recon - reference) / ref_norm)


def slice_rmse(recon, reference, axis=2):
    """Percent RMSE of every slice along `axis`."""
    recon = np.moveaxis(np.asarray(recon), axis, 0)
    reference = np.moveaxis(np.asarray(reference), axis, 0)
    return [rmse_percent(r, ref) for r, ref in zip(recon, reference)]


def error_map(recon, reference):
    """Voxelwise absolute error."""
    return np.abs(np.asarray(recon) - np.asarray(reference))


def support_mask(reference):
    """Object support of a ground-truth image."""
    return np.abs(np.asarray(reference)) > 0


def pseudo_replica(recon_fn, ksp_full, mask, noise, sigma, n_replicas=None,
                   reference=None, support=None, original=None, n_jobs=None):
    """
    Pseudo-replica noise analysis with fixed calibration.

    Replica r adds correlated noise with draw index r + 1 to ksp_full,
    undersamples, and reconstructs with recon_fn. Calibration must already
    be frozen inside recon_fn.

    Parameters
    ----------
    recon_fn : callable
        Acquired k-space -> complex combined image
    ksp_full : complex ndarray
        Noise-free fully sampled k-space
    mask : SamplingMask
    noise : NoiseModel
    sigma : float
    n_replicas : int, optional
        At least 2
    reference : ndarray, optional
        Ground-truth magnitude image for RMSE
    support : bool ndarray, optional
        Averaging region for the proxy (defaults to reference > 0)
    original : complex ndarray, optional
        Original reconstruction; computed from draw 0 when omitted
    n_jobs : int, optional
        Parallel replica workers

    Returns
    -------
    EvalReport
    """
    if n_replicas is None:
        n_replicas = config.DEFAULT_REPLICAS
    if n_replicas < 2:
        raise ValueError(f"n_replicas must be >= 2, got {n_replicas}")
    if n_jobs is None:
        n_jobs = config.DEFAULT_N_JOBS

    if original is None:
        original = recon_fn(apply_mask(add_correlated_noise(ksp_full, noise, sigma, 0), mask))

    def run_replica(index):
        noisy = add_correlated_noise(ksp_full, noise, sigma, draw_index=index + 1)
        return recon_fn(apply_mask(noisy, mask))

    indices = range(n_replicas)
    if config.SHOW_PROGRESS:
        indices = tqdm(indices, desc='replicas', leave=False)
    replicas = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(run_replica)(index) for index in indices
    )
    stack = np.stack(replicas, axis=0)

    std_map = np.std(np.real(stack), axis=0, ddof=1)
    zero = std_map == 0
    proxy = np.zeros(std_map.shape)
    np.divide(np.abs(original), std_map, out=proxy, where=~zero)
    zero_count = int(np.count_nonzero(zero))
    if zero_count:
        logger.warning("pseudo-replica: %d voxels with zero std, proxy set to 0", zero_count)

    report = EvalReport(
        proxy_map=proxy,
        std_map=std_map,
        zero_std_count=zero_count,
        n_replicas=n_replicas,
    )

    if reference is not None:
        reference = np.asarray(reference)
        report.rmse_percent = rmse_percent(np.abs(original), reference)
        replica_rmse = [rmse_percent(np.abs(image), reference) for image in stack]
        report.replica_rmse_mean = float(np.mean(replica_rmse))
        report.replica_rmse_std = float(np.std(replica_rmse, ddof=1))
        if support is None:
            support = support_mask(reference)

    if support is not None and np.any(support):
        report.support_proxy_mean = float(np.mean(proxy[support]))

    logger.info("pseudo-replica: %d replicas, mean support proxy %.3f",
                n_replicas, report.support_proxy_mean)
    return report
