"""
Phantom and Coil Simulation
===========================

Analytic ellipse phantoms, ring-array coil sensitivities, multi-coil
k-space synthesis, and correlated receiver noise.

Random draws use a counter-based Philox generator keyed by
(seed, draw_index) so replicas are reproducible in any order.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .tensors import image_to_kspace
import config

logger = logging.getLogger(__name__)


# ========================================
# PHANTOM DEFINITIONS
# ========================================

@dataclass(frozen=True)
class Ellipse:
    """One additive ellipse (2D) or ellipsoid (3D) in normalized coordinates."""

    center: tuple
    semi_axes: tuple
    angle: float = 0.0
    intensity: float = 1.0


@dataclass
class PhantomSpec:
    """A phantom is the intensity-weighted sum of its ellipse indicators."""

    ellipses: list = field(default_factory=list)

    def __post_init__(self):
        if not self.ellipses:
            raise ValueError("PhantomSpec needs at least one ellipse")
        for ellipse in self.ellipses:
            if len(ellipse.center) != len(ellipse.semi_axes):
                raise ValueError(
                    f"Ellipse center {ellipse.center} and semi-axes {ellipse.semi_axes} differ in rank"
                )
            if any(a <= 0 for a in ellipse.semi_axes):
                raise ValueError(f"Semi-axes must be > 0, got {ellipse.semi_axes}")

    @property
    def ndim(self):
        return len(self.ellipses[0].center)


# Modified head phantom, (intensity, semi-axes, center, angle in degrees).
# Axis 0 is the vertical image axis, axis 1 the horizontal one.
_HEAD_2D = [
    (1.0, (0.9200, 0.6900), (0.0, 0.0), 0),
    (-0.8, (0.8740, 0.6624), (-0.0184, 0.0), 0),
    (-0.2, (0.3100, 0.1100), (0.0, 0.22), -18),
    (-0.2, (0.4100, 0.1600), (0.0, -0.22), 18),
    (0.1, (0.2500, 0.2100), (0.35, 0.0), 0),
    (0.1, (0.0460, 0.0460), (0.1, 0.0), 0),
    (0.1, (0.0460, 0.0460), (-0.1, 0.0), 0),
    (0.1, (0.0230, 0.0460), (-0.605, -0.08), 0),
    (0.1, (0.0230, 0.0230), (-0.606, 0.0), 0),
    (0.1, (0.0460, 0.0230), (-0.605, 0.06), 0),
]

_HEAD_3D = [
    (1.0, (0.920, 0.6900, 0.810), (0.0, 0.0, 0.0), 0),
    (-0.8, (0.874, 0.6624, 0.780), (-0.0184, 0.0, 0.0), 0),
    (-0.2, (0.310, 0.1100, 0.220), (0.0, 0.22, 0.0), -18),
    (-0.2, (0.410, 0.1600, 0.280), (0.0, -0.22, 0.0), 18),
    (0.1, (0.250, 0.2100, 0.410), (0.35, 0.0, -0.15), 0),
    (0.1, (0.046, 0.0460, 0.050), (0.1, 0.0, 0.25), 0),
    (0.1, (0.046, 0.0460, 0.050), (-0.1, 0.0, 0.25), 0),
    (0.1, (0.023, 0.0460, 0.050), (-0.605, -0.08, 0.0), 0),
    (0.1, (0.023, 0.0230, 0.020), (-0.606, 0.0, 0.0), 0),
    (0.1, (0.046, 0.0230, 0.020), (-0.605, 0.06, 0.0), 0),
]


def shepp_logan_spec(ndim=2):
    """
    The classic 10-ellipse head phantom.

    Parameters
    ----------
    ndim : int
        2 for ellipses, 3 for ellipsoids

    Returns
    -------
    PhantomSpec
    """
    if ndim not in (2, 3):
        raise ValueError(f"Phantom rank must be 2 or 3, got {ndim}")
    table = _HEAD_2D if ndim == 2 else _HEAD_3D
    ellipses = [
        Ellipse(center=center, semi_axes=axes, angle=np.deg2rad(angle), intensity=value)
        for value, axes, center, angle in table
    ]
    return PhantomSpec(ellipses=ellipses)


def normalized_grid(dims):
    """
    Normalized coordinates in [-1, 1) with zero at index n // 2.

    Returns a list of broadcastable coordinate arrays, one per axis.
    """
    coords = [(np.arange(n) - n // 2) / (n / 2) for n in dims]
    return np.meshgrid(*coords, indexing='ij')


def generate_phantom(spec=None, dims=None):
    """
    Rasterize a phantom on a voxel grid.

    Parameters
    ----------
    spec : PhantomSpec, optional
        Ellipses to draw; defaults to the head phantom of matching rank
    dims : tuple of int
        (M, N) or (M, N, P)

    Returns
    -------
    float ndarray
        Image of shape (M, N, P); P = 1 for 2D dims

    Raises
    ------
    ValueError
        If dims is not rank 2 or 3, or spec rank differs from dims rank
    """
    if dims is None:
        dims = config.DEFAULT_MATRIX_2D
    dims = tuple(int(n) for n in dims)
    if len(dims) not in (2, 3):
        raise ValueError(f"Phantom dims must have rank 2 or 3, got {dims}")
    if spec is None:
        spec = shepp_logan_spec(len(dims))
    if spec.ndim != len(dims):
        raise ValueError(f"Phantom spec rank {spec.ndim} does not match dims {dims}")

    grid = normalized_grid(dims)
    image = np.zeros(dims, dtype=float)

    for ellipse in spec.ellipses:
        u = grid[0] - ellipse.center[0]
        v = grid[1] - ellipse.center[1]
        cos_a, sin_a = np.cos(ellipse.angle), np.sin(ellipse.angle)
        ru = cos_a * u + sin_a * v
        rv = -sin_a * u + cos_a * v
        radius = (ru / ellipse.semi_axes[0]) ** 2 + (rv / ellipse.semi_axes[1]) ** 2
        if len(dims) == 3:
            radius = radius + ((grid[2] - ellipse.center[2]) / ellipse.semi_axes[2]) ** 2
        image[radius <= 1.0] += ellipse.intensity

    if len(dims) == 2:
        image = image[:, :, None]
    return image


# ========================================
# COIL SENSITIVITIES
# ========================================

@dataclass
class CoilGeometry:
    """Gaussian-lobe receive coils evenly spaced on a ring."""

    n_coils: int = config.DEFAULT_N_COILS
    ring_radius: float = config.COIL_RING_RADIUS
    width: float = config.COIL_WIDTH
    phase_slope: float = config.COIL_PHASE_SLOPE
    phase_curvature: float = config.COIL_PHASE_CURVATURE
    z_offset: float = config.COIL_Z_OFFSET

    def __post_init__(self):
        if self.n_coils < 1:
            raise ValueError(f"n_coils must be >= 1, got {self.n_coils}")
        if self.width <= 0:
            raise ValueError(f"Coil width must be > 0, got {self.width}")


def generate_sensitivities(geom=None, dims=None):
    """
    Complex coil sensitivity maps normalized to unit sum-of-squares.

    Magnitudes are Gaussian lobes around coil centers on a ring; phases are
    a linear ramp toward each coil plus a quadratic term.

    Parameters
    ----------
    geom : CoilGeometry, optional
    dims : tuple of int
        (M, N) or (M, N, P)

    Returns
    -------
    complex ndarray
        Maps of shape (M, N, P, C)
    """
    if geom is None:
        geom = CoilGeometry()
    if dims is None:
        dims = config.DEFAULT_MATRIX_2D
    dims = tuple(int(n) for n in dims)
    if len(dims) not in (2, 3):
        raise ValueError(f"Sensitivity dims must have rank 2 or 3, got {dims}")

    grid = normalized_grid(dims)
    raw = np.zeros(dims + (geom.n_coils,), dtype=complex)

    for c in range(geom.n_coils):
        theta = 2 * np.pi * c / geom.n_coils
        direction = (np.cos(theta), np.sin(theta))
        distance = (
            (grid[0] - geom.ring_radius * direction[0]) ** 2
            + (grid[1] - geom.ring_radius * direction[1]) ** 2
        )
        if len(dims) == 3:
            z_center = geom.z_offset if c % 2 == 0 else -geom.z_offset
            distance = distance + (grid[2] - z_center) ** 2

        magnitude = np.exp(-distance / (2 * geom.width ** 2))
        along = direction[0] * grid[0] + direction[1] * grid[1]
        across = direction[1] * grid[0] - direction[0] * grid[1]
        phase = geom.phase_slope * along + geom.phase_curvature * across ** 2
        raw[..., c] = magnitude * np.exp(1j * phase)

    sos = np.sqrt(np.sum(np.abs(raw) ** 2, axis=-1, keepdims=True))
    maps = np.zeros_like(raw)
    np.divide(raw, sos, out=maps, where=sos > 0)

    if len(dims) == 2:
        maps = maps[:, :, None, :]
    return maps


def synthesize_kspace(image, maps):
    """
    Fully sampled multi-coil k-space: per coil fftc(image · S_c).

    Parameters
    ----------
    image : ndarray
        (M, N, P) image (or (M, N), promoted)
    maps : complex ndarray
        (M, N, P, C) sensitivities

    Returns
    -------
    complex ndarray
        (M, N, P, C) k-space
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.shape != maps.shape[:3]:
        raise ValueError(f"Image dims {image.shape} do not match map dims {maps.shape[:3]}")
    return image_to_kspace(image[..., None] * maps)


# ========================================
# NOISE
# ========================================

@dataclass
class NoiseModel:
    """Coil-noise covariance plus the seed keying every draw."""

    covariance: np.ndarray
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        self.covariance = np.atleast_2d(np.asarray(self.covariance, dtype=complex))
        validate_covariance(self.covariance)

    @property
    def n_coils(self):
        return self.covariance.shape[0]


def validate_covariance(covariance):
    """
    Check that a covariance matrix is square, Hermitian and PSD.

    Raises
    ------
    ValueError
        If any condition fails
    """
    if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
        raise ValueError(f"Covariance must be square, got shape {covariance.shape}")
    asymmetry = np.max(np.abs(covariance - covariance.conj().T))
    if asymmetry > config.HERMITIAN_TOLERANCE:
        raise ValueError(f"Covariance must be Hermitian, got asymmetry {asymmetry:.3e}")
    smallest = np.min(np.linalg.eigvalsh(covariance))
    if smallest < -config.PSD_TOLERANCE:
        raise ValueError(f"Covariance must be positive semidefinite, got eigenvalue {smallest:.3e}")


def make_noise_model(n_coils, correlation=None, seed=None):
    """
    Uniform-correlation covariance (1 on the diagonal, `correlation` off it).

    Parameters
    ----------
    n_coils : int
    correlation : float, optional
        Off-diagonal value in [0, 1)
    seed : int, optional

    Returns
    -------
    NoiseModel
    """
    if correlation is None:
        correlation = config.DEFAULT_NOISE_CORRELATION
    if seed is None:
        seed = config.DEFAULT_SEED
    if not 0.0 <= correlation < 1.0:
        raise ValueError(f"Noise correlation must lie in [0, 1), got {correlation}")
    covariance = (1 - correlation) * np.eye(n_coils) + correlation * np.ones((n_coils, n_coils))
    return NoiseModel(covariance=covariance, seed=seed)


def noise_generator(seed, draw_index=0):
    """Philox generator keyed by (seed, draw_index)."""
    sequence = np.random.SeedSequence([int(seed) % 2 ** 64, int(draw_index)])
    return np.random.Generator(np.random.Philox(sequence))


def _covariance_factor(covariance):
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        # singular PSD matrices have no Cholesky factor
        values, vectors = np.linalg.eigh(covariance)
        return vectors * np.sqrt(np.clip(values, 0.0, None))


def add_correlated_noise(ksp, noise, sigma, draw_index=0):
    """
    Add complex Gaussian noise correlated across the coil axis.

    output = input + sigma · L·w, with L Lᴴ = covariance and w i.i.d. unit
    complex Gaussian (E|w|² = 1).

    Parameters
    ----------
    ksp : complex ndarray
        (..., C) k-space
    noise : NoiseModel
    sigma : float
        Noise scale; 0 returns an unchanged copy
    draw_index : int
        Independent stream index (replica number)

    Returns
    -------
    complex ndarray
    """
    if noise.n_coils != ksp.shape[-1]:
        raise ValueError(
            f"Covariance dimension {noise.n_coils} does not match coil count {ksp.shape[-1]}"
        )
    if sigma == 0:
        return ksp.copy()

    factor = _covariance_factor(noise.covariance)
    rng = noise_generator(noise.seed, draw_index)
    white = (rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape)) / np.sqrt(2)
    return ksp + sigma * (white @ factor.T)


def estimate_noise_covariance(noise_samples):
    """
    Sample coil-noise covariance (1/K)·N·Nᴴ.

    Parameters
    ----------
    noise_samples : complex ndarray
        C x K noise-only samples

    Returns
    -------
    complex ndarray
        C x C Hermitian matrix (zeros when K = 0)
    """
    samples = np.atleast_2d(np.asarray(noise_samples, dtype=complex))
    n_coils, n_samples = samples.shape
    if n_samples == 0:
        return np.zeros((n_coils, n_coils), dtype=complex)
    covariance = samples @ samples.conj().T / n_samples
    return 0.5 * (covariance + covariance.conj().T)
