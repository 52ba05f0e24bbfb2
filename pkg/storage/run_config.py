"""
Run Configuration
=================

JSON run configuration parsed into section dataclasses. Every field
defaults to the value in config.py; unknown keys are rejected with the
dotted path of the offending key.
"""

import json
import logging
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import config

logger = logging.getLogger(__name__)

METHODS = ['grappa', 'vc_grappa', 'sense', 'wave', 'wave_slice_group', 'grappa3d', 'grappa3d_hybrid']


@dataclass
class PhantomSection:
    dims: list = field(default_factory=lambda: list(config.DEFAULT_MATRIX_2D))
    name: str = config.DEFAULT_PHANTOM


@dataclass
class CoilSection:
    n_coils: int = config.DEFAULT_N_COILS
    ring_radius: float = config.COIL_RING_RADIUS
    width: float = config.COIL_WIDTH
    phase_slope: float = config.COIL_PHASE_SLOPE
    phase_curvature: float = config.COIL_PHASE_CURVATURE
    z_offset: float = config.COIL_Z_OFFSET


@dataclass
class NoiseSection:
    sigma: float = config.DEFAULT_NOISE_SIGMA
    correlation: float = config.DEFAULT_NOISE_CORRELATION


@dataclass
class MaskSection:
    """Sampling pattern; `kind` picks the generator."""

    kind: str = 'uniform_1d'
    accel: list = field(default_factory=lambda: list(config.DEFAULT_ACCEL))
    acs: list = field(default_factory=lambda: [config.DEFAULT_ACS_LINES, 1])
    acs_accel: list = field(default_factory=lambda: list(config.HYBRID_ACS_ACCEL))
    caipi_shift: int = config.DEFAULT_CAIPI_SHIFT
    elliptical: bool = False
    reference: list = field(default_factory=lambda: list(config.REFERENCE_SIZE))
    slices: list = field(default_factory=list)


@dataclass
class GrappaSection:
    taps: list = None
    lam: float = config.GRAPPA_LAMBDA
    lambda_sweep: list = field(default_factory=lambda: list(config.GRAPPA_LAMBDA_SWEEP))


@dataclass
class SenseSection:
    max_iter: int = config.SENSE_MAX_ITER
    tol: float = config.SENSE_TOL


@dataclass
class WaveSection:
    oversample: int = config.WAVE_OVERSAMPLE
    cycles: float = config.WAVE_CYCLES
    amplitude_rad: float = config.WAVE_AMPLITUDE_RAD


@dataclass
class SparkSection:
    arch: str = None
    epochs: int = config.SPARK_EPOCHS
    lr: float = config.SPARK_LR
    hidden_channels: int = None
    final_acs_replace: bool = config.SPARK_FINAL_ACS_REPLACE
    split_real_imag: bool = config.SPARK_SPLIT_REAL_IMAG
    n_jobs: int = config.DEFAULT_N_JOBS


@dataclass
class RakiSection:
    channels: list = field(default_factory=lambda: list(config.RAKI_CHANNELS))
    kernels: list = field(default_factory=lambda: [list(k) for k in config.RAKI_KERNELS])
    epochs: int = config.RAKI_EPOCHS
    lr: float = config.RAKI_LR


@dataclass
class MetricsSection:
    n_replicas: int = config.DEFAULT_REPLICAS
    window: list = None
    n_jobs: int = config.DEFAULT_N_JOBS


@dataclass
class RunConfig:
    """Complete description of one reproducible run."""

    method: str = 'grappa'
    seed: int = config.DEFAULT_SEED
    phantom: PhantomSection = field(default_factory=PhantomSection)
    coils: CoilSection = field(default_factory=CoilSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    mask: MaskSection = field(default_factory=MaskSection)
    grappa: GrappaSection = field(default_factory=GrappaSection)
    sense: SenseSection = field(default_factory=SenseSection)
    wave: WaveSection = field(default_factory=WaveSection)
    spark: SparkSection = field(default_factory=SparkSection)
    raki: RakiSection = field(default_factory=RakiSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got '{self.method}'")
        if len(self.phantom.dims) not in (2, 3):
            raise ValueError(f"phantom.dims must have 2 or 3 entries, got {self.phantom.dims}")

    @property
    def is_3d(self):
        return len(self.phantom.dims) == 3


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.name not in ('method', 'seed')}


def _build_section(name, factory, values):
    if not isinstance(values, dict):
        raise ValueError(f"{name} must be an object, got {type(values).__name__}")
    section = factory()
    known = {f.name for f in fields(section)}
    for key, value in values.items():
        if key not in known:
            raise ValueError(f"Unknown config key '{name}.{key}'")
        setattr(section, key, value)
    return section


def parse_run_config(document):
    """
    Build a RunConfig from a parsed JSON document.

    Raises
    ------
    ValueError
        On unknown keys or invalid values
    """
    if not isinstance(document, dict):
        raise ValueError(f"Run config must be a JSON object, got {type(document).__name__}")
    kwargs = {}
    for key, value in document.items():
        if key in ('method', 'seed'):
            kwargs[key] = value
        elif key in SECTIONS:
            kwargs[key] = _build_section(key, SECTIONS[key], value)
        else:
            raise ValueError(f"Unknown config key '{key}'")
    return RunConfig(**kwargs)


def load_run_config(path=None):
    """Read a RunConfig from a JSON file (defaults when path is None)."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such config file: {path}")
    with path.open() as handle:
        document = json.load(handle)
    logger.debug("loaded run config %s", path)
    return parse_run_config(document)


def run_config_to_dict(run_config):
    """Complete document with every default filled in."""
    return asdict(run_config)


def dump_run_config(run_config):
    return json.dumps(run_config_to_dict(run_config), indent=2, sort_keys=True)
