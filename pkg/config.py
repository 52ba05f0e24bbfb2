"""
Configuration file for the SPARK k-space reconstruction toolkit
Contains all default settings and tunable parameters
"""

# ========================================
# K-SPACE CONVENTIONS
# ========================================

# Axis order of every k-space / coil-image array
AXIS_NAMES = ('readout', 'phase', 'partition', 'coil')
COMPLEX_DTYPE = 'complex128'
REAL_DTYPE = 'float64'

# ========================================
# PHANTOM SETTINGS
# ========================================

DEFAULT_MATRIX_2D = (128, 128)
DEFAULT_MATRIX_3D = (64, 48, 32)
DEFAULT_PHANTOM = 'shepp_logan'

# ========================================
# COIL SETTINGS
# ========================================

DEFAULT_N_COILS = 8
COIL_RING_RADIUS = 0.9      # normalized distance from FOV center
COIL_WIDTH = 0.6            # Gaussian falloff
COIL_PHASE_SLOPE = 0.8      # radians per normalized unit
COIL_PHASE_CURVATURE = 0.3  # quadratic phase term
COIL_Z_OFFSET = 0.4         # 3D: alternating coil planes

# ========================================
# NOISE SETTINGS
# ========================================

DEFAULT_NOISE_SIGMA = 0.0
DEFAULT_NOISE_CORRELATION = 0.1
DEFAULT_SEED = 20210517
HERMITIAN_TOLERANCE = 1e-12
PSD_TOLERANCE = 1e-12

# ========================================
# SAMPLING SETTINGS
# ========================================

DEFAULT_ACCEL = (4, 1)
DEFAULT_ACS_LINES = 24
DEFAULT_CAIPI_SHIFT = 1
HYBRID_ACS_ACCEL = (3, 2)
HYBRID_EXTERIOR_ACCEL = (4, 3)
HYBRID_ACS_SIZE = (24, 24)
REFERENCE_SIZE = (24, 24)   # external low-resolution calibration scan

# ========================================
# GRAPPA SETTINGS
# ========================================

GRAPPA_TAPS_2D = (5, 4, 1)
GRAPPA_TAPS_3D = (5, 4, 3)
GRAPPA_LAMBDA = 0.01        # normalized-trace units
GRAPPA_LAMBDA_SWEEP = [0.0, 0.01, 0.05, 0.1, 0.5]

# ========================================
# SENSE / WAVE SETTINGS
# ========================================

SENSE_MAX_ITER = 50
SENSE_TOL = 1e-6
WAVE_OVERSAMPLE = 3
WAVE_CYCLES = 6
WAVE_AMPLITUDE_RAD = 10.0

# ========================================
# SPARK SETTINGS
# ========================================

SPARK_ARCHITECTURES = ['net2d', 'net3d']
SPARK_EPOCHS = 200
SPARK_LR = 2e-3
SPARK_HIDDEN_2D = 64
SPARK_HIDDEN_3D = 32
SPARK_FINAL_ACS_REPLACE = True
SPARK_SPLIT_REAL_IMAG = False

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# ========================================
# RAKI SETTINGS
# ========================================

RAKI_CHANNELS = (32, 8)
RAKI_KERNELS = ((5, 2, 1), (1, 1, 1), (3, 1, 1))
RAKI_EPOCHS = 500
RAKI_LR = 3e-3

# ========================================
# METRICS SETTINGS
# ========================================

DEFAULT_REPLICAS = 20
DEFAULT_WINDOW = None       # auto window (0, max)

# ========================================
# PERFORMANCE SETTINGS
# ========================================

MAX_THREADS = 4
DEFAULT_N_JOBS = 1

# ========================================
# DEBUG/DEVELOPMENT
# ========================================

VERBOSE_LOGGING = False
SHOW_PROGRESS = True
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# ========================================
# APP METADATA
# ========================================

APP_TITLE = "SPARK k-space Toolkit"
APP_VERSION = "0.1.0"
APP_AUTHOR = "Justin D"
APP_DESCRIPTION = "Scan-specific k-space error correction on top of GRAPPA, SENSE and wave reconstructions"

# ========================================
# EXPORT SETTINGS
# ========================================

IMAGE_CMAP = 'gray'
KSPACE_CMAP = 'inferno'
ERROR_GAIN = 5.0
FIGURE_DPI = 150
