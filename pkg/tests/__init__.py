"""
SPARK k-space Toolkit - Test Suite
==================================

Unit tests for the k-space engine, the scan-specific networks, storage,
exports and the command-line workflows.

Run tests with:
    pytest tests/
    pytest tests/test_grappa.py -v
    pytest tests/test_spark.py -v

Author: Justin D
Version: 0.1.0
"""

import sys
import os

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

__version__ = '0.1.0'
__author__ = 'Justin D'

# Test configuration
TEST_MATRIX_2D = (32, 24)      # small grids keep the suite fast
TEST_MATRIX_3D = (16, 12, 8)
TEST_N_COILS = 4
TEST_SEED = 1234
TEST_TOLERANCE = 1e-10
FFT_TOLERANCE = 1e-12

# Sampling cases: (n_pe, R, n_acs)
TEST_UNIFORM_CASES = [
    (24, 2, 8),
    (24, 3, 6),
    (24, 4, 8),
    (30, 5, 10),
]
