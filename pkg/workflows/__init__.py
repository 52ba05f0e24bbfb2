"""
Workflows Module
================

End-to-end runs and the command-line surface of the toolkit.

This module contains:
- Scan simulation, persistence and mask construction from a run config
- Input reconstructions of every method with SPARK correction
- RAKI and pseudo-replica comparisons
- Named reproduction scenarios
- Subcommand registration

Author: Justin D
Version: 0.1.0
"""

from .pipelines import (
    ScanData,
    MethodSetup,
    PipelineResult,
    simulate_scan,
    save_scan,
    load_scan,
    build_mask,
    mask_for_config,
    prepare_method,
    run_baseline,
    spark_pipeline,
    raki_pipeline,
    pseudo_replica_comparison
)

from .scenarios import (
    SCENARIOS,
    run_scenario
)

__all__ = [
    # Pipelines
    'ScanData',
    'MethodSetup',
    'PipelineResult',
    'simulate_scan',
    'save_scan',
    'load_scan',
    'build_mask',
    'mask_for_config',
    'prepare_method',
    'run_baseline',
    'spark_pipeline',
    'raki_pipeline',
    'pseudo_replica_comparison',

    # Scenarios
    'SCENARIOS',
    'run_scenario'
]

__version__ = '0.1.0'
__author__ = 'Justin D'
