"""
Storage Module
==============

File formats for the SPARK toolkit.

This module contains:
- The KSPC binary tensor container (tensors, masks, PSFs, models, maps)
- The JSON run configuration

Author: Justin D
Version: 0.1.0
"""

from .container import (
    Container,
    ContainerError,
    read_container,
    write_container,
    save_mask,
    load_mask
)

from .run_config import (
    RunConfig,
    METHODS,
    parse_run_config,
    load_run_config,
    run_config_to_dict,
    dump_run_config
)

__all__ = [
    # Container
    'Container',
    'ContainerError',
    'read_container',
    'write_container',
    'save_mask',
    'load_mask',

    # Run configuration
    'RunConfig',
    'METHODS',
    'parse_run_config',
    'load_run_config',
    'run_config_to_dict',
    'dump_run_config'
]
