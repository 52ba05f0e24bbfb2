"""
SPARK k-space Toolkit - Main Application
========================================

Command-line entry point. Simulates phantoms, generates sampling
patterns, runs GRAPPA / SENSE / wave reconstructions with and without
SPARK correction, scores them, and exports images.

Usage: python app.py <command> [options]

Author: Justin D
Version: 0.1.0
"""

import argparse
import logging
import sys

# Import configuration
import config

# Import modules
from workflows.commands import register_all_commands, dump_config_if_requested

logger = logging.getLogger(__name__)


# ========================================
# ARGUMENT PARSER
# ========================================

def build_parser():
    config_parent = argparse.ArgumentParser(add_help=False)
    config_parent.add_argument('--config', default=None, help='JSON run configuration')
    config_parent.add_argument('--dump-config', action='store_true',
                               help='print the complete run configuration and exit')

    parser = argparse.ArgumentParser(prog='app.py', description=config.APP_DESCRIPTION)
    parser.add_argument('--verbose', action='store_true', help='debug logging on stderr')
    parser.add_argument('--version', action='version', version=f"{config.APP_TITLE} {config.APP_VERSION}")
    subparsers = parser.add_subparsers(dest='command', required=True)
    register_all_commands(subparsers, config_parent)
    return parser


def configure_logging(verbose=False):
    level = logging.DEBUG if verbose or config.VERBOSE_LOGGING else logging.INFO
    logging.basicConfig(level=level, format=config.LOG_FORMAT, stream=sys.stderr)


def report_error(exc):
    """Single machine-parsable error line on stderr."""
    message = str(exc).replace('"', "'").replace('\n', ' ')
    print(f'error={type(exc).__name__} message="{message}"', file=sys.stderr)


# ========================================
# RUN APPLICATION
# ========================================

def main(argv=None):
    """
    Run one command.

    Returns
    -------
    int
        0 on success, 1 on a handled error (argparse exits with 2)
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    logger.debug("%s %s by %s", config.APP_TITLE, config.APP_VERSION, config.APP_AUTHOR)

    try:
        if dump_config_if_requested(args):
            return 0
        return args.handler(args)
    except (ValueError, OSError, KeyError) as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        report_error(exc)
        return 1


if __name__ == '__main__':
    sys.exit(main())
