"""
Command-Line Commands
=====================

Registers every subcommand of the toolkit and connects it to the
pipelines. Handlers return an exit code and print `key=value` report
lines on stdout.
"""

import logging
from pathlib import Path

import numpy as np

from storage.container import read_container, write_container, save_mask
from storage.run_config import METHODS, load_run_config, dump_run_config

logger = logging.getLogger(__name__)

RMSE_KEYS = ('rmse',)


def format_value(key, value):
    """Report formatting: RMSE values with two decimals, other floats %.6g."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        if any(tag in key for tag in RMSE_KEYS):
            return f"{value:.2f}"
        return f"{value:.6g}"
    return str(value)


def emit(records, prefix=''):
    """Print one key=value line per record."""
    for key, value in records.items():
        print(f"{prefix}{key}={format_value(key, value)}")


def method_name(value):
    name = value.replace('-', '_')
    if name not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got '{value}'")
    return name


def _run_config(args):
    run_config = load_run_config(args.config)
    method = getattr(args, 'method', None)
    if method:
        run_config.method = method
    return run_config


def _write_image(path, image):
    return write_container(path, np.asarray(image, dtype=float), kind='tensor')


def register_all_commands(subparsers, config_parent):
    """
    Register every subcommand.

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        From ArgumentParser.add_subparsers
    config_parent : argparse.ArgumentParser
        Parent parser carrying --config and --dump-config
    """

    # ========================================
    # DATA GENERATION
    # ========================================

    def cmd_phantom(args):
        """Ground truth, maps, noisy k-space, wave data and reference scan."""
        from workflows.pipelines import simulate_scan, save_scan

        run_config = _run_config(args)
        scan = simulate_scan(run_config, with_wave=not args.no_wave)
        paths = save_scan(scan, args.out)
        emit({'dims': 'x'.join(str(d) for d in scan.dims), 'n_coils': scan.n_coils})
        for name, path in paths.items():
            print(f"wrote_{name}={path}")
        return 0

    parser = subparsers.add_parser('phantom', parents=[config_parent],
                                   help='simulate phantom, maps and k-space')
    parser.add_argument('--out', required=True, help='output directory')
    parser.add_argument('--no-wave', action='store_true', help='skip wave-encoded data')
    parser.set_defaults(handler=cmd_phantom)

    def cmd_mask(args):
        """Sampling pattern from the run config."""
        from workflows.pipelines import mask_for_config

        mask = mask_for_config(_run_config(args))
        path = save_mask(args.out, mask)
        emit({
            'shape': 'x'.join(str(n) for n in mask.shape),
            'samples': mask.count,
            'net_acceleration': mask.net_acceleration,
            'accel': 'x'.join(str(r) for r in mask.accel),
        })
        print(f"wrote_mask={path}")
        return 0

    parser = subparsers.add_parser('mask', parents=[config_parent], help='generate a sampling mask')
    parser.add_argument('--out', required=True, help='mask container path')
    parser.set_defaults(handler=cmd_mask)

    # ========================================
    # RECONSTRUCTION
    # ========================================

    def _inputs(args, run_config):
        from workflows.pipelines import load_inputs
        return load_inputs(args.data, args.mask, run_config)

    def cmd_recon(args):
        """Input method alone."""
        from workflows.pipelines import run_baseline
        from kspace_engine.metrics import rmse_percent

        run_config = _run_config(args)
        scan, mask = _inputs(args, run_config)
        setup, image = run_baseline(run_config.method, scan, mask, run_config)
        _write_image(args.out, image)
        emit({'method': run_config.method, 'rmse_percent': rmse_percent(image, setup.reference)})
        return 0

    def cmd_spark(args):
        """Input method followed by SPARK."""
        from workflows.pipelines import spark_pipeline
        from scan_networks.spark import models_to_array

        run_config = _run_config(args)
        scan, mask = _inputs(args, run_config)
        result = spark_pipeline(run_config.method, scan, mask, run_config)
        _write_image(args.out, result.image)
        if args.models and result.spark is not None:
            write_container(args.models, models_to_array(result.spark.models), kind='model')
        if args.figures:
            _spark_figures(result, Path(args.figures))
        emit(result.records())
        return 0

    def _spark_figures(result, directory):
        from visualizations.figures import comparison_panel, correction_maps, loss_curves

        comparison_panel({result.method: result.baseline_image, 'SPARK': result.image},
                         result.reference, directory / 'comparison.png')
        if result.spark is not None:
            correction_maps(result.setup.y_est, result.spark.corrections, directory / 'corrections.png')
            loss_curves(result.spark.loss_histories, directory / 'loss.png')

    for name, handler, helptext in (('recon', cmd_recon, 'run an input reconstruction'),
                                    ('spark', cmd_spark, 'run an input reconstruction plus SPARK')):
        parser = subparsers.add_parser(name, parents=[config_parent], help=helptext)
        parser.add_argument('method', type=method_name, help='|'.join(METHODS))
        parser.add_argument('--data', required=True, help='directory written by phantom')
        parser.add_argument('--mask', required=True, help='mask container')
        parser.add_argument('--out', required=True, help='image container path')
        if name == 'spark':
            parser.add_argument('--models', help='write trained weights to this container')
            parser.add_argument('--figures', help='directory for comparison PNGs')
        parser.set_defaults(handler=handler)

    def cmd_raki(args):
        """RAKI baseline on cartesian k-space."""
        from workflows.pipelines import raki_pipeline

        run_config = _run_config(args)
        scan, mask = _inputs(args, run_config)
        image, rmse = raki_pipeline(scan, mask, run_config)
        _write_image(args.out, image)
        emit({'method': 'raki', 'rmse_percent': rmse})
        return 0

    parser = subparsers.add_parser('raki', parents=[config_parent], help='RAKI baseline')
    parser.add_argument('--data', required=True)
    parser.add_argument('--mask', required=True)
    parser.add_argument('--out', required=True)
    parser.set_defaults(handler=cmd_raki)

    # ========================================
    # EVALUATION
    # ========================================

    def cmd_eval_rmse(args):
        from kspace_engine.metrics import rmse_percent, slice_rmse

        recon = read_container(args.recon, expected_kind='tensor').data
        reference = read_container(args.reference, expected_kind='tensor').data
        records = {'rmse_percent': rmse_percent(np.abs(recon), np.abs(reference))}
        if args.per_slice:
            for index, value in enumerate(slice_rmse(np.abs(recon), np.abs(reference))):
                records[f'slice{index}_rmse_percent'] = value
        emit(records)
        return 0

    def cmd_eval_replica(args):
        from workflows.pipelines import pseudo_replica_comparison

        run_config = _run_config(args)
        scan, mask = _inputs(args, run_config)
        reports = pseudo_replica_comparison(scan, mask, run_config, run_config.method, args.replicas)
        for name, report in reports.items():
            emit(report.records(), prefix=f"{name}_")
            emit({'replica_cv': report.replica_cv}, prefix=f"{name}_")
        return 0

    eval_parser = subparsers.add_parser('eval', help='score reconstructions')
    eval_commands = eval_parser.add_subparsers(dest='eval_command', required=True)

    parser = eval_commands.add_parser('rmse', help='percent RMSE against a reference image')
    parser.add_argument('--recon', required=True)
    parser.add_argument('--reference', required=True)
    parser.add_argument('--per-slice', action='store_true')
    parser.set_defaults(handler=cmd_eval_rmse)

    parser = eval_commands.add_parser('pseudo-replica', parents=[config_parent],
                                      help='GRAPPA vs SPARK noise analysis')
    parser.add_argument('--data', required=True)
    parser.add_argument('--mask', required=True)
    parser.add_argument('--replicas', type=int, default=None)
    parser.set_defaults(handler=cmd_eval_replica)

    # ========================================
    # EXPORT
    # ========================================

    def cmd_export(args):
        from visualizations.export import export_pgm, export_error_map

        image = np.abs(read_container(args.image, expected_kind='tensor').data)
        window = tuple(args.window) if args.window else None
        if args.reference:
            reference = read_container(args.reference, expected_kind='tensor').data
            path = export_error_map(image, reference, args.out, window, args.gain, args.partition)
        else:
            path = export_pgm(image, args.out, window, args.partition)
        print(f"wrote_pgm={path}")
        return 0

    parser = subparsers.add_parser('export', help='write an 8-bit PGM image or error map')
    parser.add_argument('--image', required=True)
    parser.add_argument('--out', required=True)
    parser.add_argument('--reference', help='export |image - reference| instead')
    parser.add_argument('--window', type=float, nargs=2, metavar=('LO', 'HI'))
    parser.add_argument('--gain', type=float, default=1.0)
    parser.add_argument('--partition', type=int, default=None)
    parser.set_defaults(handler=cmd_export)

    # ========================================
    # REPRODUCTION SCENARIOS
    # ========================================

    def cmd_repro(args):
        from workflows.scenarios import SCENARIOS, run_scenario

        if args.list or not args.name:
            for name, entry in SCENARIOS.items():
                print(f"{name}={entry.description}")
            return 0
        outcome = run_scenario(args.name)
        for line in outcome.table():
            print(line)
        return 0 if outcome.passed else 1

    parser = subparsers.add_parser('repro', help='run a named end-to-end scenario')
    parser.add_argument('name', nargs='?')
    parser.add_argument('--list', action='store_true')
    parser.set_defaults(handler=cmd_repro)


def dump_config_if_requested(args):
    """Print the complete run config document when --dump-config is set."""
    if getattr(args, 'dump_config', False):
        print(dump_run_config(_run_config(args)))
        return True
    return False
