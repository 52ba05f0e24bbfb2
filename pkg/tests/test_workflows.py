"""
Test Suite for Workflows
========================

Tests for the reconstruction pipelines, the reproduction scenarios and
the command-line entry point including:
- phantom -> mask -> recon -> eval round trips through files
- Error lines and exit codes
- Small SPARK runs on every input method family
"""

import json

import pytest
import numpy as np
from tests import TEST_SEED

TINY_SPARK = {'hidden_channels': 4, 'epochs': 2}


def tiny_run_config(**sections):
    """Small run config with a cheap SPARK section."""
    from storage.run_config import parse_run_config

    document = {
        'seed': TEST_SEED,
        'phantom': {'dims': [32, 32]},
        'coils': {'n_coils': 4},
        'noise': {'sigma': 0.001},
        'mask': {'accel': [2, 1], 'acs': [12, 1]},
        'sense': {'max_iter': 20},
        'spark': dict(TINY_SPARK),
    }
    for key, values in sections.items():
        if isinstance(values, dict):
            document.setdefault(key, {}).update(values)
        else:
            document[key] = values
    return parse_run_config(document)


def write_config(path, document):
    path.write_text(json.dumps(document))
    return str(path)


# ========================================
# COMMAND-LINE TESTS
# ========================================

def test_cli_fully_sampled_round_trip(tmp_path, capsys):
    """Without acceleration GRAPPA returns the ground truth."""
    from app import main

    cfg = write_config(tmp_path / 'run.json', {
        'phantom': {'dims': [32, 32]},
        'coils': {'n_coils': 4},
        'mask': {'accel': [1, 1], 'acs': [8, 1]},
    })
    data = tmp_path / 'data'
    mask = tmp_path / 'mask.kspc'
    out = tmp_path / 'recon.kspc'

    assert main(['phantom', '--config', cfg, '--out', str(data), '--no-wave']) == 0
    assert (data / 'kspace.kspc').is_file()
    assert main(['mask', '--config', cfg, '--out', str(mask)]) == 0
    assert main(['recon', 'grappa', '--config', cfg, '--data', str(data),
                 '--mask', str(mask), '--out', str(out)]) == 0
    capsys.readouterr()

    assert main(['eval', 'rmse', '--recon', str(out), '--reference', str(data / 'image.kspc')]) == 0
    assert 'rmse_percent=0.00' in capsys.readouterr().out


def test_cli_spark_writes_models_and_figures(tmp_path, capsys):
    """The spark command stores weights, figures and both RMSE values."""
    from app import main
    from storage.container import read_container

    cfg = write_config(tmp_path / 'run.json', {
        'phantom': {'dims': [32, 32]},
        'coils': {'n_coils': 4},
        'mask': {'accel': [2, 1], 'acs': [12, 1]},
        'spark': dict(TINY_SPARK),
    })
    data = tmp_path / 'data'
    mask = tmp_path / 'mask.kspc'
    assert main(['phantom', '--config', cfg, '--out', str(data), '--no-wave']) == 0
    assert main(['mask', '--config', cfg, '--out', str(mask)]) == 0
    capsys.readouterr()

    assert main(['spark', 'grappa', '--config', cfg, '--data', str(data), '--mask', str(mask),
                 '--out', str(tmp_path / 'spark.kspc'), '--models', str(tmp_path / 'models.kspc'),
                 '--figures', str(tmp_path / 'figures')]) == 0
    out = capsys.readouterr().out
    assert 'rmse_spark=' in out and 'rmse_baseline=' in out
    assert read_container(tmp_path / 'models.kspc', expected_kind='model').data.shape[0] == 4
    assert (tmp_path / 'figures' / 'comparison.png').is_file()


def test_cli_missing_data(tmp_path, capsys):
    """Missing inputs give exit code 1 and one error line."""
    from app import main

    code = main(['recon', 'grappa', '--data', str(tmp_path / 'absent'),
                 '--mask', str(tmp_path / 'mask.kspc'), '--out', str(tmp_path / 'out.kspc')])
    assert code == 1
    assert 'error=FileNotFoundError' in capsys.readouterr().err


def test_cli_unknown_method(tmp_path):
    """Argument errors exit with code 2."""
    from app import main

    with pytest.raises(SystemExit) as excinfo:
        main(['recon', 'espirit', '--data', str(tmp_path), '--mask', 'm', '--out', 'o'])
    assert excinfo.value.code == 2


def test_cli_bad_config_key(tmp_path, capsys):
    """Unknown config keys are reported, not ignored."""
    from app import main

    cfg = write_config(tmp_path / 'run.json', {'spark': {'epoch': 3}})
    assert main(['mask', '--config', cfg, '--out', str(tmp_path / 'mask.kspc')]) == 1
    assert 'spark.epoch' in capsys.readouterr().err


def test_cli_dump_config(tmp_path, capsys):
    """--dump-config prints the complete document and writes nothing."""
    from app import main

    target = tmp_path / 'mask.kspc'
    assert main(['mask', '--dump-config', '--out', str(target)]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document['method'] == 'grappa'
    assert document['spark']['lr'] > 0
    assert not target.exists()


def test_cli_repro_list_and_unknown(capsys):
    """Scenarios are listed by name; unknown names fail."""
    from app import main

    assert main(['repro', '--list']) == 0
    assert 'operators=' in capsys.readouterr().out
    assert main(['repro', 'no-such-scenario']) == 1


# ========================================
# SCENARIO TESTS
# ========================================

@pytest.mark.parametrize("name", ['operators', 'grappa-oracle', 'nn-gradients'])
def test_fast_scenarios_pass(name):
    """Operator and gradient oracles pass."""
    from workflows.scenarios import run_scenario

    outcome = run_scenario(name)
    assert outcome.checks
    assert outcome.passed
    assert outcome.table()[-1] == f"scenario={name} status=pass"


def test_planted_kernel_data():
    """Coil 1 is coil 0 shifted by one phase line."""
    from workflows.scenarios import planted_kernel_kspace

    full = planted_kernel_kspace()
    assert full.shape == (16, 16, 1, 2)
    assert np.array_equal(full[..., 1], np.roll(full[..., 0], 1, axis=1))


# ========================================
# PIPELINE TESTS
# ========================================

def test_build_mask_unknown_kind():
    """Mask kinds are checked."""
    from workflows.pipelines import build_mask

    run_config = tiny_run_config(mask={'kind': 'spiral'})
    with pytest.raises(ValueError, match='mask.kind'):
        build_mask(run_config, (32, 1))


def test_prepare_method_errors():
    """Unknown methods, missing ACS and missing wave data are rejected."""
    from workflows.pipelines import simulate_scan, prepare_method
    from kspace_engine.sampling import uniform_1d

    run_config = tiny_run_config()
    scan = simulate_scan(run_config, with_wave=False)
    with pytest.raises(ValueError):
        prepare_method('espirit', scan, uniform_1d(32, 2, 12), run_config)
    with pytest.raises(ValueError):
        prepare_method('grappa', scan, uniform_1d(32, 2, 0), run_config)
    with pytest.raises(ValueError):
        prepare_method('wave', scan, uniform_1d(32, 2, 12), run_config)


def test_scan_files_round_trip(tmp_path):
    """Saved scans reload with their arrays intact."""
    from workflows.pipelines import simulate_scan, save_scan, load_scan

    run_config = tiny_run_config(phantom={'dims': [24, 24]}, wave={'oversample': 2})
    scan = simulate_scan(run_config, with_wave=True)
    paths = save_scan(scan, tmp_path)
    assert {'image', 'maps', 'kspace', 'wave_kspace', 'psf'} <= set(paths)

    loaded = load_scan(tmp_path, run_config)
    assert np.array_equal(loaded.kspace, scan.kspace)
    assert np.array_equal(loaded.psf.phase, scan.psf.phase)
    assert loaded.psf.oversample == 2


def test_spark_pipeline_grappa():
    """GRAPPA input with SPARK correction on a small 2D scan."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config()
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline('grappa', scan, mask_for_config(run_config), run_config)

    assert result.image.shape == scan.image.shape
    assert np.isfinite(result.rmse_spark) and np.isfinite(result.rmse_baseline)
    assert all(len(history) == 3 for history in result.spark.loss_histories)
    records = result.records()
    assert records['method'] == 'grappa'
    assert {'loss_initial', 'loss_final'} <= set(records)


@pytest.mark.parametrize("method", ['vc_grappa', 'sense'])
def test_spark_pipeline_other_2d_inputs(method):
    """Virtual-coil GRAPPA and cartesian SENSE inputs run end to end."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(method=method)
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline(method, scan, mask_for_config(run_config), run_config)
    assert result.setup.y_est.shape == scan.kspace.shape
    assert np.isfinite(result.rmse_spark) and np.isfinite(result.rmse_baseline)


def test_spark_pipeline_grappa3d():
    """3D GRAPPA with an integrated ACS block uses the 3D network."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(method='grappa3d', phantom={'dims': [16, 24, 12]},
                                 mask={'kind': 'uniform_2d', 'accel': [2, 2], 'acs': [12, 8]})
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline('grappa3d', scan, mask_for_config(run_config), run_config)
    assert result.setup.extras['kernel'].weights.shape[0] == 5 * 4 * 3 * 4
    assert len(result.spark.models[0].network.layers) == 9
    assert np.isfinite(result.rmse_spark)


def test_spark_pipeline_skips_unaccelerated_grappa():
    """R = 1 GRAPPA has nothing to correct."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(mask={'accel': [1, 1], 'acs': [8, 1]})
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline('grappa', scan, mask_for_config(run_config), run_config)
    assert result.spark is None
    assert np.array_equal(result.image, result.baseline_image)


def test_spark_pipeline_wave():
    """Wave-encoded SENSE input trains on the oversampled readout."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(method='wave', phantom={'dims': [24, 24]}, mask={'acs': [8, 1]})
    scan = simulate_scan(run_config, with_wave=True)
    result = spark_pipeline('wave', scan, mask_for_config(run_config), run_config)

    assert result.setup.y_acq.shape[0] == 24 * run_config.wave.oversample
    assert result.image.shape == scan.image.shape
    assert np.isfinite(result.rmse_spark)


def test_spark_pipeline_slice_group():
    """Slice-group runs score every collapsed slice."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(method='wave_slice_group', phantom={'dims': [16, 12, 6]},
                                 mask={'accel': [2, 3], 'acs': [4, 1]})
    scan = simulate_scan(run_config, with_wave=False)
    result = spark_pipeline('wave_slice_group', scan, mask_for_config(run_config), run_config)

    assert result.reference.shape == (16, 12, 3)
    assert len(result.slice_rmse_spark) == 3
    assert len(result.slice_rmse_baseline) == 3
    assert result.setup.extras['sense_image'].shape == (16, 12, 3)
    assert 'slice2_rmse_spark' in result.records()


def test_spark_pipeline_hybrid():
    """Hybrid 3D sampling is calibrated from the reference scan."""
    from workflows.pipelines import simulate_scan, mask_for_config, spark_pipeline

    run_config = tiny_run_config(
        method='grappa3d_hybrid',
        phantom={'dims': [16, 24, 12]},
        mask={'kind': 'hybrid', 'accel': [4, 3], 'acs': [12, 8], 'acs_accel': [3, 2],
              'reference': [16, 12]},
    )
    scan = simulate_scan(run_config, with_wave=False)
    assert scan.reference.shape == (16, 16, 12, 4)
    result = spark_pipeline('grappa3d_hybrid', scan, mask_for_config(run_config), run_config)

    extras = result.setup.extras
    assert extras['net_acceleration'] > 1.0
    assert extras['baseline_net_acceleration'] > 1.0
    assert len(result.spark.models[0].network.layers) == 9
    assert np.isfinite(result.rmse_spark)


def test_pseudo_replica_comparison():
    """GRAPPA and SPARK reports with fixed calibration."""
    from workflows.pipelines import simulate_scan, mask_for_config, pseudo_replica_comparison

    run_config = tiny_run_config(phantom={'dims': [24, 24]}, mask={'acs': [8, 1]}, noise={'sigma': 0.01})
    scan = simulate_scan(run_config, with_wave=False)
    reports = pseudo_replica_comparison(scan, mask_for_config(run_config), run_config, n_replicas=3)

    assert set(reports) == {'grappa', 'spark'}
    for report in reports.values():
        assert report.n_replicas == 3
        assert np.isfinite(report.replica_rmse_mean)
        assert report.support_proxy_mean > 0


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
