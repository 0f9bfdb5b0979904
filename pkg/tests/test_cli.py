import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import cli
from analysis import load_report
from cli import ConfigError, ExperimentConfig, load_config, main, validate_config
from fem_core import SolverError

CONFIGS = Path(__file__).parent.parent / "configs"

TINY = {
    'name': 'tiny',
    'potential': {'name': 'smooth', 'delta': 0.5},
    'epsilon': 0.5,
    'T': 0.05,
    'dt': 1e-3,
    'n_coarse': [8, 16],
    'fine_nodes': 128,
    'methods': ['fem-cn', 'msfem-global', 'msfem-localized', 'tssp'],
    'oversampling': {'m': 1},
    'reference': {'method': 'tssp', 'resolution': 256, 'dt': 1e-4},
    'log_stride': 10,
}


def _codes(config, level='error'):
    return {d.code for d in validate_config(config) if d.level == level}


def _config(**overrides):
    return ExperimentConfig.from_dict({**TINY, **overrides})


def _stable_json(report):
    data = report.to_dict()
    del data['generated_at'], data['timing']
    return json.dumps(data, sort_keys=True)


def test_from_dict_defaults():
    config = ExperimentConfig.from_dict({'n_coarse': [64, 128], 'methods': ['fem-cn']})
    assert config.potential == {'name': 'smooth', 'delta': 0.1, 'shift': 0.0}
    assert config.epsilon == 0.125
    assert config.dt == 1e-4
    assert config.fine_nodes == 8192
    assert config.oversampling == {'c': 3}
    assert config.reference['method'] == 'tssp'
    assert config.refine_factor_for(64) == 8
    assert config.oversampling_for(128) == 21


def test_default_fine_nodes_rule():
    smooth = ExperimentConfig.from_dict({'n_coarse': [128, 192], 'methods': ['fem-cn']})
    assert smooth.fine_nodes % 384 == 0 and smooth.fine_nodes >= 8192
    assert smooth.fine_nodes == 8448

    rough = ExperimentConfig.from_dict({'potential': {'name': 'discontinuous', 'delta1': 0.2, 'delta2': 0.1},
                                        'n_coarse': [5, 15], 'methods': ['fem-cn']})
    assert rough.fine_nodes % 30 == 0
    assert rough.dt == 2.5e-5
    assert rough.oversampling == {'c': 2}
    assert rough.reference['method'] == 'msfem-global'


def test_auto_refine_factor_is_smallest_resolving():
    table1 = load_config(CONFIGS / "table1.json")
    assert {n: table1.refine_factor_for(n) for n in table1.n_coarse} == {128: 4, 192: 4, 256: 2, 384: 2, 512: 2}
    fem_only = ExperimentConfig.from_dict({**table1.to_dict(), 'methods': ['fem-cn']})
    assert fem_only.refine_factor_for(512) == 1
    assert ExperimentConfig.from_dict({**table1.to_dict(), 'refine_factor': 6}).refine_factor_for(128) == 6
    # tiny grids: the only resolving refinement is the whole comparison grid
    assert [_config().refine_factor_for(n) for n in (8, 16)] == [16, 8]


def test_from_dict_wraps_bad_values():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'epsilon': 'small'})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'potential': {'name': 'smooth'}, 'n_coarse': [8]})


def test_to_dict_is_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(_config().to_dict()), encoding='utf-8')
    assert load_config(path) == _config()


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(bad)


def test_tiny_config_is_valid():
    assert _codes(_config()) == set()


def test_assumption_warning():
    quiet = ExperimentConfig.from_dict({'epsilon': 0.125, 'n_coarse': [64], 'methods': ['msfem-global']})
    assert 'assumption-h-eps' not in _codes(quiet, 'warning')
    loud = ExperimentConfig.from_dict({'epsilon': 1 / 32, 'n_coarse': [16], 'methods': ['msfem-global']})
    assert 'assumption-h-eps' in _codes(loud, 'warning')
    assert _codes(loud) == set()
    for method in ('fem-cn', 'tssp'):
        plain = ExperimentConfig.from_dict({'epsilon': 1 / 32, 'n_coarse': [16], 'methods': [method]})
        assert 'assumption-h-eps' in _codes(plain, 'warning')


@pytest.mark.parametrize("overrides, code", [
    ({'methods': []}, 'methods-empty'),
    ({'methods': ['fd']}, 'method-unknown'),
    ({'potential': {'name': 'harmonic'}}, 'potential-unknown'),
    ({'potential': {'name': 'custom', 'path': '/nonexistent/v.csv'}}, 'potential-file'),
    ({'epsilon': 0.0}, 'epsilon-range'),
    ({'dt': -1e-3}, 'time-range'),
    ({'dt': 3e-3}, 'time-steps'),
    ({'n_coarse': []}, 'h-list-empty'),
    ({'n_coarse': [16, 8]}, 'h-list-order'),
    ({'fine_nodes': 64}, 'resolution'),
    ({'n_coarse': [8, 12]}, 'nesting'),
    ({'refine_factor': 3}, 'refine-factor'),
    ({'n_coarse': [14, 16], 'fine_nodes': 112}, 'fft-size'),
    ({'oversampling': {'m': 0}}, 'oversampling'),
    ({'reference': {'method': 'fd', 'dt': 1e-4}}, 'reference-method'),
    ({'reference': {'method': 'tssp', 'resolution': 256, 'dt': 0.0}}, 'reference-dt'),
    ({'reference': {'method': 'tssp', 'resolution': 254, 'dt': 1e-4}}, 'fft-size'),
    ({'reference': {'method': 'msfem-global', 'n_coarse': 24, 'refine_factor': 8, 'dt': 1e-4}},
     'reference-nesting'),
])
def test_validate_errors(overrides, code):
    assert code in _codes(_config(**overrides))


def test_discontinuity_node():
    config = _config(potential={'name': 'discontinuous', 'delta1': 0.5, 'delta2': 0.5},
                     n_coarse=[5], fine_nodes=135, methods=['fem-cn'],
                     reference={'method': 'msfem-global', 'n_coarse': 5, 'refine_factor': 54, 'dt': 1e-4})
    assert 'discontinuity-node' in _codes(config)


def test_localized_needs_refinement():
    config = _config(n_coarse=[16], fine_nodes=256, refine_factor=1, methods=['msfem-localized'],
                     oversampling={'m': 2})
    assert 'localized-refine' in _codes(config)
    assert 'oversampling-rule' in _codes(_config(), 'warning')


@pytest.mark.parametrize("name", ["table1", "table2", "table3", "table4"])
def test_preset_configs_are_valid(name):
    config = load_config(CONFIGS / f"{name}.json")
    assert _codes(config) == set()


def test_run_rejects_invalid_config(tmp_path):
    with pytest.raises(ConfigError) as info:
        cli.run_experiment(_config(methods=['fd']), tmp_path)
    assert any(d.code == 'method-unknown' for d in info.value.diagnostics)


def test_tiny_experiment(tmp_path):
    cache = tmp_path / "cache"
    config = _config()
    report = cli.run_experiment(config, tmp_path / "out", threads=2, cache_dir=cache)
    assert report.methods == list(TINY['methods'])
    for method, rows in report.results.items():
        assert [row['n_coarse'] for row in rows] == [8, 16]
        for row in rows:
            assert 0 < row['err_L2'] < 2 and 0 < row['err_H1'] < 2
    assert report.reference['nodes'] == 256
    assert (cache / f"reference_{cli.reference_key(config)}.npz").exists()
    assert set(report.diagnostics['temporal_saturation']) == set(TINY['methods'])
    assert all(drift < 1e-10 for drift in report.diagnostics['mass_drift'].values())
    assert report.metadata['oversampling'] == "m = 1"

    # a cache hit is the cold reference bit for bit
    np.testing.assert_array_equal(cli.compute_reference(config, cache)[0], cli.compute_reference(config)[0])
    again = cli.run_experiment(config, tmp_path / "again", threads=2, cache_dir=cache)
    assert _stable_json(again) == _stable_json(report)
    assert load_report(tmp_path / "out").results == report.results


def test_run_cell_is_on_comparison_grid():
    config = _config()
    for method in TINY['methods']:
        cell = cli.run_cell(config, method, 8)
        assert cell['u'].shape == (config.fine_nodes,)
        assert np.all(np.isfinite(cell['u']))


def test_shifted_potential_reports_unshifted_state():
    shifted = _config(potential={'name': 'smooth', 'delta': 0.5, 'shift': 1.5})
    np.testing.assert_allclose(cli.run_cell(shifted, 'tssp', 16)['u'], cli.run_cell(_config(), 'tssp', 16)['u'],
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(cli.compute_reference(shifted)[0], cli.compute_reference(_config())[0],
                               rtol=0, atol=1e-10)


def test_decay_study(tmp_path):
    config = _config(decay={'n_coarse': 8, 'refine_factor': 8, 'nodes': 2, 'gap_layers': [1, 2]})
    profiles, gap = cli.run_decay_study(config, tmp_path)
    assert len(profiles) == 2
    assert list(gap['m']) == [1, 2]
    summary = pd.read_csv(tmp_path / "decay" / "summary.csv")
    assert list(summary['node']) == [0, 4]
    assert (tmp_path / "decay" / "node_4.csv").exists()


def test_basis_export(tmp_path):
    config = _config(basis={'n_coarse': 8, 'refine_factor': 4, 'kind': 'localized', 'm': 1, 'format': 'triplet'})
    path = cli.run_basis_export(config, tmp_path)
    assert path == tmp_path / "basis" / "basis_localized.txt"
    assert path.exists()
    with pytest.raises(ConfigError):
        cli.run_basis_export(_config(basis={'kind': 'random'}), tmp_path)


def _write(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def test_main_validate(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, TINY)]) == 0
    assert "oversampling-rule" in capsys.readouterr().out
    assert main(["validate", _write(tmp_path, {**TINY, 'methods': ['fd']})]) == 2
    assert "method-unknown" in capsys.readouterr().out


def test_main_exit_codes(tmp_path, monkeypatch):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["run", _write(tmp_path, {**TINY, 'epsilon': -1})]) == 2

    def broken(*args, **kwargs):
        raise SolverError("сингулярная матрица")

    monkeypatch.setattr(cli, "run_experiment", broken)
    assert main(["run", _write(tmp_path, TINY)]) == 1


def test_main_run(tmp_path):
    out = tmp_path / "out"
    code = main(["run", _write(tmp_path, {**TINY, 'saturation_check': False}), "--output-dir", str(out),
                 "--cache-dir", str(tmp_path / "cache"), "--log-level", "WARNING"])
    assert code == 0
    assert (out / "report.json").exists() and (out / "report.docx").exists()
    assert main(["basis", _write(tmp_path, TINY), "--output-dir", str(out)]) == 0
    assert (out / "basis" / "basis_global.csv").exists()
