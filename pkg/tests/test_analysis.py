import json

import numpy as np
import pandas as pd
import pytest

from analysis import (ConvergenceReport, comparison_operators, emit_report, fit_orders, global_slope, h_label,
                      load_report, phase_aligned_error, relative_errors)
from fem_core import WaveFunction


@pytest.fixture
def norms():
    return comparison_operators(64)


@pytest.fixture
def report():
    H = [np.pi / 32, np.pi / 64, np.pi / 128]
    results = {
        'fem-cn': [{'n_coarse': 2 * int(round(np.pi / h)), 'H': h, 'err_L2': 0.5 * h ** 2, 'err_H1': h}
                   for h in H],
        'msfem-global': [{'n_coarse': 2 * int(round(np.pi / h)), 'H': h, 'err_L2': h ** 4, 'err_H1': h ** 3}
                         for h in H],
    }
    return ConvergenceReport(
        metadata={'name': 'test', 'potential': {'name': 'smooth', 'delta': 0.1}, 'delta_tags': [0.1],
                  'epsilon': 0.125, 'T': 0.1, 'dt': 1e-3, 'oversampling': 'c=2', 'fine_nodes': 1024},
        config={'name': 'test', 'epsilon': 0.125, 'potential': {'name': 'smooth', 'delta': 0.1}},
        results=results,
        reference={'method': 'tssp', 'nodes': 2048, 'dt': 1e-4},
        diagnostics={'mass_drift': {'fem-cn': 1e-14}},
    )


def test_relative_errors_basics(norms):
    x = norms.grid.fine_nodes
    u = np.exp(1j * x) + 0.3 * np.cos(2 * x)
    assert relative_errors(u, u, norms) == (0.0, 0.0)
    l2, h1 = relative_errors(np.zeros_like(u), u, norms)
    assert l2 == pytest.approx(1.0) and h1 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        relative_errors(u, np.zeros_like(u), norms)
    with pytest.raises(ValueError):
        relative_errors(u[:32], u, norms)


def test_relative_errors_phase_invariance(norms):
    x = norms.grid.fine_nodes
    u_ref = np.exp(1j * x) + 0.3 * np.cos(2 * x)
    u_num = u_ref + 1e-3 * np.sin(3 * x)
    phase = np.exp(0.7j)
    np.testing.assert_allclose(relative_errors(phase * u_num, phase * u_ref, norms),
                               relative_errors(u_num, u_ref, norms), rtol=1e-12)


def test_phase_aligned_error(norms):
    u = np.exp(1j * norms.grid.fine_nodes)
    rotated = u * np.exp(0.4j)
    assert relative_errors(rotated, u, norms)[0] > 0.3
    assert phase_aligned_error(rotated, u, norms) == pytest.approx(0.0, abs=1e-12)


def test_relative_errors_rejects_non_fine(norms):
    u = WaveFunction(np.ones(64), 'fine', norms.grid)
    with pytest.raises(ValueError):
        relative_errors(WaveFunction(np.ones(64), 'fourier'), u, norms)


def test_fit_orders_reference_values():
    assert fit_orders([(np.pi / 64, 1.0609e-1), (np.pi / 96, 4.9109e-2)])[0] == pytest.approx(1.90, abs=0.01)
    assert fit_orders([(np.pi / 128, 2.7714e-2), (np.pi / 192, 1.8745e-3)])[0] == pytest.approx(6.65, abs=0.01)


def test_fit_orders_power_law():
    H = np.pi / np.array([32, 64, 128, 256])
    errors = list(zip(H, 7.0 * H ** 3))
    np.testing.assert_allclose(fit_orders(errors), 3.0, rtol=1e-12)
    assert global_slope(errors) == pytest.approx(3.0, rel=1e-12)


def test_fit_orders_scaling_invariance():
    errors = [(np.pi / 64, 3.1e-2), (np.pi / 96, 1.2e-2), (np.pi / 128, 4.0e-3)]
    scaled = [(h, 1e-4 * e) for h, e in errors]
    np.testing.assert_allclose(fit_orders(scaled), fit_orders(errors), rtol=1e-12)


@pytest.mark.parametrize("errors", [
    [(0.2, 1e-2), (0.1, 0.0)],
    [(0.2, 1e-2), (0.1, -1e-3)],
    [(0.1, 1e-2), (0.2, 1e-3)],
])
def test_fit_orders_rejects_bad_series(errors):
    with pytest.raises(ValueError):
        fit_orders(errors)


def test_global_slope_needs_two_points():
    with pytest.raises(ValueError):
        global_slope([(0.1, 1e-3)])


def test_h_label():
    assert h_label(128) == "pi/64"
    assert h_label(192) == "pi/96"
    assert h_label(5) == "2pi/5"


def test_report_orders(report):
    np.testing.assert_allclose(report.orders['fem-cn']['L2'], [2.0, 2.0], rtol=1e-10)
    np.testing.assert_allclose(report.orders['msfem-global']['H1'], [3.0, 3.0], rtol=1e-10)
    assert report.slopes['msfem-global']['L2'] == pytest.approx(4.0)
    assert report.methods == ['fem-cn', 'msfem-global']


def test_report_round_trip(report):
    data = json.loads(json.dumps(report.to_dict()))
    restored = ConvergenceReport.from_dict(data)
    assert restored.results == report.results
    assert restored.orders == report.orders
    assert restored.generated_at == report.generated_at


def test_errors_frame(report):
    df = report.errors_frame()
    assert len(df) == 3 + 2
    assert list(df['row']) == ['error', 'order', 'error', 'order', 'error']
    assert df['H_label'].iloc[1] == "pi/32->pi/64"
    assert df['fem-cn:L2'].iloc[1] == pytest.approx(2.0)
    assert pd.isna(df['n_coarse'].iloc[1])


def test_table_frame(report):
    df = report.table_frame()
    assert list(df.columns) == ["pi/32", "pi/64", "pi/128"]
    assert len(df) == 2 * 2 * 2
    assert df.loc['fem-cn err_L2', "pi/64"] == pytest.approx(0.5 * (np.pi / 64) ** 2)
    assert pd.isna(df.loc['fem-cn order_L2', "pi/32"])
    assert df.loc['msfem-global order_L2', "pi/128"] == pytest.approx(4.0)


def test_emit_and_load_report(report, tmp_path):
    written = emit_report(report, tmp_path / "out")
    for key in ('json', 'csv', 'table', 'xlsx', 'docx'):
        assert written[key].exists()
    series = pd.read_csv(tmp_path / "out" / "series" / "fem-cn_L2.csv")
    assert list(series.columns) == ['n_coarse', 'H', 'error']
    assert pd.read_excel(written['xlsx'], sheet_name=None).keys() >= {'Ошибки', 'Таблица', 'Параметры'}

    loaded = load_report(tmp_path / "out")
    assert loaded.results == report.results
    assert loaded.reference == report.reference
    with pytest.raises(FileNotFoundError):
        load_report(tmp_path / "missing")


def test_emit_selected_formats(report, tmp_path):
    written = emit_report(report, tmp_path, formats=('json',))
    assert set(written) == {'json'}
    assert not (tmp_path / 'report.docx').exists()
