"""Error metrics, convergence orders and the convergence report."""
import datetime
import json
import logging
from collections import namedtuple
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from fem_core import WaveFunction, assemble_mass, assemble_stiffness
from mesh import build_grid_pair

logger = logging.getLogger(__name__)

METRICS = ('L2', 'H1')

NormOperators = namedtuple('NormOperators', ['grid', 'mass', 'stiffness'])


def comparison_operators(n_fine: int) -> NormOperators:
    """Mass and stiffness of the common comparison grid with n_fine nodes."""
    grid = build_grid_pair(n_fine, 1)
    return NormOperators(grid, assemble_mass(grid, 'fine'), assemble_stiffness(grid, 'fine'))


def _pair(u_num, u_ref):
    a = u_num.coefficients if isinstance(u_num, WaveFunction) else np.asarray(u_num, dtype=complex)
    b = u_ref.coefficients if isinstance(u_ref, WaveFunction) else np.asarray(u_ref, dtype=complex)
    for u in (u_num, u_ref):
        if isinstance(u, WaveFunction) and u.space != 'fine':
            raise ValueError(f"Ошибки считаются на мелкой сетке, получено пространство {u.space!r}")
    if a.shape != b.shape:
        raise ValueError(f"Решения заданы на разных сетках: {a.shape} и {b.shape}")
    return a, b


def _sq(matrix, v) -> float:
    return float(np.real(np.vdot(v, matrix @ v)))


def relative_errors(u_num, u_ref, operators) -> tuple:
    """(||u_num - u_ref|| / ||u_ref||, same in the H1 norm) via mass/stiffness quadratic forms."""
    a, b = _pair(u_num, u_ref)
    ref_l2 = _sq(operators.mass, b)
    if ref_l2 <= 0:
        raise ValueError("Норма эталонного решения равна нулю")
    d = a - b
    d_l2 = _sq(operators.mass, d)
    err_l2 = np.sqrt(d_l2 / ref_l2)
    err_h1 = np.sqrt((d_l2 + _sq(operators.stiffness, d)) / (ref_l2 + _sq(operators.stiffness, b)))
    return float(err_l2), float(err_h1)


def phase_aligned_error(u_num, u_ref, operators) -> float:
    """Relative L2 error after multiplying u_num by the best global phase."""
    a, b = _pair(u_num, u_ref)
    z = np.vdot(a, operators.mass @ b)
    if abs(z) > 0:
        a = a * (z / abs(z))
    return relative_errors(a, b, operators)[0]


def _check_series(errors):
    H = np.array([e[0] for e in errors], dtype=float)
    err = np.array([e[1] for e in errors], dtype=float)
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ValueError(f"Ошибки должны быть положительными: {err.tolist()}")
    if np.any(np.diff(H) >= 0):
        raise ValueError(f"H должен строго убывать: {H.tolist()}")
    return H, err


def fit_orders(errors) -> list:
    """order_i = log(err_i / err_{i+1}) / log(H_i / H_{i+1})."""
    H, err = _check_series(errors)
    return [float(np.log(err[i] / err[i + 1]) / np.log(H[i] / H[i + 1])) for i in range(len(H) - 1)]


def global_slope(errors) -> float:
    """Least-squares slope of log(err) against log(H)."""
    H, err = _check_series(errors)
    if len(H) < 2:
        raise ValueError("Для наклона нужно минимум две точки")
    return float(np.polyfit(np.log(H), np.log(err), 1)[0])


def h_label(n_coarse: int) -> str:
    """H = 2*pi/N written the way the tables print it."""
    return f"pi/{n_coarse // 2}" if n_coarse % 2 == 0 else f"2pi/{n_coarse}"


@dataclass
class ConvergenceReport:
    metadata: dict
    config: dict
    results: dict                       # method -> [{'n_coarse', 'H', 'err_L2', 'err_H1'}, ...]
    reference: dict
    orders: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    generated_at: str = ''

    def __post_init__(self):
        if not self.orders:
            self.compute_orders()
        if not self.generated_at:
            self.generated_at = datetime.datetime.now().isoformat(timespec='seconds')

    @property
    def methods(self) -> list:
        return list(self.results)

    def series(self, method: str, metric: str) -> list:
        return [(row['H'], row[f"err_{metric}"]) for row in self.results[method]]

    def compute_orders(self):
        for method, rows in self.results.items():
            self.orders[method] = {}
            self.slopes[method] = {}
            for metric in METRICS:
                errors = self.series(method, metric)
                try:
                    self.orders[method][metric] = fit_orders(errors)
                    self.slopes[method][metric] = global_slope(errors)
                except ValueError as exc:
                    logger.warning("%s, %s: порядки не вычислены (%s)", method, metric, exc)
                    self.orders[method][metric] = []
                    self.slopes[method][metric] = None
        for method, orders in self.orders.items():
            logger.info("%s: порядки L2 %s, H1 %s", method,
                        [round(o, 2) for o in orders['L2']], [round(o, 2) for o in orders['H1']])

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self), default=_jsonable))

    @classmethod
    def from_dict(cls, data: dict):
        return cls(**data)

    def errors_frame(self) -> pd.DataFrame:
        """Rows = H (error rows) interleaved with order rows; columns = method x metric."""
        first = self.results[self.methods[0]]
        rows = []
        for i, base in enumerate(first):
            row = {'row': 'error', 'H_label': h_label(base['n_coarse']), 'n_coarse': base['n_coarse'], 'H': base['H']}
            for method in self.methods:
                for metric in METRICS:
                    row[f"{method}:{metric}"] = self.results[method][i][f"err_{metric}"]
            rows.append(row)
            if i + 1 < len(first):
                nxt = first[i + 1]['n_coarse']
                order = {'row': 'order', 'H_label': f"{h_label(base['n_coarse'])}->{h_label(nxt)}",
                         'n_coarse': None, 'H': None}
                for method in self.methods:
                    for metric in METRICS:
                        values = self.orders[method][metric]
                        order[f"{method}:{metric}"] = values[i] if i < len(values) else None
                rows.append(order)
        df = pd.DataFrame(rows)
        df['n_coarse'] = df['n_coarse'].astype('Int64')
        return df

    def table_frame(self) -> pd.DataFrame:
        """Table layout: per method and metric an error row then an order row; columns = H."""
        labels = [h_label(row['n_coarse']) for row in self.results[self.methods[0]]]
        index, rows = [], []
        for method in self.methods:
            for metric in METRICS:
                index.append(f"{method} err_{metric}")
                rows.append([row[f"err_{metric}"] for row in self.results[method]])
                index.append(f"{method} order_{metric}")
                orders = [None] + list(self.orders[method][metric])
                rows.append((orders + [None] * len(labels))[:len(labels)])
        return pd.DataFrame(rows, index=index, columns=labels)

    def series_frame(self, method: str, metric: str) -> pd.DataFrame:
        rows = self.results[method]
        return pd.DataFrame({'n_coarse': [r['n_coarse'] for r in rows], 'H': [r['H'] for r in rows],
                             'error': [r[f"err_{metric}"] for r in rows]})


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Не сериализуемое значение: {type(value).__name__}")


def emit_report(report: ConvergenceReport, path, formats=('json', 'csv', 'series', 'xlsx', 'docx')) -> dict:
    """Write report.json/.csv, report_table.csv, series/*.csv, report.xlsx and report.docx into `path`."""
    out = Path(path)
    written = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if 'json' in formats:
            written['json'] = out / 'report.json'
            with open(written['json'], 'w', encoding='utf-8') as fh:
                json.dump(report.to_dict(), fh, indent=2, ensure_ascii=False)
        if 'csv' in formats:
            written['csv'] = out / 'report.csv'
            report.errors_frame().to_csv(written['csv'], index=False, float_format='%.6e')
            written['table'] = out / 'report_table.csv'
            report.table_frame().to_csv(written['table'], float_format='%.4e')
        if 'series' in formats:
            (out / 'series').mkdir(exist_ok=True)
            for method in report.methods:
                for metric in METRICS:
                    target = out / 'series' / f"{method}_{metric}.csv"
                    report.series_frame(method, metric).to_csv(target, index=False, float_format='%.17g')
        if 'xlsx' in formats:
            written['xlsx'] = out / 'report.xlsx'
            with pd.ExcelWriter(written['xlsx'], engine='xlsxwriter') as writer:
                report.errors_frame().to_excel(writer, sheet_name='Ошибки', index=False)
                report.table_frame().to_excel(writer, sheet_name='Таблица')
                pd.json_normalize(report.config, sep='.').T.astype(str) \
                    .rename(columns={0: 'value'}).to_excel(writer, sheet_name='Параметры')
        if 'docx' in formats:
            from report_generator import WordReportGenerator
            written['docx'] = WordReportGenerator(report).save(out / 'report.docx')
    except OSError as exc:
        raise OSError(f"Не удалось записать отчёт в {out}: {exc}") from exc
    logger.info("Отчёт сохранён: %s", out)
    return written


def load_report(path) -> ConvergenceReport:
    path = Path(path)
    if path.is_dir():
        path = path / 'report.json'
    if not path.exists():
        raise FileNotFoundError(f"Отчёт не найден: {path}")
    with open(path, encoding='utf-8') as fh:
        return ConvergenceReport.from_dict(json.load(fh))
