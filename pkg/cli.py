#!/usr/bin/env python3
"""
Запуск экспериментов по JSON-конфигурации.

Использование:
    python3 cli.py run configs/table1.json [--output-dir DIR] [--threads N] [--cache-dir DIR]
    python3 cli.py validate configs/table3.json
    python3 cli.py decay configs/decay.json
    python3 cli.py basis configs/basis.json

Коды выхода: 0 — успех, 2 — ошибка конфигурации, 1 — ошибка решателя.
"""
import argparse
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from analysis import (ConvergenceReport, comparison_operators, emit_report, h_label,
                      phase_aligned_error, relative_errors)
from fem_core import SolverError, assemble_fine_operators, prolongation
from mesh import DOMAIN_LENGTH, build_grid_pair
from msfem_basis import (build_global_basis, build_localized_basis, export_basis, localization_gap,
                         measure_decay, oversampling_layers)
from potentials import POTENTIAL_NAMES, gaussian_wavepacket, make_potential, shift_phase
from solvers import (EvolutionConfig, fem_cn_evolve, is_fft_friendly, msfem_cn_evolve,
                     spectral_resample, tssp_evolve)

logger = logging.getLogger(__name__)

METHODS = ('fem-cn', 'msfem-global', 'msfem-localized', 'tssp')
REFERENCE_METHODS = ('tssp', 'msfem-global')
MSFEM_METHODS = ('msfem-global', 'msfem-localized')

MIN_FINE_NODES = 8192
# relative change of the finest error under dt/2 above which the sweep is not time-saturated
SATURATION_TOLERANCE = 0.1


class ConfigError(ValueError):
    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class Diagnostic:
    level: str     # 'error' | 'warning'
    code: str
    message: str

    def __str__(self):
        return f"[{self.level.upper()}] {self.code}: {self.message}"


def _default_dt(potential: dict) -> float:
    return 2.5e-5 if potential.get('name') == 'discontinuous' else 1e-4


def _default_c(potential: dict) -> int:
    return 2 if potential.get('name') == 'discontinuous' else 3


def _delta_tags(potential: dict) -> tuple:
    name = potential.get('name')
    if name == 'smooth':
        return (float(potential['delta']),)
    if name == 'discontinuous':
        return (float(potential['delta1']), float(potential['delta2']))
    return (float(potential['delta']),) if 'delta' in potential else ()


def _min_resolved_nodes(epsilon: float, deltas: tuple) -> int:
    """Smallest node count with h <= min(eps, delta)/8 and 16 elements per period 2*pi*delta."""
    scale = min((epsilon,) + deltas)
    n = math.ceil(DOMAIN_LENGTH * 8.0 / scale)
    if deltas:
        n = max(n, math.ceil(16.0 / min(deltas)))
    return n


def _default_reference(potential: dict, dt: float) -> dict:
    if potential.get('name') == 'discontinuous':
        return {'method': 'msfem-global', 'n_coarse': 2048, 'refine_factor': 12, 'dt': dt, 'truncate': 1e-14}
    return {'method': 'tssp', 'resolution': 32768, 'dt': 2.5e-6}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    potential: dict
    epsilon: float
    T: float
    dt: float
    n_coarse: tuple
    fine_nodes: int
    refine_factor: object      # 'auto' or int
    methods: tuple
    oversampling: dict
    reference: dict
    saturation_check: bool = True
    log_stride: int = 100
    seed: int = 0
    decay: dict = field(default_factory=dict)
    basis: dict = field(default_factory=dict)
    output_dir: str = None

    @classmethod
    def from_dict(cls, data: dict):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            logger.warning("Неизвестные ключи конфигурации проигнорированы: %s", sorted(unknown))
        try:
            potential = dict(data.get('potential', {'name': 'smooth', 'delta': 0.1}))
            potential.setdefault('shift', 0.0)
            epsilon = float(data.get('epsilon', 0.125))
            dt = float(data.get('dt', _default_dt(potential)))
            n_coarse = tuple(int(n) for n in data.get('n_coarse', ()))
            fine_nodes = data.get('fine_nodes')
            if fine_nodes is None and n_coarse:
                fine_nodes = cls._default_fine_nodes(n_coarse, epsilon, potential)
            refine_factor = data.get('refine_factor', 'auto')
            if refine_factor != 'auto':
                refine_factor = int(refine_factor)
            oversampling = dict(data.get('oversampling', {'c': _default_c(potential)}))
            reference = dict(data.get('reference', _default_reference(potential, dt)))
            return cls(
                name=str(data.get('name', 'experiment')),
                potential=potential,
                epsilon=epsilon,
                T=float(data.get('T', 0.5)),
                dt=dt,
                n_coarse=n_coarse,
                fine_nodes=int(fine_nodes) if fine_nodes is not None else 0,
                refine_factor=refine_factor,
                methods=tuple(data.get('methods', ())),
                oversampling=oversampling,
                reference=reference,
                saturation_check=bool(data.get('saturation_check', True)),
                log_stride=int(data.get('log_stride', 100)),
                seed=int(data.get('seed', 0)),
                decay=dict(data.get('decay', {})),
                basis=dict(data.get('basis', {})),
                output_dir=data.get('output_dir'),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Некорректная конфигурация: {exc!r}") from exc

    @staticmethod
    def _default_fine_nodes(n_coarse, epsilon, potential) -> int:
        base = math.lcm(*n_coarse)
        if potential.get('name') == 'discontinuous' and base % 2:
            base *= 2
        target = max(MIN_FINE_NODES, _min_resolved_nodes(epsilon, _delta_tags(potential)))
        return base * math.ceil(target / base)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @property
    def delta_tags(self) -> tuple:
        return _delta_tags(self.potential)

    def refine_factor_for(self, n: int) -> int:
        """Smallest r whose fine grid n*r resolves the scales and nests in the comparison grid."""
        if self.refine_factor != 'auto':
            return self.refine_factor
        needed = _min_resolved_nodes(self.epsilon, self.delta_tags)
        even = self.potential.get('name') == 'discontinuous'
        # r = 1 collapses the multiscale space onto P1
        start = 2 if any(m in MSFEM_METHODS for m in self.methods) else 1
        for r in range(start, self.fine_nodes // n + 1):
            n_fine = n * r
            if n_fine >= needed and self.fine_nodes % n_fine == 0 and not (even and n_fine % 2):
                return r
        return self.fine_nodes // n

    def oversampling_for(self, n: int) -> int:
        if 'm' in self.oversampling:
            return int(self.oversampling['m'])
        return oversampling_layers(n, self.oversampling.get('c', _default_c(self.potential)))

    def oversampling_rule(self) -> str:
        if 'm' in self.oversampling:
            return f"m = {self.oversampling['m']}"
        return f"m = {self.oversampling.get('c', _default_c(self.potential))} * ceil(log2(2pi/H))"

    def evolution(self, dt: float = None) -> EvolutionConfig:
        return EvolutionConfig.from_final_time(self.T, dt or self.dt, self.epsilon, self.log_stride)

    def reference_nodes(self) -> int:
        ref = self.reference
        if ref.get('method') == 'tssp':
            return int(ref.get('resolution', 0))
        return int(ref.get('n_coarse', 0)) * int(ref.get('refine_factor', 1))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Конфигурация не найдена: {path}")
    with open(path, encoding='utf-8') as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: некорректный JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


def validate_config(config: ExperimentConfig) -> list:
    out = []

    def error(code, message):
        out.append(Diagnostic('error', code, message))

    def warning(code, message):
        out.append(Diagnostic('warning', code, message))

    if not config.methods:
        error('methods-empty', "Не задан ни один метод")
    for method in config.methods:
        if method not in METHODS:
            error('method-unknown', f"Неизвестный метод {method!r}, допустимо: {METHODS}")
    name = config.potential.get('name')
    if name not in POTENTIAL_NAMES:
        error('potential-unknown', f"Неизвестный потенциал {name!r}, допустимо: {POTENTIAL_NAMES}")
    elif name == 'custom' and not Path(config.potential.get('path', '')).exists():
        error('potential-file', f"Файл потенциала не найден: {config.potential.get('path')}")
    if not 0 < config.epsilon <= 1:
        error('epsilon-range', f"epsilon = {config.epsilon} вне (0, 1]")
    if not config.T > 0 or not config.dt > 0:
        error('time-range', f"Нужны T > 0 и dt > 0, получено T = {config.T}, dt = {config.dt}")
    elif abs(round(config.T / config.dt) * config.dt - config.T) > 1e-9 * config.T:
        error('time-steps', f"T = {config.T} не кратно dt = {config.dt}")
    if not config.n_coarse:
        error('h-list-empty', "Список n_coarse пуст")
    if any(b <= a for a, b in zip(config.n_coarse, config.n_coarse[1:])):
        error('h-list-order', f"n_coarse должен строго возрастать (H убывает): {list(config.n_coarse)}")
    if any(d.level == 'error' for d in out):
        return out

    discontinuous = name == 'discontinuous'
    deltas = config.delta_tags
    needed = _min_resolved_nodes(config.epsilon, deltas)
    fine_nodes = config.fine_nodes

    def check_fine_grid(n_fine, what):
        if n_fine < needed:
            error('resolution', f"{what}: {n_fine} узлов не разрешают масштабы "
                                f"(h <= min(eps, delta)/8 и 16 элементов на период требуют >= {needed})")
        if discontinuous and n_fine % 2:
            error('discontinuity-node', f"{what}: нечётное число узлов {n_fine}, x = pi не узел сетки")

    check_fine_grid(fine_nodes, "сетка сравнения")
    for n in config.n_coarse:
        if n < 4:
            error('n-coarse', f"n_coarse = {n} < 4")
            continue
        if fine_nodes % n:
            error('nesting', f"n_coarse = {n} не делит сетку сравнения {fine_nodes}")
            continue
        r = config.refine_factor_for(n)
        if r < 1 or fine_nodes % (n * r):
            error('refine-factor', f"N = {n}, r = {r}: мелкая сетка {n * r} не вложена в сетку сравнения {fine_nodes}")
            continue
        grid_methods = [m for m in config.methods if m != 'tssp']
        if grid_methods:
            check_fine_grid(n * r, f"мелкая сетка для {h_label(n)}")
        if 'tssp' in config.methods and not is_fft_friendly(n):
            error('fft-size', f"TSSP: размер сетки {n} не подходит для БПФ")
        if DOMAIN_LENGTH / n > config.epsilon:
            warning('assumption-h-eps', f"H = {h_label(n)} = {DOMAIN_LENGTH / n:.4g} > eps = {config.epsilon}")
        if 'msfem-localized' in config.methods:
            m = config.oversampling_for(n)
            if m < 1:
                error('oversampling', f"m = {m} < 1")
            elif r < 2 and 2 * m + 2 < n:
                error('localized-refine', f"{h_label(n)}: локализованный базис требует r >= 2 (r = {r}, m = {m})")
            rule = oversampling_layers(n, _default_c(config.potential))
            if 'm' in config.oversampling and m < rule:
                warning('oversampling-rule', f"{h_label(n)}: m = {m} меньше правила c*ceil(log2(2pi/H)) = {rule}")

    ref = config.reference
    method = ref.get('method')
    if method not in REFERENCE_METHODS:
        error('reference-method', f"Эталонный метод {method!r} не поддерживается, допустимо: {REFERENCE_METHODS}")
    else:
        nodes = config.reference_nodes()
        if not ref.get('dt', 0) > 0:
            error('reference-dt', f"Шаг эталона dt = {ref.get('dt')} должен быть > 0")
        elif abs(round(config.T / ref['dt']) * ref['dt'] - config.T) > 1e-9 * config.T:
            error('reference-dt', f"T = {config.T} не кратно шагу эталона dt = {ref['dt']}")
        if method == 'tssp':
            if not is_fft_friendly(nodes):
                error('fft-size', f"Эталон TSSP: размер {nodes} не подходит для БПФ")
        else:
            if nodes % fine_nodes:
                error('reference-nesting', f"Сетка эталона {nodes} не кратна сетке сравнения {fine_nodes}")
            check_fine_grid(nodes, "сетка эталона")
    return out


def _check(config: ExperimentConfig):
    diagnostics = validate_config(config)
    for d in diagnostics:
        if d.level == 'warning':
            logger.warning("%s", d)
    errors = [d for d in diagnostics if d.level == 'error']
    if errors:
        raise ConfigError("; ".join(str(d) for d in errors), diagnostics)
    return diagnostics


def reference_key(config: ExperimentConfig) -> str:
    payload = {'potential': config.potential, 'epsilon': config.epsilon, 'T': config.T,
               'reference': config.reference}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode('utf-8')).hexdigest()[:16]


def _reference_raw(config: ExperimentConfig):
    ref = config.reference
    u0 = gaussian_wavepacket(config.epsilon)
    evolution = EvolutionConfig.from_final_time(config.T, ref['dt'], config.epsilon,
                                                max(1, round(config.T / ref['dt']) // 100))
    if ref['method'] == 'tssp':
        grid = build_grid_pair(int(ref['resolution']), 1)
        V = make_potential(config.potential, grid).at(grid.fine_nodes)
        return tssp_evolve(u0(grid.fine_nodes), V, evolution).final.coefficients
    grid = build_grid_pair(int(ref['n_coarse']), int(ref['refine_factor']))
    V = make_potential(config.potential, grid)
    ops = assemble_fine_operators(grid, V, config.epsilon)
    basis = build_global_basis(grid, config.epsilon, V, operators=ops, truncate=ref.get('truncate'))
    return msfem_cn_evolve(basis, ops, u0, evolution).fine.coefficients


def compute_reference(config: ExperimentConfig, cache_dir=None):
    """Reference solution at T on the comparison grid, and its descriptor."""
    key = reference_key(config)
    cache_file = Path(cache_dir) / f"reference_{key}.npz" if cache_dir else None
    if cache_file is not None and cache_file.exists():
        logger.info("Эталон из кэша: %s", cache_file)
        raw = np.load(cache_file)['u']
    else:
        logger.info("Расчёт эталона: %s", config.reference)
        raw = _reference_raw(config)
        if cache_file is not None:
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            np.savez(cache_file, u=raw)
            logger.info("Эталон сохранён в кэш: %s", cache_file)

    if config.reference['method'] == 'tssp':
        u_ref = spectral_resample(raw, config.fine_nodes)
    else:
        u_ref = raw[::len(raw) // config.fine_nodes]
    # the cache keeps the shifted-potential state
    u_ref = shift_phase(u_ref, config.potential.get('shift', 0.0), config.T, config.epsilon)
    descriptor = dict(config.reference, nodes=len(raw), cache_key=key)
    return u_ref, descriptor


def run_cell(config: ExperimentConfig, method: str, n: int, dt: float = None, threads: int = 1) -> dict:
    """Evolve one (method, H) cell to T and return its state on the comparison grid."""
    evolution = config.evolution(dt)
    u0 = gaussian_wavepacket(config.epsilon)
    try:
        if method == 'tssp':
            grid = build_grid_pair(n, 1)
            V = make_potential(config.potential, grid).at(grid.fine_nodes)
            result = tssp_evolve(u0(grid.fine_nodes), V, evolution)
            u = spectral_resample(result.final.coefficients, config.fine_nodes)
        else:
            r = config.refine_factor_for(n)
            grid = build_grid_pair(n, r)
            V = make_potential(config.potential, grid)
            ops = assemble_fine_operators(grid, V, config.epsilon)
            if method == 'fem-cn':
                result = fem_cn_evolve(ops, u0, evolution)
            elif method == 'msfem-global':
                basis = build_global_basis(grid, config.epsilon, V, operators=ops)
                result = msfem_cn_evolve(basis, ops, u0, evolution)
            else:
                basis = build_localized_basis(grid, config.epsilon, V, config.oversampling_for(n),
                                              operators=ops, threads=threads)
                result = msfem_cn_evolve(basis, ops, u0, evolution)
            u = result.fine.coefficients
            if grid.n_fine != config.fine_nodes:
                u = prolongation(build_grid_pair(grid.n_fine, config.fine_nodes // grid.n_fine)) @ u
        u = shift_phase(u, config.potential.get('shift', 0.0), evolution.n_steps * evolution.dt, config.epsilon)
    except SolverError as exc:
        raise SolverError(f"{method}, H = {h_label(n)}: {exc}") from exc
    mass = result.log['mass']
    return {'u': u, 'wall_time': result.wall_time, 'mass_drift': float(abs(mass.iloc[-1] / mass.iloc[0] - 1.0))}


def run_experiment(config: ExperimentConfig, output_dir=None, threads: int = 1, cache_dir=None) -> ConvergenceReport:
    _check(config)
    logger.info("Эксперимент %s: методы %s, n_coarse %s, сетка сравнения %d",
                config.name, list(config.methods), list(config.n_coarse), config.fine_nodes)
    norms = comparison_operators(config.fine_nodes)
    u_ref, reference = compute_reference(config, cache_dir)

    cells = [(method, n) for method in config.methods for n in config.n_coarse]
    inner = max(1, threads // len(cells))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outputs = list(pool.map(lambda cell: run_cell(config, *cell, threads=inner), cells))

    results = {method: [] for method in config.methods}
    diagnostics = {'phase_aligned_L2': {}, 'mass_drift': {}}
    timing = {}
    for (method, n), out in zip(cells, outputs):
        err_l2, err_h1 = relative_errors(out['u'], u_ref, norms)
        results[method].append({'n_coarse': n, 'H': DOMAIN_LENGTH / n, 'err_L2': err_l2, 'err_H1': err_h1})
        label = f"{method} {h_label(n)}"
        aligned = phase_aligned_error(out['u'], u_ref, norms)
        diagnostics['phase_aligned_L2'][label] = aligned
        if aligned < 0.5 * err_l2:
            logger.warning("%s: после выравнивания фазы ошибка L2 %.2e против %.2e, преобладает фазовая ошибка",
                           label, aligned, err_l2)
        diagnostics['mass_drift'][label] = out['mass_drift']
        timing[label] = out['wall_time']
        logger.info("%s: err_L2 = %.4e, err_H1 = %.4e (%.1f с)", label, err_l2, err_h1, out['wall_time'])

    if config.saturation_check:
        diagnostics['temporal_saturation'] = _saturation_check(config, results, u_ref, norms, threads)

    metadata = {
        'name': config.name,
        'potential': config.potential,
        'delta_tags': list(config.delta_tags),
        'epsilon': config.epsilon,
        'T': config.T,
        'dt': config.dt,
        'oversampling': config.oversampling_rule(),
        'fine_nodes': config.fine_nodes,
        'n_coarse': list(config.n_coarse),
        'seed': config.seed,
    }
    report = ConvergenceReport(metadata, config.to_dict(), results, reference,
                               diagnostics=diagnostics, timing=timing)
    if output_dir is not None:
        emit_report(report, output_dir)
    return report


def _saturation_check(config, results, u_ref, norms, threads) -> dict:
    """Rerun the finest H with dt/2; a large change means the time error still matters."""
    n = config.n_coarse[-1]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        halved = list(pool.map(lambda method: run_cell(config, method, n, dt=config.dt / 2), config.methods))
    out = {}
    for method, cell in zip(config.methods, halved):
        err = results[method][-1]['err_L2']
        err_half = relative_errors(cell['u'], u_ref, norms)[0]
        change = abs(err_half - err) / err if err > 0 else 0.0
        out[method] = {'err_L2': err, 'err_L2_half_dt': err_half, 'relative_change': change}
        if change > SATURATION_TOLERANCE:
            logger.warning("%s, %s: ошибка меняется на %.0f%% при dt/2 — временная ошибка не пренебрежима",
                           method, h_label(n), 100 * change)
    return out


def run_decay_study(config: ExperimentConfig, output_dir, threads: int = 1) -> tuple:
    """Decay profiles of sampled global basis functions and the global/localized gap g(m)."""
    settings = {'n_coarse': 64, 'refine_factor': 32, 'nodes': 5, 'gap_layers': [1, 2, 3, 4, 5, 6, 7, 8]}
    settings.update(config.decay)
    grid = build_grid_pair(int(settings['n_coarse']), int(settings['refine_factor']))
    V = make_potential(config.potential, grid)
    ops = assemble_fine_operators(grid, V, config.epsilon)
    basis = build_global_basis(grid, config.epsilon, V, operators=ops)

    nodes = settings['nodes']
    if isinstance(nodes, int):
        nodes = np.linspace(0, grid.n_coarse, nodes, endpoint=False).astype(int).tolist()
    out = Path(output_dir) / 'decay'
    out.mkdir(parents=True, exist_ok=True)

    profiles, summary = [], []
    for j in nodes:
        profile = measure_decay(basis, int(j), settings.get('m_max'))
        profile.to_frame().to_csv(out / f"node_{j}.csv", index=False, float_format='%.17g')
        below = np.nonzero(profile.ratios < 1e-6)[0]
        summary.append({'node': j, 'beta': profile.beta, 'gradient_norm': profile.gradient_norm,
                        'm_saturation': profile.m_saturation,
                        'first_m_below_1e-6': int(below[0]) if len(below) else None})
        profiles.append(profile)
        logger.info("Узел %d: beta = %s, ||grad psi|| = %.4e", j, profile.beta, profile.gradient_norm)
    pd.DataFrame(summary).to_csv(out / 'summary.csv', index=False)

    gaps = []
    for m in settings['gap_layers']:
        local = build_localized_basis(grid, config.epsilon, V, int(m), operators=ops, threads=threads)
        gaps.append({'m': int(m), 'gap': localization_gap(basis, local, ops.stiffness)})
    gap_df = pd.DataFrame(gaps)
    gap_df.to_csv(out / 'gap.csv', index=False, float_format='%.17g')
    logger.info("Профили убывания сохранены: %s", out)
    return profiles, gap_df


def run_basis_export(config: ExperimentConfig, output_dir, threads: int = 1) -> Path:
    settings = {'n_coarse': 16, 'refine_factor': 8, 'kind': 'global', 'm': 2, 'format': 'csv'}
    settings.update(config.basis)
    grid = build_grid_pair(int(settings['n_coarse']), int(settings['refine_factor']))
    V = make_potential(config.potential, grid)
    ops = assemble_fine_operators(grid, V, config.epsilon)
    if settings['kind'] == 'localized':
        basis = build_localized_basis(grid, config.epsilon, V, int(settings['m']), operators=ops, threads=threads)
    elif settings['kind'] == 'global':
        basis = build_global_basis(grid, config.epsilon, V, operators=ops)
    else:
        raise ConfigError(f"Неизвестный тип базиса {settings['kind']!r} (ожидается 'global' или 'localized')")
    suffix = 'csv' if settings['format'] == 'csv' else 'txt'
    return export_basis(basis, Path(output_dir) / 'basis' / f"basis_{basis.kind}.{suffix}", settings['format'])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=str, help="Путь к JSON-конфигурации")
    common.add_argument("--output-dir", type=str, default=None, help="Папка для результатов")
    common.add_argument("--threads", type=int, default=1, help="Число потоков")
    common.add_argument("--cache-dir", type=str, default=None, help="Папка кэша эталонных решений")
    common.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Уровень логирования")

    parser = argparse.ArgumentParser(description="Лаборатория OC MsFEM для полуклассического уравнения Шрёдингера")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Исследование сходимости по списку H")
    sub.add_parser("validate", parents=[common], help="Проверка конфигурации")
    sub.add_parser("decay", parents=[common], help="Экспоненциальное убывание базисных функций")
    sub.add_parser("basis", parents=[common], help="Экспорт базисных функций")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        output_dir = Path(args.output_dir or config.output_dir or Path("results") / config.name)
        if args.command == "validate":
            diagnostics = validate_config(config)
            for d in diagnostics:
                print(d)
            if not diagnostics:
                print("[OK] Конфигурация корректна")
            return 2 if any(d.level == 'error' for d in diagnostics) else 0
        if args.command == "run":
            report = run_experiment(config, output_dir, threads=args.threads, cache_dir=args.cache_dir)
            print(report.table_frame().to_string())
        elif args.command == "decay":
            _, gap = run_decay_study(config, output_dir, threads=args.threads)
            print(gap.to_string(index=False))
        else:
            print(f"Базис сохранён: {run_basis_export(config, output_dir, threads=args.threads)}")
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        logger.error("Ошибка конфигурации: %s", exc)
        return 2
    except SolverError as exc:
        logger.error("Ошибка решателя: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
