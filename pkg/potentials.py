"""Multiscale potentials and initial data.

Potentials are stored as values at the 2-point Gauss points of every fine
element, the form consumed by fem_core.assemble_weighted_mass, and keep a
pointwise evaluator for grid-node sampling (spectral solvers).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from fem_core import Quadrature, two_point_gauss
from mesh import DOMAIN_LENGTH, PeriodicGridPair

logger = logging.getLogger(__name__)

POTENTIAL_NAMES = ('smooth', 'discontinuous', 'custom')


@dataclass(frozen=True)
class PotentialField:
    samples: np.ndarray
    v_min: float
    v_max: float
    delta_tags: tuple = ()
    discontinuities: tuple = ()
    name: str = 'custom'
    shift: float = 0.0
    evaluator: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.v_min > 0:
            raise ValueError(f"Потенциал должен быть положительным: v_min = {self.v_min} "
                             f"(используйте постоянный сдвиг 'shift')")
        tol = 1e-12 * max(abs(self.v_max), 1.0)
        lo, hi = float(np.min(self.samples)), float(np.max(self.samples))
        if lo < self.v_min - tol or hi > self.v_max + tol:
            raise ValueError(f"Отсчёты потенциала [{lo:.6g}, {hi:.6g}] выходят за "
                             f"границы [{self.v_min:.6g}, {self.v_max:.6g}]")

    def at(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InitialData:
    epsilon: float
    evaluator: Callable = field(repr=False, compare=False)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))


def _field(func, grid, quadrature, v_min, v_max, shift, **meta) -> PotentialField:
    quadrature = quadrature or two_point_gauss(grid)

    def shifted(x):
        return func(x) + shift

    return PotentialField(shifted(quadrature.points), v_min + shift, v_max + shift,
                          shift=float(shift), evaluator=shifted, **meta)


def smooth_potential(delta: float, grid: PeriodicGridPair, quadrature: Quadrature = None,
                     shift: float = 0.0) -> PotentialField:
    """V(x) = cos(x/delta) + 2."""
    if delta <= 0:
        raise ValueError(f"delta должен быть > 0, получено {delta}")

    def V(x):
        return np.cos(x / delta) + 2.0

    return _field(V, grid, quadrature, 1.0, 3.0, shift,
                  delta_tags=(float(delta),), name='smooth')


def discontinuous_potential(delta1: float, delta2: float, grid: PeriodicGridPair,
                            quadrature: Quadrature = None, shift: float = 0.0) -> PotentialField:
    """|x - pi|^2 + 2 + cos(x/delta1) on [0, pi], cos(x/delta2) branch on (pi, 2*pi]."""
    if delta1 <= 0 or delta2 <= 0:
        raise ValueError(f"delta1, delta2 должны быть > 0, получено {delta1}, {delta2}")
    if grid.n_fine % 2:
        raise ValueError(f"Точка разрыва x = pi не является узлом мелкой сетки "
                         f"(n_fine = {grid.n_fine} нечётно)")

    def V(x):
        # node n_fine/2 may land one ulp off pi
        left = x <= np.pi + 1e-12
        return (x - np.pi) ** 2 + 2.0 + np.where(left, np.cos(x / delta1), np.cos(x / delta2))

    return _field(V, grid, quadrature, 1.0, np.pi ** 2 + 3.0, shift,
                  delta_tags=(float(delta1), float(delta2)), discontinuities=(float(np.pi),),
                  name='discontinuous')


def custom_potential(path, grid: PeriodicGridPair, quadrature: Quadrature = None,
                     shift: float = 0.0) -> PotentialField:
    """Sampled potential from a CSV/XLSX table with columns x, V (periodic linear interpolation)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Файл потенциала не найден: {path}")
    df = pd.read_excel(path) if path.suffix.lower() in ('.xlsx', '.xls') else pd.read_csv(path)
    if not {'x', 'V'} <= set(df.columns):
        raise ValueError(f"{path}: ожидаются колонки 'x' и 'V', найдены {list(df.columns)}")
    df = df.sort_values('x')
    xs, vs = df['x'].to_numpy(float), df['V'].to_numpy(float)
    if len(xs) < 4 or xs[0] < 0 or xs[-1] >= DOMAIN_LENGTH:
        raise ValueError(f"{path}: нужно >= 4 отсчётов с x в [0, 2*pi)")
    if len(xs) < grid.n_fine:
        logger.warning("Потенциал %s задан в %d точках, мелкая сетка содержит %d узлов",
                       path.name, len(xs), grid.n_fine)

    def V(x):
        return np.interp(x, xs, vs, period=DOMAIN_LENGTH)

    return _field(V, grid, quadrature, float(vs.min()), float(vs.max()), shift, name='custom')


def make_potential(params: dict, grid: PeriodicGridPair, quadrature: Quadrature = None) -> PotentialField:
    """Build a potential from its config entry ({'name': ..., parameters, 'shift'})."""
    name = params.get('name')
    shift = float(params.get('shift', 0.0))
    if name == 'smooth':
        return smooth_potential(params['delta'], grid, quadrature, shift)
    if name == 'discontinuous':
        return discontinuous_potential(params['delta1'], params['delta2'], grid, quadrature, shift)
    if name == 'custom':
        field_ = custom_potential(params['path'], grid, quadrature, shift)
        if 'delta' in params:
            return PotentialField(field_.samples, field_.v_min, field_.v_max, (float(params['delta']),),
                                  (), 'custom', shift, field_.evaluator)
        return field_
    raise ValueError(f"Неизвестный потенциал {name!r}, допустимо: {POTENTIAL_NAMES}")


def gaussian_wavepacket(epsilon: float) -> InitialData:
    """u0(x) = (10/pi)^(1/4) exp(-5 (x-pi)^2) exp(-i (x-pi)^2 / eps)."""
    if epsilon <= 0:
        raise ValueError(f"epsilon должен быть > 0, получено {epsilon}")
    amplitude = (10.0 / np.pi) ** 0.25

    def u0(x):
        s2 = (x - np.pi) ** 2
        return amplitude * np.exp(-5.0 * s2) * np.exp(-1j * s2 / epsilon)

    return InitialData(float(epsilon), u0)


def shift_phase(u, shift: float, t: float, epsilon: float):
    """Undo the global phase exp(-i*shift*t/eps) introduced by the potential shift V -> V + shift."""
    return np.asarray(u) * np.exp(1j * shift * t / epsilon)
