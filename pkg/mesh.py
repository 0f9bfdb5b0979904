"""Periodic 1D meshes on [0, 2*pi]: coarse/fine nesting and oversampling patches."""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

DOMAIN_LENGTH = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGridPair:
    n_coarse: int
    refine_factor: int
    domain_length: float = DOMAIN_LENGTH

    def __post_init__(self):
        for name in ('n_coarse', 'refine_factor'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} должен быть целым, получено {value!r}")
        if self.n_coarse < 4:
            raise ValueError(f"n_coarse должен быть >= 4, получено {self.n_coarse}")
        if self.refine_factor < 1:
            raise ValueError(f"refine_factor должен быть >= 1, получено {self.refine_factor}")

    @property
    def H(self) -> float:
        return self.domain_length / self.n_coarse

    @property
    def h(self) -> float:
        return self.domain_length / self.n_fine

    @property
    def n_fine(self) -> int:
        return self.n_coarse * self.refine_factor

    @cached_property
    def coarse_nodes(self) -> np.ndarray:
        return np.arange(self.n_coarse) * self.H

    @cached_property
    def fine_nodes(self) -> np.ndarray:
        return np.arange(self.n_fine) * self.h

    def coarse_to_fine(self, j: int) -> int:
        return (j % self.n_coarse) * self.refine_factor

    def element_of_fine(self, e):
        """Coarse element containing fine element e (vectorized)."""
        return (np.asarray(e) % self.n_fine) // self.refine_factor

    def level_size(self, level: str) -> tuple:
        """(node count, element size) of a level."""
        if level == 'coarse':
            return self.n_coarse, self.H
        if level == 'fine':
            return self.n_fine, self.h
        raise ValueError(f"Неизвестный уровень сетки: {level!r} (ожидается 'coarse' или 'fine')")


@dataclass(frozen=True)
class Patch:
    center_node: int
    layers: int
    element_set: tuple
    fine_node_set: tuple
    interior_fine_nodes: tuple
    constraint_nodes: tuple
    saturated: bool

    @property
    def n_elements(self) -> int:
        return len(self.element_set)


def build_grid_pair(n_coarse: int, refine_factor: int) -> PeriodicGridPair:
    grid = PeriodicGridPair(n_coarse, refine_factor)
    logger.debug("Пара сеток N=%d r=%d (H=%.6g, h=%.6g)", n_coarse, refine_factor, grid.H, grid.h)
    return grid


def patch(grid: PeriodicGridPair, j: int, m: int) -> Patch:
    """Patch N^m(S_j): the two elements touching node j grown by m layers per side."""
    N, r = grid.n_coarse, grid.refine_factor
    if not 0 <= j < N:
        raise ValueError(f"Узел {j} вне диапазона [0, {N})")
    if m < 0:
        raise ValueError(f"Число слоёв m должно быть >= 0, получено {m}")

    if 2 * m + 2 >= N:
        elements = tuple(range(N))
        fine = tuple(range(grid.n_fine))
        return Patch(j, m, elements, fine, fine, tuple(range(N)), True)

    n_el = 2 * m + 2
    first = j - 1 - m
    elements = tuple(int(k) for k in (first + np.arange(n_el)) % N)
    start = first * r
    fine = tuple(int(i) for i in (start + np.arange(n_el * r + 1)) % grid.n_fine)
    constraints = tuple(int(k) for k in (first + np.arange(n_el + 1)) % N)
    return Patch(j, m, elements, fine, fine[1:-1], constraints, False)
