"""P1 finite elements on periodic 1D grids.

Mass, stiffness and potential-weighted mass assembly, the bilinear form
a(v, w) = (eps^2/2)(v', w') + (V v, w), norms, coarse-to-fine prolongation
and the Clement-type interpolation alpha_j(v) = (v, phi_j) / (1, phi_j).
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from mesh import PeriodicGridPair

logger = logging.getLogger(__name__)

SPACES = ('fine', 'coarse', 'multiscale', 'fourier')

# Gauss-Legendre nodes on [0, 1]
_GAUSS_XI = np.array([0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0))])


class SolverError(RuntimeError):
    """A direct factorization or saddle-point solve failed."""


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray        # (n_fine, 2) physical quadrature points
    weights: np.ndarray       # (2,) = h/2 each
    shape_values: np.ndarray  # (2, 2): [point, local node] hat values


def two_point_gauss(grid: PeriodicGridPair) -> Quadrature:
    left = grid.fine_nodes[:, None]
    points = left + grid.h * _GAUSS_XI[None, :]
    weights = np.full(2, 0.5 * grid.h)
    shape_values = np.column_stack([1.0 - _GAUSS_XI, _GAUSS_XI])
    return Quadrature(points, weights, shape_values)


def _assemble_cyclic(n: int, local: np.ndarray) -> sp.csr_matrix:
    """Sum per-element 2x2 blocks (shape (n, 2, 2)) into an n x n cyclic matrix."""
    e = np.arange(n)
    e1 = (e + 1) % n
    rows = np.concatenate([e, e, e1, e1])
    cols = np.concatenate([e, e1, e, e1])
    vals = np.concatenate([local[:, 0, 0], local[:, 0, 1], local[:, 1, 0], local[:, 1, 1]])
    # duplicates are summed in a fixed order by tocsr
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_mass(grid: PeriodicGridPair, level: str = 'fine') -> sp.csr_matrix:
    n, ell = grid.level_size(level)
    local = np.broadcast_to(ell / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]]), (n, 2, 2))
    return _assemble_cyclic(n, local)


def assemble_stiffness(grid: PeriodicGridPair, level: str = 'fine') -> sp.csr_matrix:
    n, ell = grid.level_size(level)
    local = np.broadcast_to(np.array([[1.0, -1.0], [-1.0, 1.0]]) / ell, (n, 2, 2))
    return _assemble_cyclic(n, local)


def assemble_weighted_mass(grid: PeriodicGridPair, level: str, V) -> sp.csr_matrix:
    """(V phi_i, phi_j) by 2-point Gauss on every fine element."""
    if level != 'fine':
        raise ValueError("Взвешенная матрица масс собирается только на мелкой сетке; "
                         "грубый оператор получается через продолжение P^T M_V P")
    samples = np.asarray(V.samples, dtype=float)
    if samples.shape != (grid.n_fine, 2):
        raise ValueError(f"Отсчёты потенциала имеют форму {samples.shape}, "
                         f"ожидается ({grid.n_fine}, 2)")
    quad = two_point_gauss(grid)
    phi = quad.shape_values
    # local[e, a, b] = sum_q w_q V[e, q] phi[q, a] phi[q, b]
    local = np.einsum('eq,qa,qb->eab', samples * quad.weights[None, :], phi, phi)
    local[:, 1, 0] = local[:, 0, 1]
    return _assemble_cyclic(grid.n_fine, local)


def prolongation(grid: PeriodicGridPair) -> sp.csr_matrix:
    """Fine x coarse matrix; column j holds fine nodal values of the coarse hat phi_j."""
    N, r = grid.n_coarse, grid.refine_factor
    i = np.arange(grid.n_fine)
    j = i // r
    s = (i % r) / r
    rows = np.concatenate([i, i[s > 0]])
    cols = np.concatenate([j, (j[s > 0] + 1) % N])
    vals = np.concatenate([1.0 - s, s[s > 0]])
    return sp.coo_matrix((vals, (rows, cols)), shape=(grid.n_fine, N)).tocsr()


def constraint_matrix(P: sp.spmatrix, mass_fine: sp.spmatrix) -> sp.csr_matrix:
    """C = P^T M_fine; row j gives the moment (v, phi_j)."""
    return (P.T @ mass_fine).tocsr()


@dataclass
class WaveFunction:
    coefficients: np.ndarray
    space: str
    grid: PeriodicGridPair = None

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"Неизвестное пространство {self.space!r}, допустимо: {SPACES}")
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        expected = self.dimension()
        if expected is not None and self.coefficients.shape != (expected,):
            raise ValueError(f"Длина коэффициентов {self.coefficients.shape} не совпадает "
                             f"с размерностью пространства {self.space!r}: {expected}")

    def dimension(self):
        if self.grid is None or self.space == 'fourier':
            return None
        if self.space == 'fine':
            return self.grid.n_fine
        return self.grid.n_coarse


@dataclass(frozen=True)
class FineOperators:
    grid: PeriodicGridPair
    epsilon: float
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    weighted_mass: sp.csr_matrix
    energy: sp.csr_matrix          # A = (eps^2/2) K + M_V
    prolongation: sp.csr_matrix
    constraint: sp.csr_matrix


def energy_matrix(stiffness, weighted_mass, epsilon: float) -> sp.csr_matrix:
    return (0.5 * epsilon ** 2 * stiffness + weighted_mass).tocsr()


def assemble_fine_operators(grid: PeriodicGridPair, V, epsilon: float) -> FineOperators:
    if epsilon <= 0:
        raise ValueError(f"epsilon должен быть > 0, получено {epsilon}")
    M = assemble_mass(grid, 'fine')
    K = assemble_stiffness(grid, 'fine')
    MV = assemble_weighted_mass(grid, 'fine', V)
    P = prolongation(grid)
    ops = FineOperators(grid, float(epsilon), M, K, MV, energy_matrix(K, MV, epsilon), P,
                        constraint_matrix(P, M))
    logger.debug("Операторы мелкой сетки: n_fine=%d, nnz(A)=%d", grid.n_fine, ops.energy.nnz)
    return ops


def _coefficients(v) -> np.ndarray:
    return v.coefficients if isinstance(v, WaveFunction) else np.asarray(v)


def quadratic_form(matrix, v) -> float:
    v = _coefficients(v)
    return float(np.real(np.vdot(v, matrix @ v)))


def l2_norm(v, mass) -> float:
    return np.sqrt(max(quadratic_form(mass, v), 0.0))


def h1_seminorm(v, stiffness) -> float:
    return np.sqrt(max(quadratic_form(stiffness, v), 0.0))


def h1_norm(v, mass, stiffness) -> float:
    return np.sqrt(max(quadratic_form(mass, v) + quadratic_form(stiffness, v), 0.0))


def bilinear_form(v: WaveFunction, w: WaveFunction, epsilon: float, operators: FineOperators) -> complex:
    """a(v, w) with w conjugated."""
    if v.space != 'fine' or w.space != 'fine':
        raise ValueError(f"a(v, w) определена на мелкой сетке, получено {v.space!r} и {w.space!r}")
    wc = np.conj(w.coefficients)
    return complex(0.5 * epsilon ** 2 * (v.coefficients @ (operators.stiffness @ wc))
                   + v.coefficients @ (operators.weighted_mass @ wc))


def energy_norm(v: WaveFunction, epsilon: float, operators: FineOperators) -> float:
    return np.sqrt(max(bilinear_form(v, v, epsilon, operators).real, 0.0))


def clement_interpolate(v: WaveFunction, grid: PeriodicGridPair, mass_fine, P) -> WaveFunction:
    if v.space != 'fine':
        raise ValueError(f"Интерполяция Клемана применяется к функциям мелкой сетки, получено {v.space!r}")
    alpha = (P.T @ (mass_fine @ v.coefficients)) / grid.H
    return WaveFunction(alpha, 'coarse', grid)


def kernel_projector(C: sp.spmatrix):
    """Euclidean projection onto ker C: v -> v - C^T (C C^T)^{-1} C v (real v)."""
    gram = splu((C @ C.T).tocsc())

    def project(v: np.ndarray) -> np.ndarray:
        return v - C.T @ gram.solve(C @ v)
    return project


def kernel_pairing_ratios(grid: PeriodicGridPair, f: np.ndarray, samples: int = 20, seed: int = 0) -> dict:
    """Largest |(f, v)| / (H |f| |v'|) and |(f, v)| / (H^2 |f'| |v'|) over random v in ker C."""
    M = assemble_mass(grid, 'fine')
    K = assemble_stiffness(grid, 'fine')
    C = constraint_matrix(prolongation(grid), M)
    f = np.asarray(f, dtype=float)
    f_l2, f_grad = l2_norm(f, M), h1_seminorm(f, K)

    rng = np.random.default_rng(seed)
    project = kernel_projector(C)
    l2_ratio = h1_ratio = 0.0
    for _ in range(samples):
        v = project(rng.standard_normal(grid.n_fine))
        v /= h1_seminorm(v, K)
        pairing = abs(f @ (M @ v))
        l2_ratio = max(l2_ratio, pairing / (grid.H * f_l2))
        if f_grad > 0:
            h1_ratio = max(h1_ratio, pairing / (grid.H ** 2 * f_grad))
    return {'H': grid.H, 'l2_ratio': l2_ratio, 'h1_ratio': h1_ratio}
