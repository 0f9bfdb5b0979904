"""Stationary Galerkin solves, elliptic projection and time integrators.

Crank-Nicolson runs in any Galerkin space (coarse P1 or multiscale) through
one code path; the time-splitting spectral method works on uniform nodal
samples.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy import fft
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import splu

from fem_core import FineOperators, SolverError, WaveFunction, energy_matrix
from msfem_basis import MultiscaleBasis, assemble_ms_operators

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    n_steps: int
    T: float
    epsilon: float
    log_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"Шаг по времени dt должен быть > 0, получено {self.dt}")
        if self.n_steps < 0 or abs(self.n_steps * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError(f"n_steps * dt = {self.n_steps * self.dt!r} не равно T = {self.T!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon должен быть > 0, получено {self.epsilon}")
        if self.log_stride < 1:
            raise ValueError(f"log_stride должен быть >= 1, получено {self.log_stride}")

    @classmethod
    def from_final_time(cls, T: float, dt: float, epsilon: float, log_stride: int = 1):
        return cls(float(dt), int(round(T / dt)), float(T), float(epsilon), int(log_stride))

    def halved(self):
        return EvolutionConfig(self.dt / 2, 2 * self.n_steps, self.T, self.epsilon, 2 * self.log_stride)


@dataclass
class TrajectoryResult:
    final: WaveFunction
    log: pd.DataFrame          # step, time, mass, energy
    wall_time: float
    fine: WaveFunction = None  # final state in fine nodal coordinates, when defined

    def write_log(self, path):
        self.log.to_csv(path, index=False, float_format='%.17g')
        return path


class DirectSolver:
    """One LU factorization (sparse splu or dense LAPACK), many solves."""

    def __init__(self, matrix, context: str = ''):
        self.sparse = sp.issparse(matrix)
        self.is_complex = np.iscomplexobj(matrix.data if self.sparse else matrix)
        try:
            if self.sparse:
                self._lu = splu(sp.csc_matrix(matrix))
            else:
                self._lu = lu_factor(np.asarray(matrix), check_finite=True)
                if np.any(np.diag(self._lu[0]) == 0):
                    raise RuntimeError("нулевой ведущий элемент")
        except (RuntimeError, ValueError) as exc:
            raise SolverError(f"Ошибка факторизации ({context or 'матрица'} "
                              f"{matrix.shape[0]}x{matrix.shape[1]}): {exc}") from exc

    def solve(self, b):
        if not self.sparse:
            return lu_solve(self._lu, b)
        if not self.is_complex and np.iscomplexobj(b):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(np.ascontiguousarray(b.imag))
        return self._lu.solve(b)


@dataclass(frozen=True)
class SpaceOperators:
    kind: str            # 'coarse' | 'multiscale'
    basis: object        # fine x dim matrix: prolongation P or Psi
    A: object
    M: object
    fine: FineOperators

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def restrict(self, fine_vector):
        return self.basis.T @ fine_vector

    def to_fine(self, coefficients) -> WaveFunction:
        coefficients = coefficients.coefficients if isinstance(coefficients, WaveFunction) else coefficients
        return WaveFunction(self.basis @ coefficients, 'fine', self.fine.grid)

    def wave(self, coefficients) -> WaveFunction:
        return WaveFunction(coefficients, self.kind, self.fine.grid)


def coarse_space(operators: FineOperators) -> SpaceOperators:
    P = operators.prolongation
    A = (P.T @ operators.energy @ P).tocsr()
    M = (P.T @ operators.mass @ P).tocsr()
    return SpaceOperators('coarse', P, A, M, operators)


def multiscale_space(basis: MultiscaleBasis, operators: FineOperators) -> SpaceOperators:
    A, M = assemble_ms_operators(basis, operators)
    return SpaceOperators('multiscale', basis.coefficients, A, M, operators)


def _check_epsilon(epsilon, operators):
    if not np.isclose(epsilon, operators.epsilon, rtol=1e-14, atol=0.0):
        raise ValueError(f"epsilon = {epsilon} не совпадает с epsilon операторов {operators.epsilon}")


def _fine_values(v, grid):
    if isinstance(v, WaveFunction):
        if v.space != 'fine':
            raise ValueError(f"Ожидается функция мелкой сетки, получено {v.space!r}")
        return v.coefficients
    if callable(v):
        return np.asarray(v(grid.fine_nodes), dtype=complex)
    return np.asarray(v, dtype=complex)


def stationary_solve(space: SpaceOperators, f, epsilon: float, operators: FineOperators):
    """Galerkin solution of a(u, w) = (f, w); returns (space coefficients, fine prolongation)."""
    _check_epsilon(epsilon, operators)
    rhs = space.restrict(operators.mass @ _fine_values(f, operators.grid))
    u = DirectSolver(space.A, f"стационарная задача, {space.kind}").solve(rhs)
    return space.wave(u), space.to_fine(u)


def fine_reference_solve(f, operators: FineOperators) -> WaveFunction:
    rhs = operators.mass @ _fine_values(f, operators.grid)
    u = DirectSolver(operators.energy, "мелкая сетка").solve(rhs)
    return WaveFunction(u, 'fine', operators.grid)


def elliptic_project(v, space: SpaceOperators, epsilon: float, operators: FineOperators):
    """a-projection: A_space v_hat = B^T A_fine v."""
    _check_epsilon(epsilon, operators)
    A_fine = energy_matrix(operators.stiffness, operators.weighted_mass, epsilon)
    rhs = space.restrict(A_fine @ _fine_values(v, operators.grid))
    v_hat = DirectSolver(space.A, f"эллиптическая проекция, {space.kind}").solve(rhs)
    return space.wave(v_hat), space.to_fine(v_hat)


def _conserved(U, M, A):
    return np.sqrt(max(np.real(np.vdot(U, M @ U)), 0.0)), float(np.real(np.vdot(U, A @ U)))


def cn_evolve(space: SpaceOperators, U0, config: EvolutionConfig, M_space=None, A_space=None,
              reverse: bool = False) -> TrajectoryResult:
    """(i eps M - dt/2 A) U^n = (i eps M + dt/2 A) U^{n-1}; reverse swaps the two matrices."""
    M = space.M if M_space is None else M_space
    A = space.A if A_space is None else A_space
    U = np.array(U0.coefficients if isinstance(U0, WaveFunction) else U0, dtype=complex)
    if U.shape != (M.shape[0],):
        raise ValueError(f"Начальное состояние {U.shape} не согласовано с размерностью {M.shape[0]}")

    started = time.perf_counter()
    half = 0.5 * config.dt
    lhs = 1j * config.epsilon * M - half * A
    rhs = 1j * config.epsilon * M + half * A
    if reverse:
        lhs, rhs = rhs, lhs
    solver = DirectSolver(lhs, f"Кранк-Николсон, {space.kind}, dim={M.shape[0]}")

    rows = [(0, 0.0, *_conserved(U, M, A))]
    for step in range(1, config.n_steps + 1):
        U = solver.solve(rhs @ U)
        if step % config.log_stride == 0 or step == config.n_steps:
            rows.append((step, step * config.dt, *_conserved(U, M, A)))
    log = pd.DataFrame(rows, columns=['step', 'time', 'mass', 'energy'])
    wall = time.perf_counter() - started

    drift = abs(log['mass'].iloc[-1] / log['mass'].iloc[0] - 1.0) if log['mass'].iloc[0] > 0 else 0.0
    logger.debug("КН %s: %d шагов за %.2f с, дрейф массы %.2e", space.kind, config.n_steps, wall, drift)
    return TrajectoryResult(space.wave(U), log, wall)


def _galerkin_cn(space: SpaceOperators, u0, config: EvolutionConfig) -> TrajectoryResult:
    U0, _ = elliptic_project(u0, space, config.epsilon, space.fine)
    result = cn_evolve(space, U0, config)
    result.fine = space.to_fine(result.final)
    return result


def fem_cn_evolve(operators: FineOperators, u0, config: EvolutionConfig) -> TrajectoryResult:
    """Crank-Nicolson in the coarse P1 space, U0 = elliptic projection of u0."""
    return _galerkin_cn(coarse_space(operators), u0, config)


def msfem_cn_evolve(basis: MultiscaleBasis, operators: FineOperators, u0,
                    config: EvolutionConfig) -> TrajectoryResult:
    return _galerkin_cn(multiscale_space(basis, operators), u0, config)


def is_fft_friendly(n: int) -> bool:
    """Even n whose only prime factors are 2, 3 and 5."""
    if n < 2 or n % 2:
        return False
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


class SplitStepPropagator:
    """Strang step: half potential phase, exact kinetic step in Fourier space, half potential phase."""

    def __init__(self, V: np.ndarray, epsilon: float, dt: float):
        n = len(V)
        if not is_fft_friendly(n):
            raise ValueError(f"Размер сетки {n} не подходит для БПФ (нужен чётный размер "
                             f"с простыми множителями 2, 3, 5)")
        self.V = np.asarray(V, dtype=float)
        self.epsilon = epsilon
        self.dt = dt
        self.k = fft.fftfreq(n, d=1.0 / n)
        self._exp_potential = np.exp(-0.5j * dt * self.V / epsilon)
        self._exp_kinetic = np.exp(-0.5j * epsilon * dt * self.k ** 2)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi_k = fft.fft(psi * self._exp_potential) * self._exp_kinetic
        return fft.ifft(psi_k) * self._exp_potential

    def mass(self, psi) -> float:
        h = 2.0 * np.pi / len(psi)
        return float(np.sqrt(h * np.sum(np.abs(psi) ** 2)))

    def energy(self, psi) -> float:
        n = len(psi)
        psi_k = fft.fft(psi)
        kinetic = 0.5 * self.epsilon ** 2 * (2.0 * np.pi / n ** 2) * np.sum(self.k ** 2 * np.abs(psi_k) ** 2)
        return float(kinetic + (2.0 * np.pi / n) * np.sum(self.V * np.abs(psi) ** 2))


def tssp_evolve(u0, V_nodes, config: EvolutionConfig) -> TrajectoryResult:
    psi = np.array(u0, dtype=complex)
    if len(V_nodes) != len(psi):
        raise ValueError(f"Число отсчётов потенциала {len(V_nodes)} не совпадает с сеткой {len(psi)}")
    step_once = SplitStepPropagator(V_nodes, config.epsilon, config.dt)

    started = time.perf_counter()
    rows = [(0, 0.0, step_once.mass(psi), step_once.energy(psi))]
    for step in range(1, config.n_steps + 1):
        psi = step_once(psi)
        if step % config.log_stride == 0 or step == config.n_steps:
            rows.append((step, step * config.dt, step_once.mass(psi), step_once.energy(psi)))
    log = pd.DataFrame(rows, columns=['step', 'time', 'mass', 'energy'])
    wall = time.perf_counter() - started
    logger.debug("TSSP: n=%d, %d шагов за %.2f с", len(psi), config.n_steps, wall)
    return TrajectoryResult(WaveFunction(psi, 'fourier'), log, wall)


def spectral_resample(u, n_target: int) -> np.ndarray:
    """Trigonometric interpolant of uniform samples u on n_target points.

    Only modes with |k| < min(n, n_target)/2 are kept; for even sizes the Nyquist mode is dropped,
    so a TSSP state with energy at |k| = n/2 is not reproduced exactly on the comparison grid.
    """
    u = np.asarray(u, dtype=complex)
    n = len(u)
    if n_target == n:
        return u.copy()
    coeffs = fft.fft(u)
    K = (min(n, n_target) - 1) // 2
    out = np.zeros(n_target, dtype=complex)
    out[:K + 1] = coeffs[:K + 1]
    if K > 0:
        out[-K:] = coeffs[-K:]
    return fft.ifft(out) * (n_target / n)
