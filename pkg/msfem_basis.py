"""Multiscale basis functions by constrained energy minimization.

psi_j minimizes a(psi, psi) over the fine P1 space subject to
(psi, phi_k) = delta_jk for all coarse hats phi_k.  The stationarity
conditions form the saddle-point system

    [A  C^T] [psi   ]   [0  ]
    [C  0  ] [lambda] = [e_j]

with A the fine energy matrix and C = P^T M_fine.  The global basis uses one
factorization for all right-hand sides; localized functions solve the same
problem on the oversampling patch N^m(S_j) with zero values outside.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from fem_core import FineOperators, SolverError, assemble_fine_operators
from mesh import PeriodicGridPair, patch

logger = logging.getLogger(__name__)


@dataclass
class MultiscaleBasis:
    coefficients: object       # (n_fine, N) ndarray, or csc_matrix for localized/truncated
    kind: str                  # 'global' | 'localized'
    grid: PeriodicGridPair
    epsilon: float
    m: int = None
    patches: tuple = ()

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.coefficients)

    def column(self, j: int) -> np.ndarray:
        if self.is_sparse:
            return self.coefficients[:, j].toarray().ravel()
        return np.asarray(self.coefficients[:, j])

    def dense(self) -> np.ndarray:
        return self.coefficients.toarray() if self.is_sparse else np.asarray(self.coefficients)


@dataclass
class DecayProfile:
    node: int
    ratios: np.ndarray     # ||grad psi_j|| outside N^m(S_j) / ||grad psi_j||, m = 0..m_max
    beta: float = None
    gradient_norm: float = 0.0
    m_saturation: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'m': np.arange(len(self.ratios)), 'ratio': self.ratios})


def oversampling_layers(n_coarse: int, c: int) -> int:
    """m = c * ceil(log2(2*pi/H))."""
    return int(c) * math.ceil(math.log2(n_coarse))


def _kkt_matrix(A, C) -> sp.csc_matrix:
    return sp.bmat([[A, C.T], [C, None]], format='csc')


def _factorize(kkt, context: str):
    try:
        return splu(kkt)
    except RuntimeError as exc:
        raise SolverError(f"Вырожденная седловая система ({context}): {exc}") from exc


def build_global_basis(grid: PeriodicGridPair, epsilon: float, V, operators: FineOperators = None,
                       chunk_size: int = 256, truncate: float = None) -> MultiscaleBasis:
    """Global basis Psi_H; with `truncate`, entries below truncate*max|psi_j| are dropped and Psi is sparse."""
    if grid.H > epsilon:
        logger.warning("H = %.4g > eps = %.4g: шаг грубой сетки не разрешает масштаб eps", grid.H, epsilon)
    ops = operators or assemble_fine_operators(grid, V, epsilon)
    n, N = grid.n_fine, grid.n_coarse
    lu = _factorize(_kkt_matrix(ops.energy, ops.constraint), f"глобальный базис, N={N}, r={grid.refine_factor}")
    logger.debug("KKT факторизован: размер %d, nnz(L+U)=%d", n + N, lu.L.nnz + lu.U.nnz)

    dense = None if truncate else np.empty((n, N))
    pieces = []
    for start in range(0, N, chunk_size):
        stop = min(start + chunk_size, N)
        k = np.arange(stop - start)
        rhs = np.zeros((n + N, stop - start))
        rhs[n + start + k, k] = 1.0
        psi = lu.solve(rhs)[:n]
        if not np.all(np.isfinite(psi)):
            raise SolverError(f"Нечисловое решение седловой системы для узлов {start}..{stop - 1}")
        if truncate:
            keep = np.abs(psi) >= truncate * np.abs(psi).max(axis=0, keepdims=True)
            rows, cols = np.nonzero(keep)
            pieces.append((rows, cols + start, psi[rows, cols]))
        else:
            dense[:, start:stop] = psi

    if truncate:
        rows, cols, vals = (np.concatenate(p) for p in zip(*pieces))
        coefficients = sp.csc_matrix((vals, (rows, cols)), shape=(n, N))
        logger.info("Глобальный базис усечён (tol=%.1e): заполнение %.2f%%",
                    truncate, 100.0 * coefficients.nnz / (n * N))
    else:
        coefficients = dense
    return MultiscaleBasis(coefficients, 'global', grid, float(epsilon))


def build_localized_basis(grid: PeriodicGridPair, epsilon: float, V, m: int,
                          operators: FineOperators = None, threads: int = 1) -> MultiscaleBasis:
    if m < 1:
        raise ValueError(f"Число слоёв m должно быть >= 1, получено {m}")
    N, n = grid.n_coarse, grid.n_fine
    ops = operators or assemble_fine_operators(grid, V, epsilon)
    patches = tuple(patch(grid, j, m) for j in range(N))

    if patches[0].saturated:
        logger.info("m=%d насыщает область (N=%d): локализованный базис совпадает с глобальным", m, N)
        glob = build_global_basis(grid, epsilon, V, operators=ops)
        return MultiscaleBasis(sp.csc_matrix(glob.coefficients), 'localized', grid, float(epsilon), m, patches)
    if grid.refine_factor < 2:
        raise ValueError("Локализованный базис требует refine_factor >= 2: при r = 1 задача на "
                         "патче переопределена (ограничений больше, чем степеней свободы)")
    if grid.H > epsilon:
        logger.warning("H = %.4g > eps = %.4g: шаг грубой сетки не разрешает масштаб eps", grid.H, epsilon)

    A = ops.energy.tocsr()
    C = ops.constraint.tocsr()

    def solve_patch(j):
        pt = patches[j]
        free = np.asarray(pt.interior_fine_nodes)
        active = np.asarray(pt.constraint_nodes)
        A_loc = A[free][:, free]
        C_loc = C[active][:, free]
        rhs = np.zeros(len(free) + len(active))
        rhs[len(free) + m + 1] = 1.0  # node j sits m+1 places after the first active node
        lu = _factorize(_kkt_matrix(A_loc, C_loc), f"узел j={j}, m={m}")
        return free, lu.solve(rhs)[:len(free)]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        solved = list(pool.map(solve_patch, range(N)))

    rows = np.concatenate([free for free, _ in solved])
    cols = np.concatenate([np.full(len(free), j) for j, (free, _) in enumerate(solved)])
    vals = np.concatenate([psi for _, psi in solved])
    coefficients = sp.csc_matrix((vals, (rows, cols)), shape=(n, N))
    logger.debug("Локализованный базис: N=%d, m=%d, nnz=%d", N, m, coefficients.nnz)
    return MultiscaleBasis(coefficients, 'localized', grid, float(epsilon), m, patches)


def assemble_ms_operators(basis: MultiscaleBasis, operators: FineOperators):
    """(A_ms, M_ms) = (Psi^T A Psi, Psi^T M Psi)."""
    if basis.grid != operators.grid or basis.coefficients.shape[0] != operators.grid.n_fine:
        raise ValueError(f"Базис {basis.coefficients.shape} и операторы мелкой сетки "
                         f"(n_fine={operators.grid.n_fine}) построены на разных сетках")
    Psi = basis.coefficients
    if basis.is_sparse:
        A_ms = (Psi.T @ operators.energy @ Psi).tocsr()
        M_ms = (Psi.T @ operators.mass @ Psi).tocsr()
        return ((A_ms + A_ms.T) * 0.5).tocsr(), ((M_ms + M_ms.T) * 0.5).tocsr()
    A_ms = Psi.T @ (operators.energy @ Psi)
    M_ms = Psi.T @ (operators.mass @ Psi)
    return 0.5 * (A_ms + A_ms.T), 0.5 * (M_ms + M_ms.T)


def measure_decay(basis: MultiscaleBasis, j: int, m_max: int = None) -> DecayProfile:
    if basis.kind != 'global':
        raise ValueError("Профиль убывания измеряется на глобальном базисе")
    grid = basis.grid
    N, n = grid.n_coarse, grid.n_fine
    psi = basis.column(j)
    fine_energy = (np.roll(psi, -1) - psi) ** 2 / grid.h
    coarse_energy = fine_energy.reshape(N, grid.refine_factor).sum(axis=1)

    offset = (np.arange(N) - j) % N
    distance = np.minimum(offset, N - 1 - offset)
    by_distance = np.bincount(distance, weights=coarse_energy)
    total = by_distance.sum()
    # outside[m] = energy on elements farther than m layers
    outside = np.concatenate([np.cumsum(by_distance[::-1])[::-1][1:], [0.0]])

    m_saturation = max(math.ceil((N - 2) / 2), 0)
    if m_max is None:
        m_max = m_saturation
    ratios = np.zeros(m_max + 1)
    upto = min(m_max, len(outside) - 1)
    ratios[:upto + 1] = np.sqrt(np.clip(outside[:upto + 1] / total, 0.0, 1.0))

    ms = np.arange(1, min(m_max, m_saturation - 1) + 1)
    usable = ms[ratios[ms] > 0]
    beta = None
    if len(usable) >= 3:
        slope = np.polyfit(usable, np.log(ratios[usable]), 1)[0]
        beta = float(np.exp(slope))
    else:
        logger.info("Узел %d: меньше 3 точек до насыщения, beta не оценивается", j)
    return DecayProfile(int(j), ratios, beta, float(np.sqrt(total)), m_saturation)


def localization_gap(global_basis: MultiscaleBasis, localized_basis: MultiscaleBasis,
                     stiffness) -> float:
    """max_j ||grad(psi_j - psi_j^loc)||."""
    diff = global_basis.dense() - localized_basis.dense()
    return float(np.sqrt(np.max(np.sum(diff * (stiffness @ diff), axis=0))))


def export_basis(basis: MultiscaleBasis, path, fmt: str = 'csv') -> Path:
    """Dense CSV (x, psi_0..psi_{N-1}) or sparse triplet text 'row col value'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'csv':
        df = pd.DataFrame(basis.dense(), columns=[f"psi_{j}" for j in range(basis.grid.n_coarse)])
        df.insert(0, 'x', basis.grid.fine_nodes)
        df.to_csv(path, index=False, float_format='%.17g')
    elif fmt == 'triplet':
        coo = sp.coo_matrix(basis.coefficients)
        df = pd.DataFrame({'row': coo.row, 'col': coo.col, 'value': coo.data})
        df.sort_values(['col', 'row']).to_csv(path, sep=' ', header=False, index=False, float_format='%.17g')
    else:
        raise ValueError(f"Неизвестный формат экспорта {fmt!r} (ожидается 'csv' или 'triplet')")
    logger.info("Базис (%s, N=%d) сохранён: %s", basis.kind, basis.grid.n_coarse, path)
    return path
