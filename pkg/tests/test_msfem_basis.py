import numpy as np
import pandas as pd
import pytest

from fem_core import assemble_fine_operators, assemble_mass, kernel_projector
from mesh import build_grid_pair
from msfem_basis import (assemble_ms_operators, build_global_basis, build_localized_basis, export_basis,
                         localization_gap, measure_decay, oversampling_layers)
from potentials import smooth_potential


def test_refine_one_basis_is_mass_inverse():
    grid = build_grid_pair(8, 1)
    V = smooth_potential(0.1, grid)
    basis = build_global_basis(grid, 0.125, V)
    M = assemble_mass(grid, 'coarse').toarray()
    np.testing.assert_allclose(basis.coefficients, np.linalg.inv(M), rtol=0, atol=1e-10)


def test_refine_one_ms_operators():
    grid = build_grid_pair(8, 1)
    V = smooth_potential(0.1, grid)
    ops = assemble_fine_operators(grid, V, 0.125)
    A_ms, M_ms = assemble_ms_operators(build_global_basis(grid, 0.125, V, operators=ops), ops)
    Minv = np.linalg.inv(ops.mass.toarray())
    np.testing.assert_allclose(M_ms, Minv, rtol=1e-10)
    expected = Minv @ ops.energy.toarray() @ Minv
    np.testing.assert_allclose(A_ms, expected, rtol=0, atol=1e-10 * np.abs(expected).max())


def test_global_basis_constraints(smooth_case):
    grid, V, ops = smooth_case
    basis = build_global_basis(grid, ops.epsilon, V, operators=ops)
    assert not np.iscomplexobj(basis.coefficients)
    residual = ops.constraint @ basis.coefficients - np.eye(grid.n_coarse)
    assert np.abs(residual).max() <= 1e-10


def test_global_basis_a_orthogonal_to_kernel(smooth_case):
    grid, V, ops = smooth_case
    Psi = build_global_basis(grid, ops.epsilon, V, operators=ops).coefficients
    project = kernel_projector(ops.constraint)
    rng = np.random.default_rng(0)
    A = ops.energy
    psi_norms = np.sqrt(np.einsum('ij,ij->j', Psi, A @ Psi))
    for _ in range(20):
        w = project(rng.standard_normal(grid.n_fine))
        w_norm = np.sqrt(w @ (A @ w))
        pairing = np.abs(Psi.T @ (A @ w))
        assert np.all(pairing <= 1e-9 * psi_norms * w_norm)


def test_decomposition(smooth_case):
    grid, V, ops = smooth_case
    Psi = build_global_basis(grid, ops.epsilon, V, operators=ops).coefficients
    v = np.random.default_rng(3).standard_normal(grid.n_fine)
    v_star = Psi @ (ops.constraint @ v)
    np.testing.assert_allclose(ops.constraint @ (v - v_star), 0.0, atol=1e-10)


def test_chunked_and_truncated_solves_agree(smooth_case):
    grid, V, ops = smooth_case
    dense = build_global_basis(grid, ops.epsilon, V, operators=ops)
    chunked = build_global_basis(grid, ops.epsilon, V, operators=ops, chunk_size=3)
    np.testing.assert_allclose(chunked.coefficients, dense.coefficients, rtol=0, atol=1e-13)
    truncated = build_global_basis(grid, ops.epsilon, V, operators=ops, truncate=1e-8)
    assert truncated.is_sparse
    scale = np.abs(dense.coefficients).max(axis=0)
    diff = np.abs(truncated.dense() - dense.coefficients).max(axis=0)
    assert np.all(diff <= 1e-8 * scale)


def test_translation_equivariance():
    # cos(16x) has period H on grid(16, .)
    grid = build_grid_pair(16, 8)
    V = smooth_potential(1 / 16, grid)
    Psi = build_global_basis(grid, 0.125, V).coefficients
    for j in range(grid.n_coarse - 1):
        np.testing.assert_allclose(np.roll(Psi[:, j], grid.refine_factor), Psi[:, j + 1], rtol=0, atol=1e-9)


def test_localized_support_and_constraints(smooth_case):
    grid, V, ops = smooth_case
    m = 2
    basis = build_localized_basis(grid, ops.epsilon, V, m, operators=ops, threads=2)
    assert basis.is_sparse and basis.kind == 'localized' and basis.m == m
    dense = basis.dense()
    for j, pt in enumerate(basis.patches):
        outside = np.setdiff1d(np.arange(grid.n_fine), pt.interior_fine_nodes)
        assert np.all(dense[outside, j] == 0.0)
        active = np.asarray(pt.constraint_nodes)
        moments = (ops.constraint @ dense[:, j])[active]
        expected = np.zeros(len(active))
        expected[m + 1] = 1.0
        np.testing.assert_allclose(moments, expected, rtol=0, atol=1e-10)


def test_localized_saturates_to_global():
    grid = build_grid_pair(8, 4)
    V = smooth_potential(0.1, grid)
    ops = assemble_fine_operators(grid, V, 0.25)
    glob = build_global_basis(grid, 0.25, V, operators=ops)
    loc = build_localized_basis(grid, 0.25, V, 3, operators=ops)
    assert all(pt.saturated for pt in loc.patches)
    np.testing.assert_allclose(loc.dense(), glob.coefficients, rtol=0, atol=1e-10)
    assert localization_gap(glob, loc, ops.stiffness) <= 1e-8


def test_localized_rejects_bad_input():
    grid = build_grid_pair(16, 1)
    V = smooth_potential(0.1, grid)
    with pytest.raises(ValueError):
        build_localized_basis(grid, 0.125, V, 2)
    with pytest.raises(ValueError):
        build_localized_basis(build_grid_pair(16, 4), 0.125, smooth_potential(0.1, build_grid_pair(16, 4)), 0)


def test_ms_operators_symmetric_positive(smooth_case):
    grid, V, ops = smooth_case
    for basis in (build_global_basis(grid, ops.epsilon, V, operators=ops),
                  build_localized_basis(grid, ops.epsilon, V, 2, operators=ops)):
        A_ms, M_ms = assemble_ms_operators(basis, ops)
        A_ms = A_ms.toarray() if hasattr(A_ms, 'toarray') else A_ms
        M_ms = M_ms.toarray() if hasattr(M_ms, 'toarray') else M_ms
        np.testing.assert_array_equal(A_ms, A_ms.T)
        assert np.linalg.eigvalsh(M_ms).min() > 0


def test_ms_operators_grid_mismatch(smooth_case):
    grid, V, ops = smooth_case
    other = build_grid_pair(8, 4)
    basis = build_global_basis(other, 0.125, smooth_potential(0.1, other))
    with pytest.raises(ValueError):
        assemble_ms_operators(basis, ops)


def test_decay_profile(smooth_case):
    grid, V, ops = smooth_case
    basis = build_global_basis(grid, ops.epsilon, V, operators=ops)
    profile = measure_decay(basis, 5)
    ratios = profile.ratios
    assert profile.m_saturation == 7
    assert ratios[0] <= 1.0 and ratios[-1] == 0.0
    assert np.all(np.diff(ratios) <= 1e-15)
    assert profile.gradient_norm > 0
    assert list(profile.to_frame().columns) == ['m', 'ratio']
    with pytest.raises(ValueError):
        measure_decay(build_localized_basis(grid, ops.epsilon, V, 2, operators=ops), 0)


def test_localization_gap_decreases():
    grid = build_grid_pair(32, 8)
    V = smooth_potential(0.1, grid)
    ops = assemble_fine_operators(grid, V, 0.25)
    glob = build_global_basis(grid, 0.25, V, operators=ops)
    gaps = [localization_gap(glob, build_localized_basis(grid, 0.25, V, m, operators=ops), ops.stiffness)
            for m in (1, 3, 5)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_oversampling_layers():
    assert oversampling_layers(128, 3) == 21
    assert oversampling_layers(192, 2) == 16
    assert oversampling_layers(64, 3) == 18


def test_export_basis(tmp_path):
    grid = build_grid_pair(8, 2)
    V = smooth_potential(0.1, grid)
    loc = build_localized_basis(grid, 0.25, V, 1)
    dense_path = export_basis(loc, tmp_path / "basis.csv")
    df = pd.read_csv(dense_path)
    assert list(df.columns) == ['x'] + [f"psi_{j}" for j in range(8)]
    np.testing.assert_allclose(df.drop(columns='x').to_numpy(), loc.dense(), rtol=1e-15)

    triplets = pd.read_csv(export_basis(loc, tmp_path / "basis.txt", 'triplet'), sep=' ', header=None,
                           names=['row', 'col', 'value'])
    assert len(triplets) == loc.coefficients.nnz
    assert triplets['col'].is_monotonic_increasing
    with pytest.raises(ValueError):
        export_basis(loc, tmp_path / "basis.bin", 'binary')
