"""Tests for CSR kernels, Laplacian builders, and vector helpers."""

import numpy as np
import pytest

from imexp.sparse_ops import (BC_DIRICHLET, BC_NEUMANN, BC_PERIODIC, GridSpec,
                              SparseMatrix, axpy, build_laplacian_1d_dirichlet,
                              build_laplacian_2d, dot, load_matrix_market,
                              matvec_tally, max_norm, save_matrix_market,
                              scale, shift_identity, spmv)


def _identity(n):
    return SparseMatrix(n, n, np.arange(n + 1), np.arange(n), np.ones(n))


def _dirichlet(n_interior):
    g = GridSpec(dim=1, points_per_axis=n_interior + 2, lower=0.0, upper=1.0,
                 bc=BC_DIRICHLET)
    return g, build_laplacian_1d_dirichlet(g)


class TestGridSpec:
    def test_spacing_node_centered(self):
        g = GridSpec(dim=1, points_per_axis=5, lower=0.0, upper=1.0,
                     bc=BC_DIRICHLET)
        assert g.spacing == 0.25

    def test_spacing_periodic(self):
        g = GridSpec(dim=2, points_per_axis=4, lower=-0.5, upper=0.5,
                     bc=BC_PERIODIC)
        assert g.spacing == 0.25

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            GridSpec(dim=3, points_per_axis=4, lower=0, upper=1,
                     bc=BC_DIRICHLET)
        with pytest.raises(ValueError):
            GridSpec(dim=1, points_per_axis=4, lower=0, upper=1, bc="clamped")
        with pytest.raises(ValueError):
            GridSpec(dim=1, points_per_axis=4, lower=1, upper=0,
                     bc=BC_DIRICHLET)


class TestSparseMatrix:
    def test_rejects_non_canonical_rows(self):
        # duplicate / unsorted columns within a row
        with pytest.raises(ValueError):
            SparseMatrix(2, 2, [0, 2, 2], [1, 0], [1.0, 2.0])

    def test_rejects_inconsistent_pointers(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, 2, [0, 1, 3], [0, 1], [1.0, 2.0])

    def test_round_trips_through_scipy(self):
        rng = np.random.default_rng(3)
        D = rng.standard_normal((6, 4)) * (rng.random((6, 4)) < 0.4)
        A = SparseMatrix.from_scipy(D)
        assert np.array_equal(A.to_dense(), D)


class TestSpmv:
    def test_identity(self):
        x = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(spmv(_identity(3), x), x)

    def test_zero_matrix(self):
        Z = SparseMatrix(2, 2, [0, 0, 0], [], [])
        assert np.array_equal(spmv(Z, np.array([5.0, 7.0])), np.zeros(2))

    def test_dirichlet_stencil_by_hand(self):
        # four interior nodes on [0,1] (spacing 1/5) applied to x(1-x)
        _, A = _dirichlet(4)
        x = np.arange(1, 5) / 5.0
        u = x * (1.0 - x)
        padded = np.concatenate([[0.0], u, [0.0]])
        by_hand = 25.0 * (padded[:-2] - 2.0 * padded[1:-1] + padded[2:])
        assert np.allclose(spmv(A, u), by_hand, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmv(_identity(3), np.ones(4))

    def test_increments_tally(self):
        before = matvec_tally.count
        spmv(_identity(2), np.ones(2))
        assert matvec_tally.count == before + 1

    def test_matches_dense_product_on_random_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = rng.integers(2, 31)
            D = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
            A = SparseMatrix.from_scipy(D)
            x = rng.standard_normal(n)
            y = spmv(A, x)
            ref = D @ x
            assert np.allclose(y, ref, rtol=1e-14, atol=1e-14 * max_norm(ref))


class TestLaplacian1D:
    def test_three_interior_nodes(self):
        _, A = _dirichlet(3)
        expected = 16.0 * np.array([[-2.0, 1.0, 0.0],
                                    [1.0, -2.0, 1.0],
                                    [0.0, 1.0, -2.0]])
        assert np.array_equal(A.to_dense(), expected)

    def test_eigenvalues_match_closed_form(self):
        for n in (5, 12, 20):
            g, A = _dirichlet(n)
            h = g.spacing
            computed = np.sort(np.linalg.eigvalsh(A.to_dense()))
            k = np.arange(1, n + 1)
            expected = np.sort(-(4.0 / h**2) * np.sin(k * np.pi * h / 2.0)**2)
            assert np.allclose(computed, expected, rtol=1e-10)

    def test_exact_symmetry(self):
        _, A = _dirichlet(9)
        D = A.to_dense()
        assert np.array_equal(D, D.T)

    def test_negative_definite_quadratic_form(self):
        rng = np.random.default_rng(5)
        _, A = _dirichlet(50)
        D = A.to_dense()
        for _ in range(100):
            v = rng.standard_normal(50)
            assert v @ D @ v < 0

    def test_too_few_points(self):
        g = GridSpec(dim=1, points_per_axis=2, lower=0, upper=1,
                     bc=BC_DIRICHLET)
        with pytest.raises(ValueError):
            build_laplacian_1d_dirichlet(g)

    def test_rejects_wrong_bc(self):
        g = GridSpec(dim=1, points_per_axis=8, lower=0, upper=1,
                     bc=BC_NEUMANN)
        with pytest.raises(ValueError):
            build_laplacian_1d_dirichlet(g)


def _brute_force_periodic(n, h):
    """Dense 5-point periodic Laplacian assembled by index enumeration."""
    A = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            row = i * n + j
            A[row, row] = -4.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                A[row, ((i + di) % n) * n + (j + dj) % n] += 1.0
    return A / h**2


class TestLaplacian2D:
    def test_periodic_row_sums_vanish(self):
        g = GridSpec(dim=2, points_per_axis=4, lower=0, upper=1,
                     bc=BC_PERIODIC)
        A = build_laplacian_2d(g)
        assert max_norm(A.to_dense().sum(axis=1)) == 0.0

    def test_neumann_annihilates_constants(self):
        g = GridSpec(dim=2, points_per_axis=4, lower=0, upper=1,
                     bc=BC_NEUMANN)
        A = build_laplacian_2d(g)
        assert max_norm(spmv(A, np.ones(16))) == 0.0

    def test_periodic_matches_brute_force_assembly(self):
        n = 8
        g = GridSpec(dim=2, points_per_axis=n, lower=0, upper=1,
                     bc=BC_PERIODIC)
        A = build_laplacian_2d(g)
        assert np.allclose(A.to_dense(), _brute_force_periodic(n, g.spacing),
                           rtol=0, atol=1e-12)

    def test_periodic_cosine_mode_is_eigenvector(self):
        n = 8
        g = GridSpec(dim=2, points_per_axis=n, lower=0, upper=1,
                     bc=BC_PERIODIC)
        A = build_laplacian_2d(g)
        h = g.spacing
        x = h * np.arange(n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        v = (np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)).ravel()
        # discrete symbol of the second difference for wavenumber 1, doubled
        # because the mode oscillates along both axes
        lam = -2.0 * (4.0 / h**2) * np.sin(np.pi * h)**2
        assert np.allclose(spmv(A, v), lam * v, rtol=1e-12, atol=1e-10)

    def test_both_regimes_symmetric_negative_semidefinite(self):
        rng = np.random.default_rng(7)
        for bc in (BC_PERIODIC, BC_NEUMANN):
            g = GridSpec(dim=2, points_per_axis=6, lower=0, upper=1, bc=bc)
            D = build_laplacian_2d(g).to_dense()
            assert np.array_equal(D, D.T)
            # non-dyadic spacing: constants are annihilated to rounding
            assert max_norm(D @ np.ones(36)) <= 1e-12 * np.abs(D).max()
            for _ in range(20):
                v = rng.standard_normal(36)
                assert v @ D @ v <= 1e-10

    def test_rejects_dirichlet(self):
        g = GridSpec(dim=2, points_per_axis=6, lower=0, upper=1,
                     bc=BC_DIRICHLET)
        with pytest.raises(ValueError):
            build_laplacian_2d(g)


class TestShiftIdentity:
    def test_zero_alpha_gives_identity(self):
        _, A = _dirichlet(5)
        S = shift_identity(A, 0.0)
        assert np.array_equal(S.to_dense(), np.eye(5))

    def test_scalar_case(self):
        A = SparseMatrix(1, 1, [0, 1], [0], [-2.0])
        assert shift_identity(A, 1.0).to_dense() == np.array([[3.0]])

    def test_shifted_laplacian_is_spd(self):
        for n in (5, 20):
            _, A = _dirichlet(n)
            for h in (1e-3, 0.1, 10.0):
                S = shift_identity(A, 0.5 * h)
                np.linalg.cholesky(S.to_dense())  # raises if not SPD

    def test_diagonal_present_in_every_row(self):
        _, A = _dirichlet(6)
        S = shift_identity(A, 0.25)
        for i in range(6):
            cols = S.col_idx[S.row_ptr[i]:S.row_ptr[i + 1]]
            assert i in cols

    def test_rejects_non_square(self):
        A = SparseMatrix(1, 2, [0, 1], [1], [1.0])
        with pytest.raises(ValueError):
            shift_identity(A, 1.0)


class TestVectorKernels:
    def test_max_norm_zero(self):
        assert max_norm(np.zeros(3)) == 0.0

    def test_dot(self):
        assert dot(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0

    def test_axpy(self):
        out = axpy(2.0, np.array([1.0, 1.0]), np.array([0.0, 3.0]))
        assert np.array_equal(out, np.array([2.0, 5.0]))

    def test_scale(self):
        assert np.array_equal(scale(3.0, np.array([1.0, -2.0])),
                              np.array([3.0, -6.0]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dot(np.ones(2), np.ones(3))
        with pytest.raises(ValueError):
            axpy(1.0, np.ones(2), np.ones(3))


def test_matrix_market_round_trip(tmp_path):
    _, A = _dirichlet(7)
    path = tmp_path / "lap.mtx"
    save_matrix_market(A, path)
    B = load_matrix_market(path)
    assert np.array_equal(A.to_dense(), B.to_dense())
