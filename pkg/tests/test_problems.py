"""Tests for the three benchmark systems."""

import numpy as np
import pytest

from imexp.integrators import IntegratorConfig, IntegratorKind, integrate
from imexp.problems import (SplitSystem, jv_consistency_check, make_allen_cahn,
                            make_schnakenberg, make_semilinear_parabolic)
from imexp.sparse_ops import max_norm, spmv


class TestSemilinearParabolic:
    def test_exact_solution_at_midpoint(self):
        sys_ = make_semilinear_parabolic(199)  # x = 0.5 is a grid node
        u = sys_.exact(0.0)
        mid = np.argmin(np.abs(np.arange(1, 200) / 200.0 - 0.5))
        assert u[mid] == pytest.approx(0.25, abs=1e-14)

    def test_quadrature_of_initial_profile(self):
        sys_ = make_semilinear_parabolic(100)
        dx = sys_.grid.spacing
        # N(t, 0) isolates the source; subtracting it from N(t, u) leaves
        # the quadrature term
        q = sys_.N(0.0, sys_.u0)[0] - sys_.N(0.0, np.zeros(sys_.dim))[0]
        assert q == pytest.approx(1.0 / 6.0, abs=dx**2)

    def test_discrete_residual_is_second_order_in_space(self):
        t = 0.3
        residuals = []
        for n in (50, 100):
            sys_ = make_semilinear_parabolic(n)
            u = sys_.exact(t)
            res = spmv(sys_.L, u) + sys_.N(t, u) - u  # du/dt = u here
            residuals.append(max_norm(res))
        ratio = residuals[0] / residuals[1]
        assert 3.5 <= ratio <= 4.5

    def test_initial_state_matches_exact(self):
        sys_ = make_semilinear_parabolic(60)
        assert np.array_equal(sys_.u0, sys_.exact(0.0))

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            make_semilinear_parabolic(2)


class TestAllenCahn:
    def test_equilibrium_state_annihilates_nonlinearity(self):
        sys_ = make_allen_cahn(eps=0.02, n=16)
        assert max_norm(sys_.N(0.0, np.ones(sys_.dim))) == 0.0

    def test_jacobian_at_zero_state(self):
        eps = 0.02
        sys_ = make_allen_cahn(eps=eps, n=16)
        v = np.linspace(-1.0, 1.0, sys_.dim)
        assert np.allclose(sys_.jv(np.zeros(sys_.dim), v), v / eps**2,
                           rtol=1e-13)

    def test_initial_condition_at_origin(self):
        eps = 0.02
        n = 64  # even grid on [-0.5, 0.5] places a node exactly at (0, 0)
        sys_ = make_allen_cahn(eps=eps, n=n)
        origin = (n // 2) * n + n // 2
        expected = np.tanh(0.4 / (np.sqrt(2.0) * eps))
        assert sys_.u0[origin] == pytest.approx(expected, abs=1e-15)

    def test_solution_stays_near_unit_range(self):
        sys_ = make_allen_cahn(eps=0.02, n=32)
        cfg = IntegratorConfig(kind=IntegratorKind.HIMEXP2J, h=1e-4,
                               t_end=2e-3)
        u, _ = integrate(sys_, cfg, sys_.u0)
        assert max_norm(u) <= 1.1

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            make_allen_cahn(eps=0.0)
        with pytest.raises(ValueError):
            make_allen_cahn(n=4)


class TestSchnakenberg:
    def test_reaction_vanishes_at_equilibrium(self):
        sys_ = make_schnakenberg(gamma=1000.0, n=8)
        m = 64
        eq = np.concatenate([np.full(m, 1.0), np.full(m, 0.9)])
        assert max_norm(sys_.N(0.0, eq)) <= 1e-10

    def test_jacobian_is_linear_in_direction(self):
        sys_ = make_schnakenberg(gamma=1000.0, n=8)
        rng = np.random.default_rng(0)
        u = rng.uniform(0.2, 1.2, sys_.dim)
        x = rng.standard_normal(sys_.dim)
        y = rng.standard_normal(sys_.dim)
        lhs = sys_.jv(u, 2.0 * x - 3.0 * y)
        rhs = 2.0 * sys_.jv(u, x) - 3.0 * sys_.jv(u, y)
        assert max_norm(lhs - rhs) <= 1e-10 * max(1.0, max_norm(rhs))

    def test_finite_difference_jacobian_consistency(self):
        sys_ = make_schnakenberg(gamma=1000.0, n=8)
        assert jv_consistency_check(sys_, n_states=5)

    def test_unperturbed_equilibrium_stays_spatially_constant(self):
        sys_ = make_schnakenberg(gamma=1000.0, n=8, perturbation=0.0)
        cfg = IntegratorConfig(kind=IntegratorKind.HIMEXP2N, h=1e-4,
                               t_end=1e-3)
        w, _ = integrate(sys_, cfg, sys_.u0)
        m = 64
        for species in (w[:m], w[m:]):
            assert species.max() - species.min() <= 1e-10

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            make_schnakenberg(gamma=0.0)
        with pytest.raises(ValueError):
            make_schnakenberg(n=4)


class TestJacobianConsistency:
    def test_all_three_problems(self):
        for sys_ in (make_semilinear_parabolic(40),
                     make_allen_cahn(eps=0.02, n=16),
                     make_schnakenberg(gamma=1000.0, n=8)):
            assert jv_consistency_check(sys_, n_states=5), sys_.label

    def test_detects_a_wrong_jacobian(self):
        sys_ = make_allen_cahn(eps=0.05, n=8)
        broken = SplitSystem(dim=sys_.dim, L=sys_.L, N=sys_.N,
                             jv=lambda u, v: 1.5 * sys_.jv(u, v),
                             grid=sys_.grid, label="broken", u0=sys_.u0)
        assert not jv_consistency_check(broken, n_states=3)
