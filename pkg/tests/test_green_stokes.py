import math

import numpy as np
import pytest

from nslab.green_stokes import (BoundReport, ContourParams, ResolventPoint,
                                contour_residual, green_contour_oracle, green_function,
                                green_function_dz, heat_kernel_neumann, residual_kernel,
                                residual_kernel_dz, residual_kernel_quadrature,
                                resolvent_kernel, verify_pointwise_bounds)


class TestResolvent:
    def test_mu_branch(self):
        pt = ResolventPoint(2.0 + 1.0j, 3, 1e-2)
        assert pt.mu.real > 0
        assert abs(pt.mu**2 - (pt.lam + 9 * 1e-2) / 1e-2) < 1e-10 * abs(pt.mu) ** 2

    def test_pole_and_cut_rejected(self):
        with pytest.raises(ValueError):
            ResolventPoint(0.0, 1, 1e-2)
        with pytest.raises(ValueError):
            ResolventPoint(-1.0, 1, 1e-2)  # on the branch cut of alpha=1, nu=1e-2

    def test_jump_conditions(self):
        # [G] = 0 and nu [dG/dz] = 1 across z = y (finite differences)
        lam, alpha, nu, y = 2.0 + 1.5j, 3, 1e-2, 0.7
        h, eps = 1e-7, 1e-4

        def dz(z):
            return (resolvent_kernel(lam, alpha, nu, y, z + h)
                    - resolvent_kernel(lam, alpha, nu, y, z - h)) / (2 * h)

        jump_d = nu * (dz(y - eps) - dz(y + eps))
        assert abs(jump_d - 1.0) < 1e-6
        jump_v = resolvent_kernel(lam, alpha, nu, y, y + eps) \
            - resolvent_kernel(lam, alpha, nu, y, y - eps)
        assert abs(jump_v) < 1e-2 * abs(resolvent_kernel(lam, alpha, nu, y, y + eps))

    def test_alpha0_is_pure_neumann_heat_resolvent(self):
        lam, nu, y, z = 1.0 + 0.5j, 1e-2, 0.5, 0.8
        got = resolvent_kernel(lam, 0, nu, y, z)
        mu = np.sqrt(lam / nu)
        want = (np.exp(-mu * abs(y - z)) + np.exp(-mu * (y + z))) / (2 * nu * mu)
        assert abs(got - want) < 1e-14 * abs(want)

    def test_boundary_condition(self):
        # nu (d/dz + |alpha|) G|_{z=0} -> 0 under FD refinement
        lam, alpha, nu, y = 3.0 + 0.7j, 4, 1e-3, 0.4
        vals = []
        for h in (1e-4, 5e-5):
            d = (resolvent_kernel(lam, alpha, nu, y, h)
                 - resolvent_kernel(lam, alpha, nu, y, 0.0)) / h
            vals.append(abs(nu * (d + alpha * resolvent_kernel(lam, alpha, nu, y, 0.0))))
        assert vals[-1] < 1e-8
        assert vals[1] < vals[0]


class TestHeatKernel:
    def test_wall_value(self):
        nu, a, t = 1e-2, 2, 0.3
        got = heat_kernel_neumann(nu, a, t, 0.0, 0.0)
        want = 2.0 / math.sqrt(4 * math.pi * nu * t) * math.exp(-(a**2) * nu * t)
        assert abs(got - want) < 1e-14 * want

    def test_mass_identity(self):
        # reflection makes the half-line mass exactly e^{-alpha^2 nu t}
        from scipy.special import roots_legendre
        nu, a, t = 1e-2, 3, 0.5
        xg, wg = roots_legendre(2000)
        y = 15.0 * (xg + 1.0)
        w = 15.0 * wg
        for z in (0.0, 0.2, 2.0):
            mass = float(heat_kernel_neumann(nu, a, t, y, z) @ w)
            assert abs(mass - math.exp(-(a**2) * nu * t)) < 1e-10

    def test_delta_initial_data(self):
        # alpha=0, t -> 0+: int H f dy -> f(z)
        from scipy.special import roots_legendre
        nu, t, z = 1e-2, 1e-6, 0.8
        xg, wg = roots_legendre(4000)
        y = 0.5 * 2.0 * (xg + 1.0)
        w = wg
        f = np.exp(-y) * (1 + y)
        got = float((heat_kernel_neumann(nu, 0, t, y, z) * f) @ w)
        want = math.exp(-z) * (1 + z)
        assert abs(got - want) < 1e-3

    def test_symmetry_and_t_guard(self):
        assert heat_kernel_neumann(1e-2, 1, 0.5, 0.3, 0.9) == heat_kernel_neumann(1e-2, 1, 0.5, 0.9, 0.3)
        with pytest.raises(ValueError):
            heat_kernel_neumann(1e-2, 1, 0.0, 0.3, 0.9)


class TestResidualKernel:
    def test_alpha0_vanishes(self):
        assert residual_kernel(1e-2, 0, 0.5, 0.3, 0.4) == 0.0

    def test_quadrature_oracle(self):
        got = residual_kernel(0.01, 1, 1.0, 0.5, 0.5)
        ref = residual_kernel_quadrature(0.01, 1, 1.0, 0.5, 0.5)
        assert abs(got - ref) < 1e-8 * max(abs(ref), 1e-4)

    def test_contour_oracle_spec_point(self):
        got = residual_kernel(0.01, 1, 1.0, 0.5, 0.5)
        ref, err = contour_residual(0.01, 1, 1.0, 0.5, 0.5)
        assert abs(got - ref) < 1e-6 * max(abs(ref), 1e-4)

    def test_derivative_against_fd(self):
        nu, a, t, y = 1e-3, 4, 0.2, 0.3
        h = 1e-6
        for z in (0.0, 0.1, 1.0):
            fd = (residual_kernel(nu, a, t, y, z + h) - residual_kernel(nu, a, t, y, max(z - h, 0.0))) \
                / (2 * h if z > 0 else h)
            got = residual_kernel_dz(nu, a, t, y, z if z > 0 else h / 2)
            assert abs(fd - got) < 1e-5 * max(abs(got), 1e-8)

    def test_overflow_guard_large_arguments(self):
        # |alpha| sqrt(tau) large and zeta large: scaled-erfc path must stay finite
        val = residual_kernel(1.0, 50, 1.0, 30.0, 30.0)
        assert np.isfinite(val) and val >= 0.0
        val2 = residual_kernel(1e-4, 16, 1e-3, 0.0, 0.0)
        assert np.isfinite(val2)


class TestGreenFunction:
    def test_symmetry(self):
        nu, a, t = 1e-3, 5, 0.3
        for y, z in ((0.1, 0.7), (0.0, 0.4), (1.3, 2.0)):
            d = abs(green_function(nu, a, t, y, z) - green_function(nu, a, t, z, y))
            assert d <= 1e-12 * max(abs(green_function(nu, a, t, y, z)), 1.0)

    def test_alpha0_reduces_to_heat(self):
        nu, t, y, z = 1e-2, 0.4, 0.3, 0.8
        assert green_function(nu, 0, t, y, z) == heat_kernel_neumann(nu, 0, t, y, z)

    def test_stationary_mode_reproduction(self, grid384):
        # quadrature identity: int G_a(t,y;z) a e^{-a y} dy = a e^{-a z}
        g = grid384
        for a in (1, 2, 4):
            data = a * np.exp(-a * g.nodes)
            out = [g.integrate(green_function(1e-2, a, 1.0, g.nodes, zj) * data)
                   for zj in g.nodes[::48]]
            want = a * np.exp(-a * g.nodes[::48])
            assert np.abs(np.asarray(out) - want).max() < 2e-6 * a

    def test_boundary_condition_fd_convergence(self):
        nu, a, t, y = 1e-3, 6, 0.2, 0.5
        errs = []
        for h in (1e-3, 5e-4, 2.5e-4):
            d = (green_function(nu, a, t, y, h) - green_function(nu, a, t, y, 0.0)) / h
            errs.append(abs(nu * (d + a * green_function(nu, a, t, y, 0.0))))
        orders = np.log2(np.asarray(errs[:-1]) / np.asarray(errs[1:]))
        assert min(orders) >= 0.9  # one-sided first-order FD
        # analytic derivative satisfies it exactly
        bc = nu * (green_function_dz(nu, a, t, y, 0.0) + a * green_function(nu, a, t, y, 0.0))
        assert abs(bc) < 1e-12

    def test_heat_equation_residual(self):
        # (d/dt - nu Delta_a) G -> 0 under FD step refinement
        nu, a, t, y, z = 1e-2, 3, 0.4, 0.6, 0.9
        res = []
        for h in (1e-3, 5e-4):
            dt = (green_function(nu, a, t + h, y, z) - green_function(nu, a, t - h, y, z)) / (2 * h)
            dzz = (green_function(nu, a, t, y, z + h) - 2 * green_function(nu, a, t, y, z)
                   + green_function(nu, a, t, y, z - h)) / h**2
            res.append(abs(dt - nu * (dzz - a**2 * green_function(nu, a, t, y, z))))
        assert res[-1] < 1e-4
        assert res[1] < res[0]


class TestContourOracle:
    def test_triple_agreement_random_sample(self):
        rng = np.random.default_rng(11)
        regimes = {"low": 0, "high": 0}
        for _ in range(100):
            nu = float(rng.choice([1e-2, 1e-3, 1e-4]))
            alpha = int(rng.integers(1, 17))
            t = float(np.exp(rng.uniform(math.log(1e-3), 0.0)))
            zeta = float(rng.uniform(0, 12) * math.sqrt(nu * t) + rng.uniform(0, 0.3))
            y = float(rng.uniform(0, zeta))
            z = zeta - y
            regimes["low" if alpha**2 * nu <= 1 else "high"] += 1
            cf = residual_kernel(nu, alpha, t, y, z)
            qd = residual_kernel_quadrature(nu, alpha, t, y, z)
            ct, _ = contour_residual(nu, alpha, t, y, z)
            scale = max(abs(cf), 1e-10 / 1e-6)
            assert abs(cf - qd) / scale < 1e-6
            assert abs(cf - ct) / scale < 1e-6
        assert regimes["low"] > 0 and regimes["high"] > 0

    def test_large_time_residue(self):
        # alpha^2 nu >= 1, a_s < alpha: integral decays, residue survives
        nu, a, t = 1e-2, 16, 50.0
        y = z = 0.05
        got, _ = contour_residual(nu, a, t, y, z)
        assert abs(got - 2 * a * math.exp(-a * (y + z))) < 1e-8

    def test_alpha0_r_part_zero(self):
        got, err = contour_residual(1e-2, 0, 0.5, 0.3, 0.4)
        assert got == 0.0 and err == 0.0

    def test_green_contour_oracle_total(self):
        nu, a, t, y, z = 1e-3, 2, 0.5, 0.4, 0.7
        got = green_contour_oracle(nu, a, t, y, z)
        want = green_function(nu, a, t, y, z)
        assert abs(got - want) < 1e-9 * max(abs(want), 1.0)

    def test_tail_criterion_enforced(self):
        params = ContourParams(b_max=1.0, n_quad=64)
        with pytest.raises(ValueError):
            contour_residual(1e-2, 2, 1.0, 0.1, 0.1, params)

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            ContourParams(m_offset=-1.0)
        with pytest.raises(ValueError):
            ContourParams(n_quad=2)


class TestPointwiseBounds:
    def test_fit_exists_and_is_stable(self):
        report = verify_pointwise_bounds(nu_values=(1e-2, 1e-3), alpha_max=8, n_t=4)
        assert isinstance(report, BoundReport)
        assert report.fitted_theta0 > 0
        assert math.isfinite(report.fitted_c)
        dense = verify_pointwise_bounds(nu_values=(1e-2, 1e-3), alpha_max=8, n_t=4, density=2)
        assert abs(dense.fitted_c - report.fitted_c) <= 0.2 * report.fitted_c

    def test_zero_points_have_zero_ratio(self):
        # R vanishes identically at alpha = 0: envelope ratio is 0 by definition
        from nslab.green_stokes import _bound_envelope, residual_kernel
        vals = residual_kernel(1e-2, 0, 0.5, np.linspace(0, 3, 10), 0.0)
        env = _bound_envelope(0.1, 1 + 10.0, np.linspace(0, 3, 10), 1e-2, 0, 0.5, 0)
        assert np.all(vals / env == 0.0)

    def test_report_serializes(self):
        report = verify_pointwise_bounds(nu_values=(1e-2,), alpha_max=4, n_t=3)
        d = report.to_dict()
        assert set(d) >= {"fitted_theta0", "fitted_c", "max_ratio", "mu_f_range",
                          "sample_ranges", "n_samples"}
