import math

import numpy as np
import pytest

from nslab.biot_savart import (boundary_source_trace, dirichlet_to_neumann,
                               solve_poisson_mode, velocity_from_vorticity)
from nslab.fieldkit import SpectralField, build_graded_grid, d2dz, ddz

from conftest import observed_orders, refinement_levels


class TestPoissonMode:
    def test_closed_form_alpha1(self, grid384):
        # phi'' - phi = e^{-z}, phi(0)=0, bounded  =>  phi = -(z/2) e^{-z}
        g = grid384
        mode = solve_poisson_mode(np.exp(-g.nodes), 1, g)
        exact = -(g.nodes / 2.0) * np.exp(-g.nodes)
        assert mode.phi[0] == 0.0
        assert np.abs(mode.phi - exact).max() < 1e-7

    def test_zero_source(self, grid384):
        mode = solve_poisson_mode(np.zeros(grid384.n_nodes), 3, grid384)
        assert np.abs(mode.phi).max() == 0.0

    def test_alpha0_decay_normalization(self, grid384):
        # d phi/dz = -int_z^inf e^{-y} dy = -e^{-z}
        g = grid384
        mode = solve_poisson_mode(np.exp(-g.nodes), 0, g)
        assert np.abs(mode.dphi + np.exp(-g.nodes)).max() < 1e-7
        assert mode.phi[0] == 0.0

    def test_negative_alpha_matches_positive(self, grid384):
        w = grid384.nodes * np.exp(-grid384.nodes)
        a = solve_poisson_mode(w, 2, grid384)
        b = solve_poisson_mode(w, -2, grid384)
        assert np.abs(a.phi - b.phi).max() == 0.0

    def test_non_finite_rejected(self, grid384):
        bad = np.full(grid384.n_nodes, np.nan)
        with pytest.raises(ValueError):
            solve_poisson_mode(bad, 1, grid384)

    @pytest.mark.parametrize("alpha", [0, 1, 4])
    def test_ode_residual_convergence(self, alpha):
        errs = []
        for n, dref in refinement_levels():
            g = build_graded_grid(25.0, n, dref)
            w = np.exp(-g.nodes) * (1.0 + g.nodes)
            mode = solve_poisson_mode(w, alpha, g)
            res = d2dz(mode.phi, g) - alpha**2 * mode.phi - w
            # interior residual; end rows of d2dz are copied from neighbors
            errs.append(np.abs(res[2:-2]).max())
        assert min(observed_orders(errs)) >= 2.0


class TestVelocity:
    def test_cosine_vorticity(self, grid384):
        g = grid384
        prof = 0.5 * np.exp(-g.nodes)
        omega = SpectralField.from_modes(g, 2, {1: prof, -1: prof})
        u1, u2 = velocity_from_vorticity(omega)
        # phi_{+-1} = -(z/4) e^{-z}; u2 = -i alpha phi
        phi = -(g.nodes / 4.0) * np.exp(-g.nodes)
        assert np.abs(u2.mode(1) - (-1j) * phi).max() < 1e-7
        assert abs(u2.mode(1)[0]) == 0.0
        assert abs(u2.mode(-1)[0]) == 0.0

    def test_shear_has_no_vertical_velocity(self, grid384):
        omega = SpectralField.from_modes(grid384, 3, {0: np.exp(-grid384.nodes)})
        _, u2 = velocity_from_vorticity(omega)
        assert np.abs(u2.coeffs).max() == 0.0

    def test_zero_field(self, grid384):
        u1, u2 = velocity_from_vorticity(SpectralField.zeros(grid384, 2))
        assert np.abs(u1.coeffs).max() == 0.0
        assert np.abs(u2.coeffs).max() == 0.0

    def test_divergence_free_discrete(self, grid384):
        g = grid384
        omega = SpectralField.from_modes(
            g, 3, {0: np.exp(-g.nodes), 1: g.nodes * np.exp(-g.nodes),
                   -1: g.nodes * np.exp(-g.nodes), 3: np.exp(-2 * g.nodes),
                   -3: np.exp(-2 * g.nodes)})
        u1, u2 = velocity_from_vorticity(omega)
        for alpha in range(-3, 4):
            div = 1j * alpha * u1.mode(alpha) + ddz(u2.mode(alpha), g)
            assert np.abs(div).max() < 2e-5

    def test_elliptic_ratio_stability(self):
        # discrete Prop-2.3-style ratios stable under refinement (< 10 %)
        ratios = []
        for n, dref in ((256, 0.04), (512, 0.02)):
            g = build_graded_grid(25.0, n, dref)
            omega = SpectralField.from_modes(
                g, 2, {1: np.exp(-g.nodes), -1: np.exp(-g.nodes),
                       2: 0.3 * g.nodes * np.exp(-g.nodes),
                       -2: 0.3 * g.nodes * np.exp(-g.nodes)})
            u1, u2 = velocity_from_vorticity(omega)
            sup_u = max(np.abs(u1.coeffs).max(), np.abs(u2.coeffs).max())
            l1_w = sum(float(g.integrate(np.abs(omega.mode(a)))) for a in range(-2, 3))
            ratios.append(sup_u / l1_w)
        assert all(np.isfinite(r) for r in ratios)
        assert abs(ratios[1] - ratios[0]) <= 0.10 * ratios[0]


class TestBoundaryTrace:
    def test_exponential_source(self, grid384):
        src = SpectralField.from_modes(grid384, 2, {1: np.exp(-grid384.nodes)})
        g = boundary_source_trace(src)
        assert abs(g[1] - (-0.5)) < 1e-9
        assert g[2] == 0.0

    def test_trace_matches_dphi_at_wall(self, grid384):
        # oracle: differentiate the quadrature-computed stream function at z=0
        w = grid384.nodes * np.exp(-1.5 * grid384.nodes)
        mode = solve_poisson_mode(w, 1, grid384)
        src = SpectralField.from_modes(grid384, 1, {1: w})
        g = boundary_source_trace(src)
        assert abs(g[1] - mode.dphi[0]) < 1e-12

    def test_zero_source(self, grid384):
        g = boundary_source_trace(SpectralField.zeros(grid384, 3))
        assert all(v == 0.0 for v in g.values())

    def test_alpha0_limit(self, grid384):
        src = SpectralField.from_modes(grid384, 1, {0: np.exp(-grid384.nodes)})
        g = boundary_source_trace(src)
        assert abs(g[0] - (-1.0)) < 1e-8

    def test_non_finite_rejected(self, grid384):
        src = SpectralField.zeros(grid384, 1)
        src.coeffs[0, 0] = np.inf
        with pytest.raises(ValueError):
            boundary_source_trace(src)


class TestDirichletToNeumann:
    def test_definition(self):
        assert dirichlet_to_neumann({3: 1.0})[3] == 3.0
        assert dirichlet_to_neumann({0: 5.0})[0] == 0.0
        c = 2.5 - 1.0j
        assert dirichlet_to_neumann({-2: c})[-2] == 2 * c
