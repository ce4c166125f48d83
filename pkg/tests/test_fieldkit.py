import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nslab.fieldkit import (GradedGrid, PhysicalField, SpectralField, build_graded_grid,
                            conormal_derivative, ddz, dealias_size, to_physical, to_spectral)

from conftest import observed_orders, refinement_levels


class TestGradedGrid:
    def test_first_cell_constraint(self):
        g = build_graded_grid(10.0, 256, 0.1)
        assert g.nodes[0] == 0.0
        assert g.nodes[1] <= 0.1 / 8.0

    def test_constant_integration_exact(self):
        g = build_graded_grid(10.0, 256, 0.1)
        assert abs(g.integrate(np.ones(g.n_nodes)) - 10.0) <= 1e-12 * 10.0

    def test_exponential_integral(self):
        # closed-form antiderivative: int_0^30 e^{-z} dz = 1 - e^{-30}
        g = build_graded_grid(30.0, 512, 0.01)
        exact = 1.0 - math.exp(-30.0)
        assert abs(g.integrate(np.exp(-g.nodes)) - exact) < 1e-6

    def test_node_count_in_layer(self):
        for dref in (0.1, 0.01, 0.3):
            g = build_graded_grid(10.0, 128, dref)
            assert np.count_nonzero(g.nodes <= dref) >= 8

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError):
            build_graded_grid(-1.0, 256, 0.1)
        with pytest.raises(ValueError):
            build_graded_grid(10.0, 16, 0.1)
        with pytest.raises(ValueError):
            build_graded_grid(10.0, 256, 20.0)
        with pytest.raises(ValueError):
            build_graded_grid(math.nan, 256, 0.1)

    @settings(max_examples=20, deadline=None)
    @given(z_max=st.floats(2.0, 80.0), n=st.integers(48, 400),
           frac=st.floats(1e-3, 0.2))
    def test_weights_positive_and_consistent(self, z_max, n, frac):
        g = build_graded_grid(z_max, n, frac * z_max)
        assert np.all(g.weights > 0)
        assert abs(g.weights.sum() - z_max) <= 1e-12 * z_max
        assert np.all(np.diff(g.nodes) > 0)

    def test_cumulative_matches_total(self):
        g = build_graded_grid(20.0, 128, 0.05)
        v = np.exp(-g.nodes) * np.sin(g.nodes)
        c = g.cumulative_integral(v)
        assert abs(c[-1] - g.integrate(v)) < 1e-13
        exact = 0.5 * (1.0 - np.exp(-g.nodes) * (np.sin(g.nodes) + np.cos(g.nodes)))
        assert np.abs(c - exact).max() < 1e-5


class TestDerivatives:
    def test_linear_profile(self):
        g = build_graded_grid(10.0, 128, 0.05)
        got = conormal_derivative(g.nodes.copy(), g)
        want = g.nodes / (1.0 + g.nodes)
        assert np.abs(got - want).max() < 1e-12

    def test_constant_profile(self):
        g = build_graded_grid(10.0, 128, 0.05)
        assert np.abs(conormal_derivative(np.ones(g.n_nodes), g)).max() < 1e-12

    def test_exponential_convergence_order(self):
        # analytic derivative: psi(z) * (-e^{-z})
        errs = []
        for n, dref in refinement_levels():
            g = build_graded_grid(20.0, n, dref)
            got = conormal_derivative(np.exp(-g.nodes), g)
            want = -g.nodes / (1.0 + g.nodes) * np.exp(-g.nodes)
            errs.append(np.abs(got - want).max())
        assert min(observed_orders(errs)) >= 2.0

    def test_ddz_needs_three_nodes(self):
        g = build_graded_grid(10.0, 128, 0.05)
        with pytest.raises(ValueError):
            ddz(np.ones(2), GradedGrid(
                nodes=np.array([0.0, 1.0]), weights=np.array([0.5, 0.5]),
                z_max=1.0, delta_ref=0.5,
                cell_weights=np.zeros((1, 4)), cell_quad_coeffs=np.zeros((1, 3, 4))))


class TestTransforms:
    def test_cosine_mode(self, grid256):
        n_x = 32
        x = 2 * np.pi * np.arange(n_x) / n_x
        phys = PhysicalField(grid256, np.cos(x)[:, None] * np.exp(-grid256.nodes)[None, :])
        spec = to_spectral(phys, K=5)
        assert spec.real
        ref = 0.5 * np.exp(-grid256.nodes)
        assert np.abs(spec.mode(1) - ref).max() < 1e-14
        assert np.abs(spec.mode(-1) - ref).max() < 1e-14
        for alpha in (0, 2, 3, -4):
            assert np.abs(spec.mode(alpha)).max() < 1e-14

    def test_x_independent_field(self, grid256):
        h = grid256.nodes * np.exp(-grid256.nodes)
        phys = PhysicalField(grid256, np.tile(h, (16, 1)))
        spec = to_spectral(phys, K=3)
        assert np.abs(spec.mode(0) - h).max() < 1e-14
        for alpha in (1, 2, 3):
            assert np.abs(spec.mode(alpha)).max() < 1e-14

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), K=st.integers(1, 7))
    def test_roundtrip_bandlimited(self, seed, K):
        grid = build_graded_grid(15.0, 64, 0.1)
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal((2 * K + 1, 64)) + 1j * rng.standard_normal((2 * K + 1, 64))
        # impose conjugate symmetry so the physical field is real
        coeffs[K] = coeffs[K].real
        for a in range(1, K + 1):
            coeffs[K - a] = np.conj(coeffs[K + a])
        spec = SpectralField(grid, coeffs)
        n_x = dealias_size(K)
        phys = to_physical(spec, n_x)
        assert np.abs(phys.values.imag).max() == 0.0  # real flag collapses

        back = to_spectral(phys, K)
        scale = np.abs(coeffs).max()
        assert np.abs(back.coeffs - coeffs).max() <= 1e-12 * scale
        again = to_physical(back, n_x)
        assert np.abs(again.values - phys.values).max() <= 1e-12 * np.abs(phys.values).max()

    def test_parseval(self, grid256):
        rng = np.random.default_rng(3)
        K, n_x = 5, 32
        coeffs = rng.standard_normal((2 * K + 1, grid256.n_nodes))
        coeffs[K] = coeffs[K].real
        for a in range(1, K + 1):
            coeffs[K - a] = np.conj(coeffs[K + a])
        spec = SpectralField(grid256, coeffs)
        phys = to_physical(spec, n_x)
        quad_l2 = (2 * np.pi / n_x) * float(np.sum((np.abs(phys.values) ** 2) @ grid256.weights))
        mode_l2 = 2 * np.pi * sum(
            float(grid256.integrate(np.abs(spec.mode(a)) ** 2)) for a in range(-K, K + 1))
        assert abs(quad_l2 - mode_l2) <= 1e-10 * mode_l2

    def test_resolution_guard(self, grid256):
        spec = SpectralField.zeros(grid256, K=9)
        with pytest.raises(ValueError):
            to_physical(spec, 16)
        phys = PhysicalField(grid256, np.zeros((16, grid256.n_nodes)))
        with pytest.raises(ValueError):
            to_spectral(phys, K=9)

    def test_physical_field_shape_guards(self, grid256):
        with pytest.raises(ValueError):
            PhysicalField(grid256, np.zeros((17, grid256.n_nodes)))  # not a power of two
        with pytest.raises(ValueError):
            PhysicalField(grid256, np.zeros((16, grid256.n_nodes - 1)))


class TestSpectralField:
    def test_mode_bounds(self, grid256):
        f = SpectralField.zeros(grid256, K=3)
        with pytest.raises(KeyError):
            f.mode(4)

    def test_reality_flag_detection(self, grid256):
        f = SpectralField.from_modes(grid256, 2, {1: np.exp(-grid256.nodes)})
        assert not f.real  # missing conjugate partner
        g = SpectralField.from_modes(grid256, 2, {1: np.exp(-grid256.nodes),
                                                  -1: np.exp(-grid256.nodes)})
        assert g.real

    @settings(max_examples=10, deadline=None)
    @given(c=st.floats(-5.0, 5.0))
    def test_scaling_preserves_reality_defect(self, grid256, c):
        f = SpectralField.from_modes(grid256, 2, {1: np.exp(-grid256.nodes),
                                                  -1: np.exp(-grid256.nodes)})
        g = SpectralField(grid256, c * f.coeffs)
        assert g.reality_defect() <= 1e-12
