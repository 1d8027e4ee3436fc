"""Tests for exact, semiclassical, and potential-framework bond pricing."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathint.kernels import KernelQuery, drift_expectation, free_kernel, ho_kernel_fixed, ho_kernel_free
from pathint.models import (
    Curve,
    ExponentialMap,
    HullWhiteParams,
    LinearMap,
    MappedModel,
    PotentialModel,
    QuadraticMap,
)
from pathint.oracles import PdeConfig, pde_price
from pathint.pricing import (
    PriceQuery,
    PriceResult,
    conditional_expectation_semiclassical,
    price_hull_white_exact,
    price_potential_model,
    price_semiclassical,
    yield_from_price,
)


def _vasicek_reference(z, theta, sigma, alpha, dt):
    """Textbook affine form, written independently of the pricer."""
    B = (1.0 - math.exp(-alpha * dt)) / alpha
    lnv = (
        -z * B
        - (theta / alpha) * (dt - B)
        + (sigma**2 / (2.0 * alpha**2)) * (dt - B)
        - sigma**2 * B * B / (4.0 * alpha)
    )
    return math.exp(lnv)


class TestYieldFromPrice:
    def test_basic(self):
        assert yield_from_price(math.exp(-0.1), 0.0, 2.0) == pytest.approx(0.05, rel=1e-14)

    def test_boundary_is_zero(self):
        assert yield_from_price(1.0, 1.0, 1.0) == 0.0

    def test_nonpositive_price_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            yield_from_price(0.0, 0.0, 1.0)


class TestQueryAndResult:
    def test_reversed_horizon_rejected(self):
        with pytest.raises(ValueError, match="T >= t"):
            PriceQuery(0.05, 1.0, 0.0)

    def test_nonfinite_rate_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            PriceQuery(math.nan, 0.0, 1.0)

    def test_result_validation(self):
        with pytest.raises(ValueError, match="positive"):
            PriceResult(-1.0, 0.0, "exact")
        with pytest.raises(ValueError, match="method"):
            PriceResult(1.0, 0.0, "magic")


class TestHullWhiteExact:
    HW = HullWhiteParams(0.01, 0.05, 1.0)

    @pytest.mark.parametrize("dt", [0.5, 1.0, 2.0, 5.0, 10.0])
    def test_matches_affine_form(self, dt):
        got = price_hull_white_exact(self.HW, PriceQuery(0.05, 0.0, dt))
        ref = _vasicek_reference(0.05, 0.05, 0.01, 1.0, dt)
        assert got.price == pytest.approx(ref, rel=1e-12)
        assert got.diagnostics["route"] == "closed-form"

    def test_regression_value(self):
        got = price_hull_white_exact(self.HW, PriceQuery(0.05, 0.0, 1.0))
        assert got.price == pytest.approx(0.9512374192010188, rel=1e-14)
        assert got.yield_ == pytest.approx(0.04999159543796383, rel=1e-12)

    def test_small_alpha_is_regular(self):
        # explicit alpha -> 0 limit: ln v = -z dt - theta dt^2/2 + sigma^2 dt^3/6
        lim = math.exp(-0.05 - 0.025 + 0.01**2 / 6.0)
        got0 = price_hull_white_exact(
            HullWhiteParams(0.01, 0.05, 0.0), PriceQuery(0.05, 0.0, 1.0)
        ).price
        assert got0 == pytest.approx(lim, rel=1e-13)
        # tiny positive alpha must land next to the limit, not blow up
        for al in (1e-10, 1e-8):
            p = HullWhiteParams(0.01, 0.05, al)
            got = price_hull_white_exact(p, PriceQuery(0.05, 0.0, 1.0)).price
            assert got == pytest.approx(lim, rel=1e-8)

    def test_time_homogeneous_shift(self):
        a = price_hull_white_exact(self.HW, PriceQuery(0.05, 0.0, 2.0)).price
        b = price_hull_white_exact(self.HW, PriceQuery(0.05, 3.0, 5.0)).price
        assert a == pytest.approx(b, rel=1e-12)

    def test_boundary_maturity(self):
        got = price_hull_white_exact(self.HW, PriceQuery(0.05, 1.0, 1.0))
        assert got.price == 1.0
        assert got.yield_ == 0.0

    def test_constant_given_as_knots_uses_closed_form(self):
        p = HullWhiteParams(
            Curve(np.array([0.0, 10.0]), np.array([0.01, 0.01])),
            Curve.constant(0.05),
            Curve.constant(1.0),
        )
        got = price_hull_white_exact(p, PriceQuery(0.05, 0.0, 1.0))
        assert got.diagnostics["route"] == "closed-form"
        assert got.price == pytest.approx(0.9512374192010188, rel=1e-13)

    def test_varying_curves_against_pde(self):
        p = HullWhiteParams(
            Curve(np.array([0.0, 2.0, 5.0]), np.array([0.010, 0.012, 0.011])),
            Curve(np.array([0.0, 2.0, 5.0]), np.array([0.040, 0.050, 0.055])),
            Curve(np.array([0.0, 2.0, 5.0]), np.array([0.8, 1.0, 1.2])),
        )
        got = price_hull_white_exact(p, PriceQuery(0.05, 0.0, 2.0))
        assert got.diagnostics["route"] == "quadrature"
        assert got.diagnostics["quad_error"] < 1e-10
        ref = pde_price(p, PriceQuery(0.05, 0.0, 2.0), PdeConfig(-0.10, 0.25, 600, 400))
        assert got.price == pytest.approx(ref, rel=1e-6)

    def test_horizon_beyond_curves_rejected(self):
        p = HullWhiteParams(
            Curve(np.array([0.0, 1.0]), np.array([0.01, 0.02])),
            Curve.constant(0.05),
            Curve.constant(1.0),
        )
        with pytest.raises(ValueError, match="does not cover"):
            price_hull_white_exact(p, PriceQuery(0.05, 0.0, 2.0))

    @given(z1=st.floats(0.0, 0.1), dz=st.floats(0.005, 0.05))
    @settings(max_examples=25, deadline=None)
    def test_price_decreasing_in_rate(self, z1, dz):
        lo = price_hull_white_exact(self.HW, PriceQuery(z1 + dz, 0.0, 2.0)).price
        hi = price_hull_white_exact(self.HW, PriceQuery(z1, 0.0, 2.0)).price
        assert lo < hi


class TestSemiclassicalMapped:
    def test_linear_map_reproduces_exact(self):
        m = MappedModel(0.01, -0.045, 1.0, 0.05, LinearMap(20.0))
        hw = HullWhiteParams(0.01, 0.005 + 0.0, 1.0)
        # theta_hw = r0 slope theta_x + alpha r0 = -0.045 + 0.05 = 0.005
        q = PriceQuery(0.05, 0.0, 2.0)
        got = price_semiclassical(m, q, grid_points=1025)
        ref = price_hull_white_exact(hw, q)
        assert got.price == pytest.approx(ref.price, rel=1e-9)
        assert got.diagnostics["n_roots"] == 1
        # default grid still lands within the advertised accuracy
        coarse = price_semiclassical(m, q)
        assert coarse.price == pytest.approx(ref.price, rel=1e-7)

    def test_long_horizon_analytic_route(self):
        m = MappedModel(0.08, -0.045, 1.0, 0.05, LinearMap(20.0))
        hw = HullWhiteParams(0.08, 0.005, 1.0)
        q = PriceQuery(0.05, 0.0, 200.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # epsilon flag is moot: linear is exact
            got = price_semiclassical(m, q)
        ref = price_hull_white_exact(hw, q)
        assert got.diagnostics["route"] == "analytic"
        assert got.price == pytest.approx(ref.price, rel=1e-12)

    def test_normalization_identity(self):
        m = MappedModel(0.1, 0.0, 1.0, 0.05, ExponentialMap())
        got = price_semiclassical(
            m, PriceQuery(0.05, 0.0, 1.0), grid_points=2049, include_rate_term=False
        )
        assert got.price == pytest.approx(1.0, abs=1e-8)

    def test_lognormal_regression(self):
        m = MappedModel(0.1, 0.0, 1.0, 0.05, ExponentialMap())
        got = price_semiclassical(m, PriceQuery(0.05, 0.0, 1.0))
        # cross-validated against MC and PDE oracles at this tolerance
        assert got.price == pytest.approx(0.9511638971397313, rel=1e-11)
        assert got.diagnostics["epsilon"] == pytest.approx(0.1, rel=1e-12)

    def test_quadratic_map_single_root(self):
        m = MappedModel(0.1, 0.0, 1.0, 0.05, QuadraticMap(a=1.0))
        got = price_semiclassical(m, PriceQuery(0.05, 0.0, 1.0))
        assert got.price == pytest.approx(0.951094448079009, rel=1e-11)
        assert got.diagnostics["n_roots"] == 1

    def test_quadratic_map_two_roots_summed(self):
        m = MappedModel(0.1, 0.0, 1.0, 0.05, QuadraticMap(a=1.0))
        got = price_semiclassical(m, PriceQuery(0.052, 0.0, 1.0))
        assert got.diagnostics["n_roots"] == 2
        assert 0.0 < got.price < 2.0

    def test_validity_warning(self):
        m = MappedModel(0.5, 0.0, 1.0, 0.05, ExponentialMap())
        with pytest.warns(RuntimeWarning, match="epsilon"):
            price_semiclassical(m, PriceQuery(0.05, 0.0, 1.0))

    def test_boundary_maturity(self):
        m = MappedModel(0.1, 0.0, 1.0, 0.05, ExponentialMap())
        got = price_semiclassical(m, PriceQuery(0.05, 1.0, 1.0))
        assert got.price == 1.0


class TestConditionalExpectation:
    def test_free_particle(self):
        got = conditional_expectation_semiclassical(
            None, (lambda x, t: 0.0 * np.asarray(x, float),) * 3, 0.0, 0.0, 1.0, 1.0
        )
        assert got == pytest.approx(free_kernel(KernelQuery(0.0, 0.0, 1.0, 1.0)), rel=1e-12)

    def test_harmonic_fixed(self):
        got = conditional_expectation_semiclassical(
            None, PotentialModel.harmonic(1.0), 0.0, 0.0, 0.0, 1.0
        )
        ref = ho_kernel_fixed(KernelQuery(0.0, 0.0, 0.0, 1.0, omega=1.0))
        assert got == pytest.approx(ref, rel=1e-10)

    def test_velocity_weight(self):
        got = conditional_expectation_semiclassical(
            lambda x, t: np.ones_like(np.asarray(x, float)),
            (lambda x, t: 0.0 * np.asarray(x, float),) * 3,
            0.0,
            0.0,
            1.0,
            1.0,
        )
        ref = drift_expectation(
            KernelQuery(0.0, 0.0, 1.0, 1.0, rho=Curve.constant(1.0)), fixed_endpoint=True
        )
        assert got == pytest.approx(ref, rel=1e-12)


class TestPotentialModel:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_constant_potential_is_pure_discount(self):
        pm = PotentialModel(
            V=lambda x, t: 0.06 + 0.0 * np.asarray(x, float),
            V_x=lambda x, t: 0.0 * np.asarray(x, float),
            V_xx=lambda x, t: 0.0 * np.asarray(x, float),
        )
        got = price_potential_model(pm, PriceQuery(0.06, 0.0, 1.0))
        assert got.price == pytest.approx(math.exp(-0.06), rel=1e-12)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_two_preimages_sum_to_shifted_harmonic(self):
        # V = x^2/2 - v0: exact value is e^{v0 dt} times two free-endpoint
        # harmonic kernels started at the symmetric preimages of z
        v0, z = 0.3, 0.1
        pm = PotentialModel.harmonic(1.0, v0=v0)
        x_r = math.sqrt(2.0 * (z + v0))
        got = price_potential_model(pm, PriceQuery(z, 0.0, 1.0))
        ref = 2.0 * math.exp(v0) * ho_kernel_free(KernelQuery(x_r, 0.0, 0.0, 1.0, omega=1.0))
        assert got.diagnostics["n_roots"] == 2
        assert got.price == pytest.approx(ref, rel=1e-9)

    def test_long_horizon_yield_near_ground_state(self):
        pm = PotentialModel.harmonic(1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            got = price_potential_model(pm, PriceQuery(1.0, 0.0, 20.0))
        assert abs(got.yield_ - 0.5) < 1e-2

    def test_boundary_maturity(self):
        got = price_potential_model(PotentialModel.harmonic(1.0), PriceQuery(0.5, 2.0, 2.0))
        assert got.price == 1.0
