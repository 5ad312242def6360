"""Tests for the Bessel / Gamma layer.

Reference values are frozen from closed forms or an independent
high-precision evaluation.  Route-vs-route checks (series against
cosh-quadrature) never share code paths with what they validate.
"""

import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hyperspec.special_functions import (
    GammaPoleError,
    QuadratureConfig,
    SpectralParameter,
    bessel_I,
    bessel_J,
    bessel_K,
    gamma_complex,
    log_kernel_weight,
    loggamma_complex,
    unitary_kernel,
    unitary_kernel_table,
)

# frozen oracles (closed forms / independent high-precision evaluation)
I_HALF_AT_1 = 0.9376748882454876    # sqrt(2/pi) sinh 1
K_HALF_AT_1 = 0.4610685044478946    # sqrt(pi/2) e^{-1}
K_ZERO_AT_1 = 0.4210244382407083
J0_FIRST_ZERO = 2.4048255576957728
GAMMA_2_M3I = complex(-0.08239527266561188, -0.09177428743525931)
GAMMA_HALF_14I = complex(-1.4455538437606964e-10, -5.522788768774066e-10)
GAMMA_M15_05I = complex(0.9379166627878851, 0.34920566814780487)
K_I13_AT_07 = 0.2767806853376060     # K_{1.3 i}(0.7)
K_2I_AT_3 = 0.019156728326977343     # K_{2 i}(3)
I_03_AT_2 = 2.177637989553738        # I_{0.3}(2)
I_2I_AT_05 = complex(-6.459540437804851, -1.4063985380291349)
K_3_AT_25 = 0.2682271463934492       # integer order, limit branch


def rel_err(got, want):
    w = abs(want)
    return abs(got - want) / (w if w > 0 else 1.0)


class TestGamma:
    def test_gamma_one(self):
        assert gamma_complex(1.0) == pytest.approx(1.0, rel=1e-14)

    def test_gamma_half(self):
        assert rel_err(gamma_complex(0.5), math.sqrt(math.pi)) < 1e-13

    def test_gamma_six_factorial(self):
        assert rel_err(gamma_complex(6.0), 120.0) < 1e-13

    def test_modulus_identity_sigma_2(self):
        # |Gamma(1 + i sigma)|^2 = pi sigma / sinh(pi sigma)
        sigma = 2.0
        got = abs(gamma_complex(1.0 + 1j * sigma)) ** 2
        want = math.pi * sigma / math.sinh(math.pi * sigma)
        assert rel_err(got, want) < 1e-10

    @pytest.mark.parametrize(
        "s,want",
        [
            (2.0 - 3.0j, GAMMA_2_M3I),
            (0.5 + 14.134725j, GAMMA_HALF_14I),
            (-1.5 + 0.5j, GAMMA_M15_05I),
        ],
    )
    def test_frozen_values(self, s, want):
        assert rel_err(gamma_complex(s), want) < 1e-12

    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    def test_pole_error_carries_residue(self, n):
        with pytest.raises(GammaPoleError) as exc:
            gamma_complex(float(-n))
        assert exc.value.pole == -n
        assert exc.value.residue == pytest.approx(
            (-1.0) ** n / math.factorial(n), rel=1e-15
        )

    def test_loggamma_matches_gamma(self):
        for s in (1.0 + 2.0j, 3.5 - 1.0j, 0.5 + 10.0j):
            got = np.exp(loggamma_complex(s))
            assert rel_err(got, gamma_complex(s)) < 1e-12

    def test_loggamma_rejects_left_halfplane(self):
        with pytest.raises(ValueError):
            loggamma_complex(-1.0 + 2.0j)

    @settings(deadline=None, max_examples=100)
    @given(
        a=st.floats(-3.0, 4.0),
        b=st.floats(-3.0, 3.0),
    )
    def test_reflection_property(self, a, b):
        # Gamma(s) Gamma(1-s) sin(pi s) = pi
        assume(abs(b) > 1e-3 or abs(a - round(a)) > 0.05)
        s = complex(a, b)
        prod = gamma_complex(s) * gamma_complex(1.0 - s)
        sin_pi_s = complex(
            math.sin(math.pi * a) * math.cosh(math.pi * b),
            math.cos(math.pi * a) * math.sinh(math.pi * b),
        )
        assert abs(prod * sin_pi_s - math.pi) < 1e-10 * abs(prod * sin_pi_s)


class TestBesselI:
    def test_small_argument_limit(self):
        assert bessel_I(0.0, 1e-8).real == pytest.approx(1.0, abs=1e-8)

    def test_half_order_closed_form(self):
        assert rel_err(bessel_I(0.5, 1.0).real, I_HALF_AT_1) < 1e-10

    def test_frozen_real_order(self):
        assert rel_err(bessel_I(0.3, 2.0).real, I_03_AT_2) < 1e-10

    def test_frozen_imaginary_order(self):
        assert rel_err(bessel_I(2.0j, 0.5), I_2I_AT_05) < 1e-10

    @pytest.mark.parametrize("nu", [0.0, 1.0, 0.3, 2.7])
    @pytest.mark.parametrize("z", [0.2, 1.0, 5.0, 18.0])
    def test_against_scipy(self, nu, z):
        assert rel_err(bessel_I(nu, z).real, sp.iv(nu, z)) < 1e-10

    @pytest.mark.parametrize("nu", [0.4, 1.5, 1.3j, 0.5 + 0.8j])
    @pytest.mark.parametrize("z", [0.7, 3.0, 9.0])
    def test_derivative_recurrence(self, nu, z):
        # 2 I'_nu = I_{nu-1} + I_{nu+1}, derivative by central difference
        h = 1e-6 * max(1.0, z)
        fd = (bessel_I(nu, z + h) - bessel_I(nu, z - h)) / (2.0 * h)
        rec = 0.5 * (bessel_I(nu - 1.0, z) + bessel_I(nu + 1.0, z))
        assert abs(fd - rec) < 1e-6 * abs(rec)

    def test_series_vs_quadrature(self):
        for nu in (0.0, 0.6, 1.1j):
            for z in (0.5, 2.0, 6.0):
                a = bessel_I(nu, z, method="series")
                b = bessel_I(nu, z, method="quadrature")
                assert rel_err(a, b) < 1e-10

    def test_scaled_variant(self):
        nu, z = 0.3, 14.0
        a = bessel_I(nu, z, scaled=True).real
        assert rel_err(a, sp.ive(nu, z)) < 1e-10

    def test_rejects_nonpositive_z(self):
        with pytest.raises(ValueError):
            bessel_I(0.5, 0.0)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            bessel_I(0.5, 1.0, method="magic")


class TestBesselK:
    def test_half_order_closed_form(self):
        assert rel_err(bessel_K(0.5, 1.0).real, K_HALF_AT_1) < 1e-10

    def test_k0_at_1(self):
        assert rel_err(bessel_K(0.0, 1.0).real, K_ZERO_AT_1) < 1e-8

    def test_imaginary_order_real_within_1e12(self):
        v = bessel_K(1.3j, 0.7)
        assert abs(v.imag) < 1e-12
        assert rel_err(v.real, K_I13_AT_07) < 1e-10

    def test_frozen_imaginary_order(self):
        assert rel_err(bessel_K(2.0j, 3.0).real, K_2I_AT_3) < 1e-10

    @pytest.mark.parametrize("n", [0, 1, 3])
    @pytest.mark.parametrize("z", [0.5, 2.5, 10.0])
    def test_integer_order_limit_branch(self, n, z):
        assert rel_err(bessel_K(float(n), z).real, sp.kn(n, z)) < 1e-8

    def test_frozen_integer_order(self):
        assert rel_err(bessel_K(3.0, 2.5).real, K_3_AT_25) < 1e-8

    @pytest.mark.parametrize("nu", [0.3, 1.7, 0.5j, 2.4j])
    @pytest.mark.parametrize("z", [0.4, 1.5, 7.0])
    def test_derivative_recurrence(self, nu, z):
        # 2 K'_nu = -(K_{nu-1} + K_{nu+1})
        h = 1e-6 * max(1.0, z)
        fd = (bessel_K(nu, z + h) - bessel_K(nu, z - h)) / (2.0 * h)
        rec = -0.5 * (bessel_K(nu - 1.0, z) + bessel_K(nu + 1.0, z))
        assert abs(fd - rec) < 1e-6 * abs(rec)

    def test_dual_route_box(self):
        # the two independent routes agree on the (k, z) box
        for k in (0.1, 0.5, 2.0, 10.0):
            for z in (0.05, 0.3, 1.0, 5.0, 20.0):
                a = bessel_K(1j * k, z, method="series").real
                b = bessel_K(1j * k, z, method="quadrature").real
                assert rel_err(a, b) < 1e-8, (k, z)

    def test_large_z_asymptotic_at_30(self):
        z = 30.0
        for nu in (0.1, 0.3, 0.5, 0.75, 0.25j, 0.5j):
            v = bessel_K(nu, z).real
            assert abs(v * math.sqrt(2.0 * z / math.pi) * math.exp(z) - 1.0) < 0.01

    def test_small_z_law(self):
        # K_nu(z) ~ (Gamma(nu)(z/2)^{-nu} + Gamma(-nu)(z/2)^nu) / 2, nu not integer
        z = 1e-3
        for nu in (0.3, 0.6, 1.4, 0.8j):
            want = 0.5 * (
                gamma_complex(nu) * (0.5 * z) ** (-nu)
                + gamma_complex(-nu) * (0.5 * z) ** nu
            )
            got = bessel_K(nu, z)
            assert abs(got - want) < 0.01 * abs(want)

    def test_wronskian_grid(self):
        # I_nu K'_nu - I'_nu K_nu = -1/z, derivatives via the pair recurrences
        nus = [0.3, 0.5, 1.3, 0.5j, 2.0j]
        zs = [0.3, 1.0, 3.0, 10.0]
        for nu in nus:
            for z in zs:
                ip = 0.5 * (bessel_I(nu - 1.0, z) + bessel_I(nu + 1.0, z))
                kp = -0.5 * (bessel_K(nu - 1.0, z) + bessel_K(nu + 1.0, z))
                w = bessel_I(nu, z) * kp - ip * bessel_K(nu, z)
                assert abs(w * z + 1.0) < 1e-8, (nu, z)

    def test_rejects_nonpositive_z(self):
        with pytest.raises(ValueError):
            bessel_K(1.0j, -2.0)

    @settings(deadline=None, max_examples=60)
    @given(k=st.floats(0.1, 10.0), z=st.floats(0.05, 20.0))
    def test_dual_route_property(self, k, z):
        a = bessel_K(1j * k, z, method="series").real
        b = bessel_K(1j * k, z, method="quadrature").real
        assert rel_err(a, b) < 1e-8

    @settings(deadline=None, max_examples=60)
    @given(
        nu=st.one_of(
            st.floats(-2.2, 2.2),
            st.floats(0.1, 4.0).map(lambda k: 1j * k),
        ),
        z=st.floats(0.1, 15.0),
    )
    def test_wronskian_property(self, nu, z):
        ip = 0.5 * (bessel_I(nu - 1.0, z) + bessel_I(nu + 1.0, z))
        kp = -0.5 * (bessel_K(nu - 1.0, z) + bessel_K(nu + 1.0, z))
        w = bessel_I(nu, z) * kp - ip * bessel_K(nu, z)
        assert abs(w * z + 1.0) < 1e-8


def _j0_series_oracle(x: float) -> float:
    # plain power series, converges fast for |x| < 4
    term, total = 1.0, 1.0
    for m in range(1, 30):
        term *= -(x * x) / (4.0 * m * m)
        total += term
    return total


class TestBesselJ:
    def test_j0_at_zero(self):
        assert bessel_J(0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_j1_at_zero(self):
        assert bessel_J(1, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_first_zero_by_bisection(self):
        lo, hi = 2.0, 3.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _j0_series_oracle(lo) * _j0_series_oracle(mid) <= 0.0:
                hi = mid
            else:
                lo = mid
        root = 0.5 * (lo + hi)
        assert abs(root - J0_FIRST_ZERO) < 1e-12
        assert abs(bessel_J(0, 2.404826)) < 1e-5

    @pytest.mark.parametrize("order", [0, 1])
    def test_against_scipy(self, order):
        ref = sp.j0 if order == 0 else sp.j1
        for z in np.linspace(0.0, 60.0, 121):
            got = bessel_J(order, float(z))
            assert abs(got - ref(z)) < 1e-10

    def test_even_odd_extension(self):
        for z in (0.7, 5.3, 17.0):
            assert bessel_J(0, -z) == pytest.approx(bessel_J(0, z), rel=1e-14)
            assert bessel_J(1, -z) == pytest.approx(-bessel_J(1, z), rel=1e-14)

    def test_vectorized(self):
        z = np.linspace(0.0, 40.0, 257)
        out = bessel_J(0, z)
        assert out.shape == z.shape
        assert np.max(np.abs(out - sp.j0(z))) < 1e-10

    def test_rejects_high_order(self):
        with pytest.raises(ValueError):
            bessel_J(2, 1.0)

    @settings(deadline=None, max_examples=80)
    @given(z=st.floats(0.01, 40.0))
    def test_j0_derivative_is_minus_j1(self, z):
        h = 1e-6
        fd = (bessel_J(0, z + h) - bessel_J(0, z - h)) / (2.0 * h)
        assert abs(fd + bessel_J(1, z)) < 1e-6 * max(1.0, abs(fd))


class TestUnitaryKernel:
    def test_matches_weighted_bessel_k(self):
        for k, z in ((0.5, 0.3), (2.0, 1.0), (5.0, 12.0), (20.0, 25.0)):
            want = math.exp(log_kernel_weight(k)) * bessel_K(1j * k, z).real
            assert rel_err(unitary_kernel(k, z), want) < 1e-7, (k, z)

    def test_weight_formula(self):
        for k in (0.3, 1.0, 7.0):
            direct = math.sqrt(2.0 * k * math.sinh(math.pi * k)) / math.pi
            assert rel_err(math.exp(log_kernel_weight(k)), direct) < 1e-13

    def test_table_shape_and_bound(self):
        k = np.linspace(0.1, 30.0, 300)
        lz = np.linspace(-4.0, 6.0, 400)
        B = unitary_kernel_table(k, lz)
        assert B.shape == (300, 400)
        assert np.isfinite(B).all()
        assert np.abs(B).max() < 1.5

    def test_zero_k_row_is_zero(self):
        k = np.array([0.0, 1.0])
        B = unitary_kernel_table(k, np.array([0.0, 1.0]))
        assert np.all(B[0] == 0.0)
        assert np.all(B[1] != 0.0)

    def test_deep_tail_underflows_to_zero(self):
        B = unitary_kernel_table(np.array([0.5]), np.array([math.log(900.0)]))
        assert B[0, 0] == 0.0

    def test_requires_sorted_k(self):
        with pytest.raises(ValueError):
            unitary_kernel_table(np.array([2.0, 1.0]), np.array([0.0]))

    def test_crossover_strip_accuracy(self):
        # both evaluation regions and the switch line between them
        for k, z in ((8.0, 8.5), (20.0, 21.0), (20.0, 26.0), (30.0, 33.0)):
            want = math.exp(log_kernel_weight(k)) * bessel_K(1j * k, z).real
            assert rel_err(unitary_kernel(k, z), want) < 1e-6, (k, z)


class TestConfigAndTypes:
    def test_node_count_floor(self):
        with pytest.raises(ValueError):
            QuadratureConfig(nodes_per_decade=8)

    def test_tail_bound_range(self):
        with pytest.raises(ValueError):
            QuadratureConfig(tail_bound=1.0)

    def test_cutoff_reaches_tail_bound(self):
        cfg = QuadratureConfig()
        for z in (0.05, 1.0, 30.0):
            s = cfg.cutoff(z, 0.0)
            assert z * (math.cosh(s) - 1.0) > -math.log(cfg.tail_bound)

    def test_step_resolves_oscillation(self):
        cfg = QuadratureConfig()
        assert cfg.step(40.0) <= 2.0 * math.pi / (8.0 * 70.0)

    def test_spectral_parameter_continuous(self):
        p = SpectralParameter.continuous(zeta=2.0, k=1.5)
        assert p.nu == 1.5j
        assert p.on_continuous_spectrum

    def test_spectral_parameter_rejects_negative_zeta(self):
        with pytest.raises(ValueError):
            SpectralParameter(zeta=-1.0, nu=0.5j)
