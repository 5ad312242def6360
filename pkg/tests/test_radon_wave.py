"""Tests for the Radon transform, the wave group, and the kernel identity."""

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperspec.kl_transform import HnFunction, RadialGrid, default_radial_grid
from hyperspec.radon_wave import (
    RadonImage,
    WaveState,
    asymptotic_profile_check,
    default_radon_kgrid,
    default_radon_sgrid,
    h3_distance,
    kernel_identity_check,
    radial_wave_n3,
    radon_explicit,
    radon_spectral,
    radon_to_csv,
    wave_energy,
    wave_propagate,
    wave_propagate_many,
    wave_spherical_mean_n3,
    wave_states_to_csv,
    write_metadata_json,
    _j1_over_w,
)

GRID = default_radial_grid()
L = 32.0
NX = 256
X = -L / 2 + (L / NX) * np.arange(NX)
PROF_X = np.sin(2 * np.pi * 3 * X / L) * np.exp(-X ** 2 / 4)


def cbump(y, a, b, steep=1.0):
    """C-infinity bump supported exactly on (a, b)."""
    y = np.asarray(y, dtype=float)
    u = (y - a) / (b - a)
    out = np.zeros_like(y)
    m = (u > 0) & (u < 1)
    v = u[m]
    out[m] = np.exp(-steep / (v * (1 - v))) * math.exp(4.0 * steep)
    return out


def standard_fn():
    return HnFunction(np.outer(PROF_X, np.exp(-2.0 * (GRID.t - 0.5) ** 2)),
                      L, GRID)


def mode_apply_h0(fn):
    # -(d_tt - d_t) + (xi^2 e^{2 tau} - 1/4) per lattice mode, FD in tau
    fhat = fn.x_fft()
    h = fn.grid.dt
    d2 = np.zeros_like(fhat)
    d1 = np.zeros_like(fhat)
    d2[:, 1:-1] = (fhat[:, 2:] - 2 * fhat[:, 1:-1] + fhat[:, :-2]) / h ** 2
    d1[:, 1:-1] = (fhat[:, 2:] - fhat[:, :-2]) / (2 * h)
    out = -(d2 - d1) + (fn.xi[:, None] ** 2 * np.exp(2 * fn.grid.t)[None, :]
                        - 0.25) * fhat
    out[:, :2] = 0.0
    out[:, -2:] = 0.0
    return fn.with_values(fn.from_x_fft(out).values.real)


@pytest.fixture(scope="module")
def radon_pair():
    fn = standard_fn()
    return fn, radon_spectral(fn), radon_explicit(fn)


@pytest.fixture(scope="module")
def wave_batch():
    f = standard_fn()
    gx = np.cos(2 * np.pi * 2 * X / L) * np.exp(-X ** 2 / 6)
    g = HnFunction(np.outer(gx, np.exp(-3.0 * (GRID.t + 0.2) ** 2)), L, GRID)
    states = wave_propagate_many(f, g, [0.0, 2.5, 5.0])
    return f, g, states


class TestContainers:
    def test_radon_image_validation(self):
        ok = RadonImage(np.array([0.0, 1.0]), np.zeros((2, 4)), 8.0)
        assert ok.nx == 4
        assert np.allclose(ok.x, [-4.0, -2.0, 0.0, 2.0])
        with pytest.raises(ValueError):
            RadonImage(np.array([1.0, 0.0]), np.zeros((2, 4)), 8.0)
        with pytest.raises(ValueError):
            RadonImage(np.array([0.0, 1.0]), np.zeros((3, 4)), 8.0)
        with pytest.raises(ValueError):
            RadonImage(np.array([0.0, 1.0]), np.full((2, 4), np.nan), 8.0)
        with pytest.raises(ValueError):
            RadonImage(np.array([0.0, 1.0]), np.zeros((2, 4)), -2.0)

    def test_radon_image_norm(self):
        img = RadonImage(np.array([0.0, 1.0]), np.ones((2, 4)), 8.0)
        assert img.norm() == pytest.approx(math.sqrt(8.0), rel=1e-12)

    def test_wave_state_grid_mismatch(self):
        f = HnFunction.zeros(L, NX, GRID)
        other = HnFunction.zeros(L, NX, RadialGrid(1e-2, 1e2, 64))
        with pytest.raises(ValueError):
            WaveState(f, other, 0.0)

    def test_metadata(self):
        img = RadonImage(np.array([0.0, 1.0]), np.zeros((2, 4)), 8.0)
        meta = img.metadata()
        assert meta["n"] == 2 and meta["s_count"] == 2 and meta["nx"] == 4
        f = HnFunction.zeros(L, NX, GRID)
        state = WaveState(f, f, 1.5)
        assert state.metadata()["t"] == 1.5
        assert state.metadata()["count"] == GRID.count


class TestRadonSpectral:
    def test_zero_input(self):
        img = radon_spectral(HnFunction.zeros(L, NX, GRID))
        assert np.max(np.abs(img.values)) == 0.0

    def test_isometry(self, radon_pair):
        fn, img, _ = radon_pair
        assert abs(img.norm() - fn.norm()) / fn.norm() <= 1e-3

    def test_real_input_real_image(self, radon_pair):
        _, img, _ = radon_pair
        assert not np.iscomplexobj(img.values)

    def test_matches_explicit_route(self, radon_pair):
        _, img_s, img_e = radon_pair
        num = np.sqrt(np.sum((img_e.values - img_s.values) ** 2))
        den = np.sqrt(np.sum(img_s.values ** 2))
        assert num / den <= 1e-3

    def test_intertwining_with_second_derivative(self, radon_pair):
        fn, img, _ = radon_pair
        rh = radon_spectral(mode_apply_h0(fn))
        h = img.s[1] - img.s[0]
        d2 = (img.values[2:] - 2 * img.values[1:-1] + img.values[:-2]) / h ** 2
        resid = rh.values[1:-1] + d2
        rel = np.sqrt(np.sum(resid[2:-2] ** 2) / np.sum(rh.values[3:-3] ** 2))
        assert rel <= 1e-2

    def test_kgrid_must_be_positive(self):
        with pytest.raises(ValueError):
            radon_spectral(standard_fn(), kgrid=np.array([0.0, 1.0]))

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, a, b):
        grid = RadialGrid(1e-2, 1e2, 64)
        nx = 16
        xs = -4.0 + 0.5 * np.arange(nx)
        base = np.sin(2 * np.pi * xs / 8.0)[:, None] * np.exp(-grid.t ** 2)[None, :]
        pert = np.cos(2 * np.pi * 2 * xs / 8.0)[:, None] \
            * (grid.t * np.exp(-grid.t ** 2))[None, :]
        f = HnFunction(base, 8.0, grid)
        g = HnFunction(pert, 8.0, grid)
        kg = default_radon_kgrid(16, 5.0)
        lhs = radon_spectral(f.with_values(a * f.values + b * g.values), kgrid=kg)
        ra = radon_spectral(f, kgrid=kg)
        rb = radon_spectral(g, kgrid=kg)
        scale = max(np.max(np.abs(lhs.values)), 1.0)
        assert np.max(np.abs(lhs.values - a * ra.values - b * rb.values)) \
            <= 1e-12 * scale


class TestRadonExplicit:
    def test_zero_input(self):
        img = radon_explicit(HnFunction.zeros(L, NX, GRID))
        assert np.max(np.abs(img.values)) == 0.0

    def test_support_theorem_exact(self):
        # f supported in {y > 0.6} subset of {y > 0.5}
        ft = cbump(GRID.t, math.log(0.6), math.log(5.0))
        fn = HnFunction(np.outer(PROF_X, ft), L, GRID)
        img = radon_explicit(fn)
        zone = img.s > math.log(2.0)
        assert np.max(np.abs(img.values[zone])) <= 1e-10
        assert np.max(np.abs(img.values)) > 1e-2

    def test_support_theorem_spectral_side(self):
        # the spectral route inherits the vanishing up to its k-band tail
        ft = cbump(GRID.t, math.log(0.6), math.log(5.0), steep=3.0)
        fn = HnFunction(np.outer(PROF_X, ft), L, GRID)
        img = radon_spectral(fn, kgrid=default_radon_kgrid(1536, 60.0))
        zone = img.s > math.log(2.0)
        peak = np.max(np.abs(img.values))
        assert np.max(np.abs(img.values[zone])) <= 1e-8 * peak

    def test_off_lattice_sgrid_rejected(self):
        with pytest.raises(ValueError):
            radon_explicit(standard_fn(), sgrid=np.array([0.1234567]))

    def test_sgrid_subset_matches_default(self, radon_pair):
        fn, _, img_e = radon_pair
        sub = default_radon_sgrid(GRID)[600:680]
        img = radon_explicit(fn, sgrid=sub)
        assert np.allclose(img.values, img_e.values[600:680], atol=1e-12)


class TestWavePropagate:
    def test_time_zero_exact(self, wave_batch):
        f, g, states = wave_batch
        assert np.array_equal(states[0].u.values, f.values)
        assert np.array_equal(states[0].v.values, g.values)

    def test_energy_conservation(self, wave_batch):
        _, _, states = wave_batch
        energies = [wave_energy(s) for s in states]
        drift = max(abs(e - energies[0]) / energies[0] for e in energies)
        assert drift <= 1e-6

    def test_group_property(self, wave_batch):
        _, _, states = wave_batch
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            again = wave_propagate(states[1].u, states[1].v, 2.5)
        for a, b in ((again.u, states[2].u), (again.v, states[2].v)):
            rel = np.sqrt(np.sum((a.values - b.values) ** 2)
                          / np.sum(b.values ** 2))
            assert rel <= 1e-6

    def test_time_reversal_cos_branch(self):
        f = standard_fn()
        sp = wave_propagate(f, None, 1.5)
        sm = wave_propagate(f, None, -1.5)
        assert np.array_equal(sp.u.values, sm.u.values)
        assert np.array_equal(sp.v.values, -sm.v.values)

    def test_finite_log_speed(self):
        ft = cbump(GRID.t, -1.0, 1.0, steep=3.0)
        fn = HnFunction(np.outer(PROF_X, ft), L, GRID)
        st_ = wave_propagate(fn, None, 1.0)
        u = np.abs(st_.u.values)
        outside = np.abs(GRID.t) > 2.0 + 2 * GRID.dt
        assert np.max(u[:, outside]) <= 1e-6 * np.max(u)

    def test_kernel_route_point_samples(self):
        # light-cone kernel: half-weight delta pair on the cone plus the
        # J1 interior term, matched against the spectral route
        f = standard_fn()
        m = 150
        t = m * GRID.dt
        state = wave_propagate(f, None, t)
        U = state.u.x_fft()
        F = f.x_fft()
        r = 3
        xi = 2 * math.pi * 3 / L
        h = GRID.dt
        ell = np.arange(-m, m + 1)
        wt = np.full(ell.size, h)
        wt[0] *= 0.5
        wt[-1] *= 0.5
        for j in (1050, 1100, 1150):
            y = GRID.y[j]
            yp = GRID.y[j - ell]
            val = 0.5 * (math.exp(-0.5 * t) * F[r, j + m]
                         + math.exp(0.5 * t) * F[r, j - m])
            wsq = np.maximum(xi * xi * (2 * y * yp * math.cosh(t)
                                        - y * y - yp * yp), 0.0)
            dtp = -_j1_over_w(np.sqrt(wsq)) * xi * xi * y * yp * math.sinh(t)
            val += 0.5 * np.sum(np.exp(0.5 * ell * h) * dtp * F[r, j - ell] * wt)
            assert abs(val - U[r, j]) / abs(U[r, j]) <= 1e-3

    def test_g_branch_small_time(self):
        gx = np.cos(2 * np.pi * 2 * X / L) * np.exp(-X ** 2 / 6)
        g = HnFunction(np.outer(gx, np.exp(-3.0 * (GRID.t + 0.2) ** 2)), L, GRID)
        zero = HnFunction.zeros(L, NX, GRID)
        state = wave_propagate(zero, g, 0.01)
        rel_u = np.sqrt(np.sum((state.u.values - 0.01 * g.values) ** 2)
                        / np.sum((0.01 * g.values) ** 2))
        rel_v = np.sqrt(np.sum((state.v.values - g.values) ** 2)
                        / np.sum(g.values ** 2))
        assert rel_u <= 1e-3
        assert rel_v <= 1e-3

    def test_truncation_warning(self):
        ft = np.exp(-4.0 * (GRID.t - 8.0) ** 2)
        fn = HnFunction(np.outer(PROF_X, ft), L, GRID)
        with pytest.warns(UserWarning, match="truncation"):
            wave_propagate(fn, None, 3.0)

    def test_no_warning_for_interior_support(self):
        ft = cbump(GRID.t, -1.0, 1.0)
        fn = HnFunction(np.outer(PROF_X, ft), L, GRID)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            wave_propagate(fn, None, 0.5)

    def test_grid_mismatch_rejected(self):
        f = HnFunction.zeros(L, NX, GRID)
        g = HnFunction.zeros(L, NX, RadialGrid(1e-2, 1e2, 64))
        with pytest.raises(ValueError):
            wave_propagate(f, g, 1.0)

    def test_real_data_stays_real(self, wave_batch):
        _, _, states = wave_batch
        assert not np.iscomplexobj(states[2].u.values)
        assert not np.iscomplexobj(states[2].v.values)


class TestWaveEnergy:
    def test_matches_difference_quadrature(self, wave_batch):
        _, _, states = wave_batch
        state = states[1]
        spectral = wave_energy(state)
        fh = state.u.x_fft()
        h = GRID.dt
        d2 = np.zeros_like(fh)
        d1 = np.zeros_like(fh)
        d2[:, 1:-1] = (fh[:, 2:] - 2 * fh[:, 1:-1] + fh[:, :-2]) / h ** 2
        d1[:, 1:-1] = (fh[:, 2:] - fh[:, :-2]) / (2 * h)
        hf = -(d2 - d1) + (state.u.xi[:, None] ** 2
                           * np.exp(2 * GRID.t)[None, :] - 0.25) * fh
        dxi = 2 * math.pi / L
        quad = dxi * np.sum((hf * np.conj(fh)).real * GRID.mu_weights[None, :])
        direct = state.v.norm() ** 2 + quad
        assert abs(spectral - direct) / spectral <= 1e-3

    def test_potential_term_vanishes_for_zero_u(self):
        gx = np.cos(2 * np.pi * 2 * X / L) * np.exp(-X ** 2 / 6)
        g = HnFunction(np.outer(gx, np.exp(-3.0 * (GRID.t + 0.2) ** 2)), L, GRID)
        state = WaveState(HnFunction.zeros(L, NX, GRID), g, 0.0)
        assert wave_energy(state) == pytest.approx(g.norm() ** 2, rel=1e-12)


class TestSphericalMeanN3:
    def test_constant_function(self):
        one = lambda x1, x2, y: np.ones_like(np.asarray(y, float))
        for t in (0.5, 1.0, 2.0):
            v = wave_spherical_mean_n3(one, (0.0, 0.0, 1.0), t)
            assert abs(v - math.cosh(t)) / math.cosh(t) <= 1e-6

    def test_zero_function(self):
        zero = lambda x1, x2, y: np.zeros_like(np.asarray(y, float))
        assert wave_spherical_mean_n3(zero, (0.5, -0.2, 2.0), 1.0) == 0.0

    def test_argument_errors(self):
        one = lambda x1, x2, y: np.ones_like(np.asarray(y, float))
        with pytest.raises(ValueError):
            wave_spherical_mean_n3(one, (0.0, 0.0, 1.0), 0.0)
        with pytest.raises(ValueError):
            wave_spherical_mean_n3(one, (0.0, 0.0, -1.0), 1.0)

    def test_against_exact_radial_solution(self):
        profile = lambda r: np.exp(-2.0 * np.asarray(r, float) ** 2)

        def f(x1, x2, y):
            x1 = np.asarray(x1, float)
            x2 = np.asarray(x2, float)
            y = np.asarray(y, float)
            gap = x1 ** 2 + x2 ** 2 + (y - 1.0) ** 2
            return profile(np.arccosh(1.0 + gap / (2.0 * y)))

        probes = [(0.0, 0.0, 1.0), (0.3, 0.0, 1.1), (0.0, -0.5, 0.8)]
        for z in probes:
            r = h3_distance(z, (0.0, 0.0, 1.0))
            for t in (0.5, 1.0, 1.5):
                mean = wave_spherical_mean_n3(f, z, t)
                exact = radial_wave_n3(profile, r, t)
                assert abs(mean - exact) <= 1e-2 * max(abs(exact), 1e-3)

    def test_small_time_taylor(self):
        profile = lambda r: np.exp(-2.0 * np.asarray(r, float) ** 2)

        def f(x1, x2, y):
            x1 = np.asarray(x1, float)
            x2 = np.asarray(x2, float)
            y = np.asarray(y, float)
            gap = x1 ** 2 + x2 ** 2 + (y - 1.0) ** 2
            return profile(np.arccosh(1.0 + gap / (2.0 * y)))

        z = (0.3, 0.0, 1.1)
        f0 = float(f(*z))
        v1 = wave_spherical_mean_n3(f, z, 0.05)
        v2 = wave_spherical_mean_n3(f, z, 0.1)
        ratio = (v2 - f0) / (v1 - f0)
        assert 3.5 <= ratio <= 4.5

    def test_radial_oracle_center_limit(self):
        profile = lambda r: np.exp(-2.0 * np.asarray(r, float) ** 2)
        for t in (0.5, 1.0):
            exact = math.cosh(t) * math.exp(-2 * t * t) \
                + math.sinh(t) * (-4 * t * math.exp(-2 * t * t))
            assert radial_wave_n3(profile, 0.0, t) == pytest.approx(exact, rel=1e-6)
        vals = radial_wave_n3(profile, np.array([0.0, 0.5, 1.0]), 0.7)
        assert vals.shape == (3,)

    def test_h3_distance(self):
        assert h3_distance((0, 0, 1), (0, 0, 1)) == 0.0
        a, b = (0.2, -0.1, 0.7), (1.0, 0.4, 2.2)
        assert h3_distance(a, b) == pytest.approx(h3_distance(b, a), rel=1e-15)
        assert h3_distance((0, 0, 1), (0, 0, math.e)) == pytest.approx(1.0, rel=1e-12)
        with pytest.raises(ValueError):
            h3_distance((0, 0, 0.0), (0, 0, 1))


class TestKernelIdentity:
    def test_random_bumps_three_times(self):
        rng = np.random.default_rng(7)
        frames = {0.5: (0.3, 3.2), 1.0: (0.18, 2.0), 2.0: (0.07, 0.75)}
        for t, (a0, b0) in frames.items():
            frame = (a0 * 0.85, b0 * 1.15)
            for _ in range(5):
                a = a0 * (1.0 + 0.08 * rng.uniform(-1, 1))
                b = b0 * (1.0 + 0.08 * rng.uniform(-1, 1))
                steep = 0.8 + 1.4 * rng.uniform()
                psi = lambda y, a=a, b=b, s=steep: cbump(y, a, b, s)
                assert kernel_identity_check(psi, t, support=frame) <= 1e-3

    def test_support_case_both_sides_vanish(self):
        psi = lambda y: cbump(y, 1.5, 4.0)
        for t in (0.5, 1.0, 2.0):
            r = kernel_identity_check(psi, t, support=(1.5, 4.0),
                                      relative=False)
            assert r <= 1e-6

    def test_two_parametrizations_agree(self):
        psi = lambda y: cbump(y, 0.3, 3.2)
        rs = kernel_identity_check(psi, 1.0, support=(0.26, 3.7), form="s")
        rt = kernel_identity_check(psi, 1.0, support=(0.26, 3.7), form="t")
        assert abs(rs - rt) <= 1e-12

    def test_cutoff_doubling_stability(self):
        psi = lambda y: cbump(y, 0.3, 3.2)
        r1 = kernel_identity_check(psi, 0.5, support=(0.26, 3.7))
        r2 = kernel_identity_check(psi, 0.5, support=(0.26, 3.7),
                                   k_max=160.0, n_k=8192)
        assert r1 <= 1e-3 and r2 <= 1e-3
        assert abs(r1 - r2) <= 1e-5

    def test_argument_errors(self):
        psi = lambda y: cbump(y, 0.5, 2.0)
        with pytest.raises(ValueError):
            kernel_identity_check(psi, 1.0, form="q")
        with pytest.raises(ValueError):
            kernel_identity_check(psi, 1.0, support=(2.0, 1.0))


class TestAsymptoticProfile:
    def test_deviation_decreases_dyadically(self):
        fn = standard_fn()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            img = radon_spectral(fn)
            devs = [asymptotic_profile_check(fn, t, image=img)
                    for t in (2.0, 4.0, 8.0)]
        assert devs[0] > devs[1] > devs[2]
        assert devs[2] <= 0.05

    def test_zero_input(self):
        fn = HnFunction.zeros(L, NX, GRID)
        assert asymptotic_profile_check(fn, 2.0) == 0.0

    def test_trace_off_grid_rejected(self):
        grid = RadialGrid(1e-2, 1e2, 64)
        fn = HnFunction(np.ones((16, 64)) * np.exp(-grid.t ** 2)[None, :],
                        8.0, grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(ValueError):
                asymptotic_profile_check(fn, 30.0)


class TestSerialization:
    def test_radon_csv_format(self, tmp_path, radon_pair):
        _, img, _ = radon_pair
        path = tmp_path / "image.csv"
        radon_to_csv(img, path)
        text = path.read_text(encoding="utf-8")
        assert "\r" not in text
        lines = text.splitlines()
        assert lines[0] == "s,x,value"
        assert len(lines) == 1 + img.s.size * img.nx
        first = lines[1].split(",")
        assert float(first[0]) == pytest.approx(img.s[0])
        assert float(first[1]) == pytest.approx(img.x[0])
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        back = data[:, 2].reshape(img.s.size, img.nx)
        assert np.allclose(back, img.values, rtol=1e-11, atol=1e-300)

    def test_radon_csv_rejects_complex(self):
        img = RadonImage(np.array([0.0, 1.0]),
                         np.full((2, 4), 1.0 + 1.0j), 8.0)
        with pytest.raises(ValueError):
            radon_to_csv(img, "/dev/null")

    def test_wave_csv_format(self, tmp_path, wave_batch):
        _, _, states = wave_batch
        path = tmp_path / "trace.csv"
        wave_states_to_csv(states, path, y=1.0)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,x,value"
        assert len(lines) == 1 + 3 * NX
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert set(np.unique(data[:, 0])) == {0.0, 2.5, 5.0}
        j = int(np.argmin(np.abs(GRID.y - 1.0)))
        assert np.allclose(data[:NX, 2], states[0].u.values[:, j], rtol=1e-11)

    def test_wave_csv_needs_states(self):
        with pytest.raises(ValueError):
            wave_states_to_csv([], "/dev/null")

    def test_metadata_json(self, tmp_path, radon_pair):
        _, img, _ = radon_pair
        path = tmp_path / "meta.json"
        write_metadata_json(img.metadata(), path)
        meta = json.loads(path.read_text(encoding="utf-8"))
        assert meta == img.metadata()


class TestJ1OverW:
    def test_series_matches_bessel(self):
        from hyperspec.special_functions import bessel_J
        w = np.linspace(0.05, 2.0, 40)
        exact = bessel_J(1, w) / w
        assert np.max(np.abs(_j1_over_w(w) - exact)) <= 1e-12

    def test_value_at_zero(self):
        assert _j1_over_w(np.array([0.0]))[0] == 0.5
