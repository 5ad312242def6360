"""Horospherical Radon transform and the wave group on the hyperbolic plane.

Two independent routes compute the same Radon image: a spectral route,
synthesizing a 1D Fourier integral in the spectral variable from the
product-grid transform, and an explicit route evaluating a boundary trace
plus a J1 kernel integral over the horodisc.  The wave group acts by
cos / sin spectral multipliers, with the x-mean riding the Mellin zero
mode.  An n = 3 spherical-mean evaluator cross-checks the propagator
pointwise, and the oscillatory kernel identity behind the explicit
formula is checkable by weak pairing against test functions.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .special_functions import bessel_J, gamma_phase, unitary_kernel_table
from .kl_transform import (
    HnFunction,
    RadialGrid,
    ZeroModePair,
    _cell_weights,
    _hn_tables_for,
    _phase_matrix,
    _quintic_weights,
    _trap_weights,
    default_spectral_grid,
    zero_mode_forward,
    zero_mode_inverse,
    zero_mode_spectral_grid,
)

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


@dataclass
class RadonImage:
    """Samples (R_0 f)(s_m, x_l) on an s-grid times the periodic x-lattice."""

    s: np.ndarray
    values: np.ndarray
    length: float

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.asarray(self.values)
        if self.s.ndim != 1 or np.any(np.diff(self.s) <= 0.0):
            raise ValueError("s grid must be strictly increasing")
        if self.values.shape[0] != self.s.size or self.values.ndim != 2:
            raise ValueError("values must have shape (len(s), n_x)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.length <= 0.0:
            raise ValueError("period length must be positive")

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + (self.length / self.nx) * np.arange(self.nx)

    def norm(self) -> float:
        dx = self.length / self.nx
        ws = _trap_weights(self.s)
        total = dx * np.sum(ws[:, None] * np.abs(self.values) ** 2)
        return math.sqrt(float(total.real))

    def metadata(self) -> dict:
        return {
            "n": 2,
            "s_min": float(self.s[0]),
            "s_max": float(self.s[-1]),
            "s_count": int(self.s.size),
            "length": float(self.length),
            "nx": int(self.nx),
        }


@dataclass
class WaveState:
    """Snapshot (u, du/dt) of the wave on the product grid at time t."""

    u: HnFunction
    v: HnFunction
    t: float

    def __post_init__(self):
        if (self.u.nx != self.v.nx or self.u.length != self.v.length
                or self.u.grid.signature() != self.v.grid.signature()):
            raise ValueError("u and v must live on the same product grid")

    def metadata(self) -> dict:
        g = self.u.grid
        return {
            "n": g.n,
            "y_min": g.y_min,
            "y_max": g.y_max,
            "count": g.count,
            "length": float(self.u.length),
            "nx": int(self.u.nx),
            "t": float(self.t),
        }


# ---------------------------------------------------------------------------
# smooth kernel pieces
# ---------------------------------------------------------------------------


def _j1_over_w(w):
    """J_1(w)/w with the even-series limit 1/2 - w^2/16 + ... near w = 0."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    small = w < 0.5
    ws = w[small]
    x = 0.25 * ws * ws
    term = np.full_like(ws, 0.5)
    acc = term.copy()
    for m in range(1, 8):
        term = term * (-x) / (m * (m + 1))
        acc = acc + term
    out[small] = acc
    wl = w[~small]
    out[~small] = bessel_J(1, wl) / wl
    return out


def default_radon_sgrid(grid: RadialGrid) -> np.ndarray:
    # e^{-s} then lands exactly on the radial lattice
    return -grid.t[::-1]


def default_radon_kgrid(count: int = 1024, k_max: float = 40.0) -> np.ndarray:
    return zero_mode_spectral_grid(count, k_max)


# ---------------------------------------------------------------------------
# Radon transform, spectral route
# ---------------------------------------------------------------------------


def radon_spectral(fn: HnFunction, sgrid=None, kgrid=None) -> RadonImage:
    """Radon image through the spectral representation.

    Per lattice mode xi != 0 the s-Fourier transform of the image is
    (-i sgn k/sqrt2) e^{i sgn(k) arg Gamma(1+i|k|)} (|xi|/2)^{-ik} c(|k|)
    with c the transform coefficients of fhat(xi, .); the xi = 0 column
    is dropped (it belongs to the zero mode, measure zero in the
    continuum), so isometry statements assume mean-free input in x.
    """
    sgrid = default_radon_sgrid(fn.grid) if sgrid is None else np.asarray(sgrid, float)
    kgrid = default_radon_kgrid() if kgrid is None else np.asarray(kgrid, float)
    if np.any(kgrid <= 0.0):
        raise ValueError("k grid must be positive")
    tables = _hn_tables_for(fn.grid, kgrid, fn.length, fn.nx)
    G = tables.forward_raw(fn)
    phase = _phase_matrix(tables, fn.nx, 1)
    g_pos = (-1j / _SQRT2) * phase * G
    g_neg = (1j / _SQRT2) * np.conj(phase) * G
    wk = _cell_weights(kgrid)
    E = np.exp(1j * np.outer(sgrid, kgrid)) * wk[None, :]
    modes = _INV_SQRT_2PI * (E @ g_pos + np.conj(E) @ g_neg)
    modes[:, 0] = 0.0
    nx = fn.nx
    xi = 2.0 * math.pi * np.fft.fftfreq(nx, d=fn.length / nx)
    sync = np.exp(-1j * xi * (0.5 * fn.length))
    values = np.fft.ifft(sync[None, :] * modes, axis=1) * (
        math.sqrt(2.0 * math.pi) / (fn.length / nx))
    if np.isrealobj(fn.values):
        values = values.real
    return RadonImage(sgrid, values, fn.length)


# ---------------------------------------------------------------------------
# Radon transform, explicit route
# ---------------------------------------------------------------------------


def radon_explicit(fn: HnFunction, sgrid=None) -> RadonImage:
    """Radon image from the boundary-trace formula.

    R_0 f(s, x) = 2^{-1/2} e^{(n-1)s/2} f(x, e^{-s})
                - 2^{-1/2} e^{-s} int_0^{e^{-s}} y^{-(n-1)/2} (A f)(x, y) dy,
    with the mode multiplier A = (|xi|^2/2) J_1(w)/w at
    w = |xi| sqrt(e^{-s} y - y^2).  The 2^{-1/2} prefactor is pinned by
    the isometry normalization of the spectral route (both routes must
    produce the same image).  Only s values with e^{-s} on the radial
    lattice are supported; the default grid satisfies this.
    """
    grid = fn.grid
    sgrid = default_radon_sgrid(grid) if sgrid is None else np.asarray(sgrid, float)
    y = grid.y
    cap_idx = np.searchsorted(grid.t, -sgrid - 0.5 * grid.dt)
    if np.any(np.abs(grid.t[np.clip(cap_idx, 0, grid.count - 1)] + sgrid) > 1e-9):
        raise ValueError("each e^{-s} must land on a radial lattice node")
    fhat = fn.x_fft()
    nx = fn.nx
    p = (grid.n - 1) / 2.0
    xi_abs = 2.0 * math.pi / fn.length * np.arange(1, nx // 2 + 1)
    scale = np.max(np.abs(fhat))
    h = grid.dt
    # boundary trace, all modes including xi = 0
    modes = _INV_SQRT2 * np.exp(p * sgrid)[:, None] * fhat[:, cap_idx].T
    pref = _INV_SQRT2 * np.exp(-sgrid)
    for q in range(1, nx // 2 + 1):
        rows = (q, nx - q) if q < nx // 2 else (nx // 2,)
        live = np.zeros(grid.count, dtype=bool)
        for r in rows:
            live |= np.abs(fhat[r]) > 1e-14 * scale
        hits = np.nonzero(live)[0]
        if hits.size == 0:
            continue
        lo_j = max(int(hits[0]) - 2, 0)
        hi_j = min(int(hits[-1]) + 2, grid.count - 1)
        xi = xi_abs[q - 1]
        msel = np.nonzero(cap_idx >= lo_j + 2)[0]
        for c0 in range(0, msel.size, 256):
            block = msel[c0:c0 + 256]
            j_m = cap_idx[block]
            jj = np.minimum(j_m, hi_j)
            cols = np.arange(lo_j, int(jj.max()) + 1)
            yw = y[cols]
            caps = y[j_m]
            w = xi * np.sqrt(np.maximum(yw[None, :] * (caps[:, None] - yw[None, :]), 0.0))
            # integrand in tau = log y, including the Jacobian y
            base = (yw ** (1.0 - p))[None, :] * ((0.5 * xi * xi) * _j1_over_w(w))
            wts = np.where(cols[None, :] < jj[:, None], h, 0.0)
            wts[cols[None, :] == jj[:, None]] = 0.5 * h
            inner = jj - lo_j
            ends = (np.arange(block.size), inner)
            for r in rows:
                gmat = base * fhat[r, cols][None, :]
                total = np.sum(wts * gmat, axis=1)
                # Euler-Maclaurin endpoint correction where the cap cuts
                # the integrand inside the support window
                em = j_m == jj
                g0 = gmat[ends]
                g1 = gmat[ends[0], inner - 1]
                g2 = gmat[ends[0], inner - 2]
                slope = (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h)
                total[em] -= (h * h / 12.0) * slope[em]
                modes[block, r] -= pref[block] * total
    xi_signed = 2.0 * math.pi * np.fft.fftfreq(nx, d=fn.length / nx)
    sync = np.exp(-1j * xi_signed * (0.5 * fn.length))
    values = np.fft.ifft(sync[None, :] * modes, axis=1) * (
        math.sqrt(2.0 * math.pi) / (fn.length / nx))
    if np.isrealobj(fn.values):
        values = values.real
    return RadonImage(sgrid, values, fn.length)


# ---------------------------------------------------------------------------
# wave propagation
# ---------------------------------------------------------------------------


def _zero_pair(column, grid) -> ZeroModePair:
    return zero_mode_forward(column, grid)


def _check_truncation(f: HnFunction, g, t_max: float) -> None:
    mags = np.max(np.abs(f.values), axis=0)
    if g is not None:
        mags = np.maximum(mags, np.max(np.abs(g.values), axis=0))
    top = np.max(mags)
    if top == 0.0:
        return
    live = np.nonzero(mags > 1e-12 * top)[0]
    t = f.grid.t
    lo = t[live[0]] - t_max
    hi = t[live[-1]] + t_max
    if lo < t[0] + 2 * f.grid.dt or hi > t[-1] - 2 * f.grid.dt:
        warnings.warn(
            "initial support propagated at unit log-speed reaches the "
            "radial grid boundary; expect truncation artifacts",
            stacklevel=3)


def wave_propagate_many(f: HnFunction, g, ts, kgrid=None) -> list:
    """States of the wave with u(0) = f, du/dt(0) = g at each time in ts.

    g may be None for the pure cosine branch.  The evolution acts as
    cos(kt) and sin(kt)/k multipliers on the spectral side; t = 0 returns
    the data exactly.
    """
    kgrid = default_spectral_grid() if kgrid is None else np.asarray(kgrid, float)
    ts = [float(t) for t in np.atleast_1d(ts)]
    grid = f.grid
    if g is not None and (g.nx != f.nx or g.grid.signature() != grid.signature()):
        raise ValueError("f and g must live on the same product grid")
    _check_truncation(f, g, max(abs(t) for t in ts) if ts else 0.0)
    tables = _hn_tables_for(grid, kgrid, f.length, f.nx)
    Gf = tables.forward_raw(f)
    zf = _zero_pair(f.x_fft()[0], grid)
    if g is not None:
        Gg = tables.forward_raw(g)
        zg = _zero_pair(g.x_fft()[0], grid)
    real_in = np.isrealobj(f.values) and (g is None or np.isrealobj(g.values))
    k = kgrid[:, None]
    kz = zf.k
    states = []
    for t in ts:
        if t == 0.0:
            u = f.with_values(f.values.copy())
            v = (g.with_values(g.values.copy()) if g is not None
                 else f.with_values(np.zeros_like(f.values)))
            states.append(WaveState(u, v, 0.0))
            continue
        ck = np.cos(k * t)
        Gu = ck * Gf
        Gv = (-k * np.sin(k * t)) * Gf
        czp = np.cos(kz * t)
        up = czp * zf.plus
        um = czp * zf.minus
        vp = -kz * np.sin(kz * t) * zf.plus
        vm = -kz * np.sin(kz * t) * zf.minus
        if g is not None:
            sk = np.sin(k * t) / k
            Gu = Gu + sk * Gg
            Gv = Gv + ck * Gg
            szp = np.sin(kz * t) / kz
            up = up + szp * zg.plus
            um = um + szp * zg.minus
            vp = vp + czp * zg.plus
            vm = vm + czp * zg.minus
        u = tables.adjoint_raw(Gu, f)
        v = tables.adjoint_raw(Gv, f)
        mean_fix = math.sqrt(2.0 * math.pi) / f.length
        u_vals = u.values + mean_fix * zero_mode_inverse(
            ZeroModePair(kz, up, um), grid)[None, :]
        v_vals = v.values + mean_fix * zero_mode_inverse(
            ZeroModePair(kz, vp, vm), grid)[None, :]
        if real_in:
            u_vals = u_vals.real
            v_vals = v_vals.real
        states.append(WaveState(f.with_values(u_vals), f.with_values(v_vals),
                                t))
    return states


def wave_propagate(f: HnFunction, g, t: float, kgrid=None) -> WaveState:
    """Single-time wrapper around wave_propagate_many."""
    return wave_propagate_many(f, g, [t], kgrid)[0]


def wave_energy(state: WaveState, kgrid=None) -> float:
    """E = ||du/dt||^2 + (H_0 u, u), the second term spectrally."""
    kgrid = default_spectral_grid() if kgrid is None else np.asarray(kgrid, float)
    fn = state.u
    tables = _hn_tables_for(fn.grid, kgrid, fn.length, fn.nx)
    G = tables.forward_raw(fn)
    wk = _trap_weights(kgrid)
    dxi = 2.0 * math.pi / fn.length
    hu = dxi * float(np.sum((kgrid ** 2 * wk)[:, None] * np.abs(G) ** 2))
    pair = _zero_pair(fn.x_fft()[0], fn.grid)
    wz = _cell_weights(pair.k)
    hz = dxi * float(np.sum(pair.k ** 2 * wz
                            * (np.abs(pair.plus) ** 2 + np.abs(pair.minus) ** 2)))
    return state.v.norm() ** 2 + hu + hz


# ---------------------------------------------------------------------------
# n = 3 spherical means
# ---------------------------------------------------------------------------


def radial_wave_n3(profile, r, t: float):
    """Cosine-branch value at geodesic distance r from the center of radial
    data in three dimensions.

    With w(rho) = sinh(rho) profile(|rho|) extended oddly, the shifted wave
    equation becomes the flat string equation for w, so the value is
    (w(r+t) + w(r-t)) / (2 sinh r), and the r -> 0 limit is w'(t).
    """
    def w0(rho):
        return np.sinh(rho) * profile(np.abs(rho))

    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    tiny = r < 1e-6
    if np.any(tiny):
        h = 1e-4
        out[tiny] = (w0(t + h) - w0(t - h)) / (2.0 * h)
    big = ~tiny
    out[big] = (w0(r[big] + t) + w0(r[big] - t)) / (2.0 * np.sinh(r[big]))
    return float(out[0]) if scalar else out


def wave_spherical_mean_n3(f, z, t: float, n_polar: int = 48,
                           n_azimuth: int = 96, step: float = 1e-2) -> float:
    """Cosine-branch value at z by the method of spherical means (n = 3).

    Computes d/dt of (4 pi sinh t)^{-1} times the integral of f over the
    geodesic sphere S(z, t); f must be callable as f(x1, x2, y) on arrays.
    The geodesic sphere of radius t about (x0, y0) is the Euclidean sphere
    with center (x0, y0 cosh t) and radius y0 sinh t, carrying the measure
    (y0 sinh t)^2 d(omega) / p_y^2.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    x1, x2, y0 = (float(c) for c in z)
    if y0 <= 0.0:
        raise ValueError("the center must satisfy y > 0")
    u_nodes, u_weights = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    dphi = 2.0 * math.pi / n_azimuth
    sin_th = np.sqrt(np.maximum(1.0 - u_nodes ** 2, 0.0))
    cx = np.cos(phi)[None, :] * sin_th[:, None]
    cy = np.sin(phi)[None, :] * sin_th[:, None]
    cz = np.broadcast_to(u_nodes[:, None], cx.shape)

    def mean(tau):
        rho = y0 * math.sinh(tau)
        py = y0 * math.cosh(tau) + rho * cz
        vals = f(x1 + rho * cx, x2 + rho * cy, py)
        integ = np.sum(u_weights[:, None] * vals / py ** 2) * dphi
        return (y0 ** 2 * math.sinh(tau) / (4.0 * math.pi)) * integ

    h = min(step, 0.25 * t)
    d1 = (mean(t + h) - mean(t - h)) / (2.0 * h)
    d2 = (mean(t + 2 * h) - mean(t - 2 * h)) / (4.0 * h)
    return float((4.0 * d1 - d2) / 3.0)


def h3_distance(p, q) -> float:
    """Hyperbolic distance in the upper half space model of H^3."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p[2] <= 0.0 or q[2] <= 0.0:
        raise ValueError("points must have y > 0")
    gap = np.sum((p - q) ** 2)
    return float(np.arccosh(1.0 + gap / (2.0 * p[2] * q[2])))


# ---------------------------------------------------------------------------
# oscillatory kernel identity
# ---------------------------------------------------------------------------


def _smooth_cutoff(k, k_max: float):
    # C-infinity taper: 1 below k_max/2, 0 above k_max
    u = (np.asarray(k, dtype=float) - 0.5 * k_max) / (0.5 * k_max)
    u = np.clip(u, 0.0, 1.0)
    fa = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    fb = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return fb / (fa + fb)


def _weak_rhs(cap: float, psi, support, n_y: int) -> float:
    # point evaluation at the tangency plus the horodisc integral,
    # normalized as in the t-form; the s-form is twice this.  The
    # 1/2 relative to the raw trace value keeps the identity consistent
    # with the unitary transform normalization on the left side.
    out = 0.5 * cap * float(np.asarray(psi(np.array([cap])))[0])
    lo, hi = support
    b = min(hi, cap)
    if b > lo:
        yq = np.linspace(lo, b, n_y)
        w = np.sqrt(np.maximum(yq * (cap - yq), 0.0))
        integ = yq * _j1_over_w(w) * psi(yq)
        out -= 0.25 * cap * np.trapezoid(integ, yq)
    return out


_ki_tables: dict = {}


def _ki_table(lo: float, hi: float, n_k: int, n_y: int, k_max: float):
    key = (lo, hi, n_k, n_y, k_max)
    if key not in _ki_tables:
        while len(_ki_tables) >= 2:
            _ki_tables.pop(next(iter(_ki_tables)))
        hk = k_max / n_k
        kq = hk * (np.arange(n_k) + 0.5)
        yq = np.linspace(lo, hi, n_y)
        _ki_tables[key] = (kq, yq, unitary_kernel_table(kq, np.log(yq)))
    return _ki_tables[key]


def kernel_identity_check(psi, t: float, support=(1e-3, 12.0),
                          k_max: float = 80.0, n_k: int = 4096,
                          n_y: int = 4000, form: str = "t",
                          relative: bool = True) -> float:
    """Residual of the oscillatory kernel identity paired against psi.

    The left side is the k-integral of the gamma-weighted kernel, with
    the exponential growth of 1/Gamma(1-ik) cancelled in closed form
    against the kernel decay, leaving a bounded oscillatory integrand
    under a smooth cutoff at k_max.  The right side is a point
    evaluation at the horosphere tangency plus a J1 integral.  The two
    parametrizations ("t" and the shifted "s") carry the same content
    and must give the same residual.
    """
    if form not in ("t", "s"):
        raise ValueError("form must be 't' or 's'")
    lo, hi = (float(support[0]), float(support[1]))
    if not (0.0 < lo < hi):
        raise ValueError("support must satisfy 0 < lo < hi")
    hk = k_max / n_k
    kq, yq, B = _ki_table(lo, hi, n_k, n_y, k_max)
    wy = _trap_weights(yq)
    S = B @ (psi(yq) * wy)
    theta = gamma_phase(kq)
    chi = _smooth_cutoff(kq, k_max)
    if form == "t":
        lhs = _INV_SQRT_2PI * float(np.sum(
            np.sin(kq * t + theta) * S * chi) * hk)
        rhs = _weak_rhs(2.0 * math.exp(-t), psi, (lo, hi), n_y)
    else:
        s = t - math.log(2.0)
        osc = np.exp(1j * kq * s) * np.exp(1j * kq * math.log(2.0)) \
            * (-1j) * np.exp(1j * theta)
        lhs = (math.sqrt(math.pi / 2.0) / math.pi) * float(
            np.sum(2.0 * np.real(osc) * S * chi) * hk)
        rhs = 2.0 * _weak_rhs(math.exp(-s), psi, (lo, hi), n_y)
    if relative:
        # scale by the larger side; degenerate pairings (both sides near
        # zero) should be checked with relative=False instead
        return abs(lhs - rhs) / max(abs(rhs), abs(lhs), 1e-300)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# asymptotic profile
# ---------------------------------------------------------------------------


def asymptotic_profile_check(fn: HnFunction, t: float, image=None,
                             kgrid=None) -> float:
    """L^2 deviation between the rescaled wave trace and the Radon image.

    The cosine-branch wave at time t, traced along y = e^{-s-t} and
    rescaled by sqrt2 e^{(n-1)(s+t)/2}, converges to (R_0 f)(s, x); the
    return value is the relative L^2 distance over the s-window where the
    trace stays on the grid.  Returns 0 for vanishing input.
    """
    if image is None:
        image = radon_spectral(fn, kgrid=kgrid)
    state = wave_propagate(fn, None, t, kgrid=kgrid)
    u = state.u.values
    tau = fn.grid.t
    dt_ = fn.grid.dt
    pos = (-image.s - t - tau[0]) / dt_
    base = np.floor(pos).astype(int) - 2
    valid = (base >= 0) & (base + 5 <= tau.size - 1)
    if not np.any(valid):
        raise ValueError("the trace y = e^{-s-t} misses the radial grid")
    w = _quintic_weights(pos[valid] - np.floor(pos[valid]))
    idx = base[valid][:, None] + np.arange(6)
    gathered = u[:, idx]
    trace = np.einsum("xma,ma->mx", gathered, w)
    prof = _SQRT2 * np.exp(0.5 * (image.s[valid] + t))[:, None] * trace
    ref = image.values[valid]
    den = math.sqrt(float(np.sum(np.abs(ref) ** 2)))
    num = math.sqrt(float(np.sum(np.abs(prof - ref) ** 2)))
    if den < 1e-300:
        return 0.0 if num < 1e-300 else math.inf
    return num / den


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def radon_to_csv(image: RadonImage, path) -> None:
    """Rows (s, x, value), %.12e columns, LF endings, header row."""
    vals = image.values
    if np.iscomplexobj(vals):
        top = np.max(np.abs(vals)) if vals.size else 0.0
        if np.max(np.abs(vals.imag)) > 1e-9 * max(top, 1e-300):
            raise ValueError("image has a significant imaginary part")
        vals = vals.real
    ns, nx = vals.shape
    table = np.column_stack([
        np.repeat(image.s, nx),
        np.tile(image.x, ns),
        vals.ravel(),
    ])
    np.savetxt(path, table, fmt="%.12e", delimiter=",",
               header="s,x,value", comments="", newline="\n")


def wave_states_to_csv(states, path, y: float = 1.0) -> None:
    """Rows (t, x, u(x, y_probe)) across the given states at one height."""
    states = list(states)
    if not states:
        raise ValueError("need at least one state")
    grid = states[0].u.grid
    j = int(np.argmin(np.abs(grid.y - y)))
    rows = []
    for st in states:
        vals = st.u.values[:, j]
        if np.iscomplexobj(vals):
            vals = vals.real
        x = st.u.x
        rows.append(np.column_stack([np.full(x.size, st.t), x, vals]))
    np.savetxt(path, np.vstack(rows), fmt="%.12e", delimiter=",",
               header="t,x,value", comments="", newline="\n")


def write_metadata_json(meta: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
