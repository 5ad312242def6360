"""Bessel and Gamma machinery for the transform kernels.

Provides I_nu, K_nu (including purely imaginary order), J_0, J_1, complex
Gamma, and a numerically stable evaluator for the unitary transform kernel

    B(k, z) = sqrt(2 k sinh(pi k)) / pi * K_{ik}(z).

Every kernel has two independent evaluation routes (power series vs
cosh-integral quadrature) so they can cross-check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _ddouble as _dd

_LN2 = math.log(2.0)
_SQRT_2_PI = math.sqrt(2.0 / math.pi)


def _sinpi(x: float) -> float:
    """sin(pi x) with exact argument reduction at the integers."""
    n = round(x)
    r = x - n  # exact for |r| <= 0.5
    s = math.sin(math.pi * r)
    return -s if n % 2 else s


def _cospi(x: float) -> float:
    n = round(x)
    r = x - n
    c = math.cos(math.pi * r)
    return -c if n % 2 else c


def _sinpi_complex(s: complex) -> complex:
    # sin(pi(a+ib)) = sin(pi a) cosh(pi b) + i cos(pi a) sinh(pi b)
    a, b = s.real, s.imag
    if b == 0.0:
        return complex(_sinpi(a), 0.0)
    return complex(
        _sinpi(a) * math.cosh(math.pi * b),
        _cospi(a) * math.sinh(math.pi * b),
    )

# ---------------------------------------------------------------------------
# complex Gamma
# ---------------------------------------------------------------------------

# Lanczos approximation, g = 7
_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


class GammaPoleError(ValueError):
    """Gamma evaluated at a nonpositive integer -n; carries the residue."""

    def __init__(self, n: int):
        self.pole = -n
        self.residue = (-1.0) ** n / math.factorial(n)
        super().__init__(
            "Gamma pole at s=%d (residue %.6e)" % (-n, self.residue)
        )


def _lanczos(z: complex) -> complex:
    # valid for Re z >= 0.5
    z = z - 1.0
    x = _LANCZOS_C[0]
    for i in range(1, 9):
        x += _LANCZOS_C[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * np.exp(-t) * x


def gamma_complex(s: complex) -> complex:
    """Gamma function for complex argument (Lanczos, reflection for Re s < 1/2).

    Raises GammaPoleError at nonpositive integers; the error carries the
    residue (-1)^n / n! of the pole at s = -n.
    """
    s = complex(s)
    if abs(s.imag) < 1e-13:
        r = round(s.real)
        if r <= 0 and abs(s.real - r) < 1e-13:
            raise GammaPoleError(int(-r))
    if s.real >= 0.5:
        out = _lanczos(s)
    else:
        # Gamma(s) Gamma(1-s) = pi / sin(pi s)
        out = math.pi / (_sinpi_complex(s) * _lanczos(1.0 - s))
    if abs(s.imag) < 1e-300:
        out = complex(out.real, 0.0)
    return complex(out)


def loggamma_complex(s: complex) -> complex:
    """Principal log-Gamma for Re s >= 0.4 (enough for orders 1 +- ik).

    The imaginary part is continuous along vertical lines in this half
    plane, which is what the kernel phases need.
    """
    s = complex(s)
    if s.real < 0.4:
        raise ValueError("loggamma_complex requires Re s >= 0.4")
    z = s - 1.0
    x = _LANCZOS_C[0]
    for i in range(1, 9):
        x += _LANCZOS_C[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return (
        0.5 * math.log(2.0 * math.pi)
        + (z + 0.5) * np.log(t)
        - t
        + np.log(x)
    )


def gamma_phase(k):
    """arg Gamma(1 + ik) for a real array k, continuous in k."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.empty_like(k)
    for i, kv in enumerate(k):
        out[i] = loggamma_complex(1.0 + 1j * kv).imag
    return out


@dataclass(frozen=True)
class SpectralParameter:
    """Radial frequency zeta, Bessel order nu, and spectral variable k.

    On the continuous spectrum nu = +-ik with k real; zeta is |xi| or
    sqrt(lambda_m) and must be nonnegative.
    """

    zeta: float
    nu: complex
    k: float = 0.0

    def __post_init__(self):
        if not (self.zeta >= 0.0):
            raise ValueError("zeta must be nonnegative")

    @classmethod
    def continuous(cls, zeta: float, k: float) -> "SpectralParameter":
        """Parameter on the continuous spectrum: nu = ik."""
        return cls(zeta=float(zeta), nu=1j * float(k), k=float(k))

    @property
    def on_continuous_spectrum(self) -> bool:
        return abs(self.nu.real) < 1e-12 and abs(self.nu.imag - self.k) < 1e-12


# ---------------------------------------------------------------------------
# quadrature configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    """Node layout for the cosh-integral routes.

    nodes_per_decade sets the base trapezoid step (the integrand
    e^{-z cosh s} decays double-exponentially, where the uniform trapezoid
    rule converges at spectral rate); the step is further capped to resolve
    the cosh(nu s) / cos(ks) factor.  tail_bound fixes the truncation point
    so the dropped tail is below it relative to the integrand peak.
    """

    nodes_per_decade: int = 64
    tail_bound: float = 1e-18
    rel_tol: float = 1e-12

    def __post_init__(self):
        if self.nodes_per_decade < 16:
            raise ValueError("nodes_per_decade must be >= 16")
        if not (0.0 < self.tail_bound < 1e-6):
            raise ValueError("tail_bound out of range")

    def step(self, im_nu: float, z: float = 1.0) -> float:
        # the integrand peak has width ~ 1/sqrt(z), the oscillation period
        # 2 pi / |Im nu|; resolve whichever is finer
        return min(
            math.log(10.0) / self.nodes_per_decade,
            2.0 * math.pi / (8.0 * (abs(im_nu) + 30.0)),
            0.8 / math.sqrt(max(z, 1.0)),
        )

    def cutoff(self, z: float, re_nu: float) -> float:
        # smallest s with z(cosh s - 1) - |Re nu| s >= -log(tail_bound)
        target = -math.log(self.tail_bound)
        s = math.acosh(1.0 + target / z)
        for _ in range(4):
            s = math.acosh(1.0 + (target + abs(re_nu) * s) / z)
        return s + 0.5


_DEFAULT_CONFIG = QuadratureConfig()


# ---------------------------------------------------------------------------
# modified Bessel I
# ---------------------------------------------------------------------------


def _series_switch(nu: complex) -> float:
    return 2.0 * (1.0 + abs(nu))


def _bessel_i_series(nu: complex, z, scaled: bool):
    """Power series I_nu(z) = (z/2)^nu sum (z^2/4)^m / (m! Gamma(nu+m+1))."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    w = 0.25 * z * z
    t = np.exp(nu * np.log(z / 2.0)) / gamma_complex(nu + 1.0)
    t = t.astype(complex)
    total = t.copy()
    peak = np.abs(t)
    m = 1
    while True:
        t = t * w / (m * (nu + m))
        total += t
        peak = np.maximum(peak, np.abs(t))
        if np.all(np.abs(t) <= 1e-18 * np.maximum(peak, np.abs(total))):
            break
        m += 1
        if m > 3000:
            raise RuntimeError("I series failed to converge")
    if scaled:
        total = total * np.exp(-z)
    return total


def _bessel_i_quadrature(nu: complex, z, scaled: bool, config: QuadratureConfig):
    """I_nu(z) = (1/pi) int_0^pi e^{z cos t} cos(nu t) dt
    - sin(nu pi)/pi int_0^inf e^{-z cosh s - nu s} ds  (Re z > 0)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape, dtype=complex)
    base_n = max(400, 8 * (int(abs(nu)) + 1))
    sin_pi_nu = _sinpi_complex(nu)
    for i, zi in enumerate(z):
        # scaled first integral: e^{z(cos t - 1)}.  The integrand is not
        # pi-periodic for non-integer nu, so the trapezoid rule needs the
        # Euler-Maclaurin endpoint terms (odd derivatives vanish at 0).
        n_theta = max(base_n, int(5.0 * math.sqrt(zi))) + 1
        theta = np.linspace(0.0, math.pi, n_theta)
        ht = theta[1] - theta[0]
        f1 = np.exp(zi * (np.cos(theta) - 1.0)) * np.cos(nu * theta)
        e2z = math.exp(-2.0 * zi)
        d1 = -nu * sin_pi_nu * e2z
        d3 = nu * sin_pi_nu * (nu * nu - 3.0 * zi) * e2z
        i1 = (np.trapezoid(f1, theta)
              - ht * ht / 12.0 * d1
              + ht ** 4 / 720.0 * d3) / math.pi
        if abs(sin_pi_nu) > 0.0:
            h = config.step(nu.imag, zi)
            s_max = config.cutoff(zi, -abs(nu.real) - 1.0)
            s = np.arange(0.0, s_max, h)
            f2 = np.exp(-zi * (np.cosh(s) - 1.0) - nu * s)
            f2[0] *= 0.5
            # same correction at the s=0 endpoint
            tail = (np.sum(f2) * h
                    - h * h / 12.0 * nu
                    - h ** 4 / 720.0 * (3.0 * nu * zi - nu ** 3))
            i2 = tail * e2z * sin_pi_nu / math.pi
        else:
            i2 = 0.0
        out[i] = i1 - i2
    if not scaled:
        out = out * np.exp(z)
    return out


def bessel_I(nu: complex, z, method: str = "auto", scaled: bool = False,
             config: QuadratureConfig = _DEFAULT_CONFIG):
    """Modified Bessel function of the first kind, complex order.

    z is a positive real scalar or array.  method: "auto" switches from the
    power series to the integral representation at z = 2(1+|nu|);
    "series"/"quadrature" force a route.  scaled=True returns e^{-z} I_nu(z).
    """
    nu = complex(nu)
    if abs(nu.imag) < 1e-12:
        r = round(nu.real)
        if r < 0 and abs(nu.real - r) < 1e-13:
            nu = complex(-r)  # I_{-n} = I_n at integer order
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr <= 0.0):
        raise ValueError("bessel_I requires z > 0")
    if method == "auto":
        small = z_arr <= _series_switch(nu)
        out = np.empty(z_arr.shape, dtype=complex)
        if np.any(small):
            out[small] = _bessel_i_series(nu, z_arr[small], scaled)
        if np.any(~small):
            out[~small] = _bessel_i_quadrature(nu, z_arr[~small], scaled, config)
    elif method == "series":
        out = _bessel_i_series(nu, z_arr, scaled)
    elif method == "quadrature":
        out = _bessel_i_quadrature(nu, z_arr, scaled, config)
    else:
        raise ValueError("unknown method %r" % method)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out[0])
    return out


# ---------------------------------------------------------------------------
# modified Bessel K
# ---------------------------------------------------------------------------


def _bessel_k_series_dd(k: float, z: float) -> float:
    """Series-combination K_{ik}(z) in double-double arithmetic.

    Used when Im I_{ik}(z) sits so far below |I_{ik}(z)| that plain doubles
    cannot carry the cancellation (z substantially larger than k).  Uses
    K_{ik} = -sqrt(pi/(k sinh pi k)) Im(e^{i beta} T), with beta =
    k log(z/2) - arg Gamma(1+ik) and T the ratio series of I_{ik}.
    """
    kdd = _dd.dd(k)
    alpha = _dd.mul(kdd, _dd.log(_dd.dd(z * 0.5)))
    beta = _dd.sub(alpha, _dd.arg_gamma_1ik(k))
    sb, cb = _dd.sincos(beta)
    w = _dd.ldexp(_dd.dd(_dd.two_prod(z, z)), -2)  # z^2/4
    k2 = _dd.dd(_dd.two_prod(k, k))
    t_re, t_im = (1.0, 0.0), (0.0, 0.0)
    tot_re, tot_im = t_re, t_im
    peak = 1.0
    m = 1
    while True:
        md = float(m)
        den = _dd.add(_dd.dd(md * md * md), _dd.mul(_dd.dd(md), k2))
        f = _dd.div(w, den)  # w / (m (m^2 + k^2))
        new_re = _dd.mul(f, _dd.add(_dd.mul(_dd.dd(md), t_re),
                                    _dd.mul(kdd, t_im)))
        new_im = _dd.mul(f, _dd.sub(_dd.mul(_dd.dd(md), t_im),
                                    _dd.mul(kdd, t_re)))
        t_re, t_im = new_re, new_im
        tot_re = _dd.add(tot_re, t_re)
        tot_im = _dd.add(tot_im, t_im)
        size = abs(t_re[0]) + abs(t_im[0])
        peak = max(peak, size)
        if size < 1e-35 * peak and m > math.sqrt(abs(w[0])):
            break
        m += 1
        if m > 800:
            break
    im_part = _dd.add(_dd.mul(cb, tot_im), _dd.mul(sb, tot_re))
    pk = _dd.mul(_dd.PI, kdd)
    sinh_pk = _dd.ldexp(_dd.sub(_dd.exp(pk), _dd.exp(_dd.neg(pk))), -1)
    pref = _dd.sqrt(_dd.div(_dd.PI, _dd.mul(kdd, sinh_pk)))
    out = _dd.mul(pref, im_part)
    return -(out[0] + out[1])


def _bessel_k_series(nu: complex, z, scaled: bool):
    """K_nu = (pi/2)(I_{-nu} - I_nu) / sin(nu pi); imaginary order reduces
    to -pi Im(I_{ik}) / sinh(pi k), which is exactly real."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if abs(nu.real) < 1e-12 and abs(nu.imag) > 0:
        k = abs(nu.imag)
        i_val = _bessel_i_series(1j * k, z, scaled=False)
        # pi/sinh(pi k) in an overflow-free form
        epk = math.exp(-math.pi * k)
        pref = -2.0 * math.pi * epk / (1.0 - epk * epk)
        out = (pref * i_val.imag).astype(complex)
        # the combination cancels |Im I| / |I| digits; redo the starved
        # entries in double-double arithmetic
        starved = np.abs(i_val.imag) < 1e-4 * np.abs(i_val)
        if k <= 60.0:
            for j in np.nonzero(starved)[0]:
                out[j] = _bessel_k_series_dd(k, float(z[j]))
    else:
        sin_pi_nu = _sinpi_complex(nu)
        if abs(sin_pi_nu) < 1e-8:
            raise ValueError("series combination degenerate near integer order")
        i_minus = _bessel_i_series(-nu, z, scaled=False)
        i_plus = _bessel_i_series(nu, z, scaled=False)
        out = 0.5 * math.pi * (i_minus - i_plus) / sin_pi_nu
    if scaled:
        out = out * np.exp(z)
    return out


def _bessel_k_quadrature(nu: complex, z, scaled: bool, config: QuadratureConfig,
                         use_fsum: bool = True):
    """K_nu(z) = int_0^inf e^{-z cosh s} cosh(nu s) ds.

    For purely imaginary order the integrand is e^{-z cosh s} cos(ks),
    manifestly real; it is accumulated with math.fsum because the result
    can sit many orders below the integrand scale.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    imag_order = abs(nu.real) < 1e-12
    out = np.empty(z.shape, dtype=complex)
    for i, zi in enumerate(z):
        h = config.step(nu.imag, zi)
        s_max = config.cutoff(zi, nu.real)
        s = np.arange(0.0, s_max, h)
        damp = np.exp(-zi * (np.cosh(s) - 1.0))
        if imag_order:
            f = damp * np.cos(nu.imag * s)
            f[0] *= 0.5
            total = math.fsum(f.tolist()) * h if use_fsum else np.sum(f) * h
            out[i] = complex(total, 0.0)
        else:
            f = damp * np.cosh(nu * s)
            f[0] *= 0.5
            out[i] = np.sum(f) * h
    if not scaled:
        out = out * np.exp(-z)
    return out


def bessel_K(nu: complex, z, method: str = "auto", scaled: bool = False,
             config: QuadratureConfig = _DEFAULT_CONFIG):
    """Modified Bessel function of the second kind, complex order.

    Real z > 0 (scalar or array).  Purely imaginary order returns an exactly
    real value.  Integer order is evaluated as the two-sided limit
    nu -> n +- 1e-6 (averaged).  scaled=True returns e^{z} K_nu(z).
    """
    nu = complex(nu)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr <= 0.0):
        raise ValueError("bessel_K requires z > 0")

    near_int = (
        abs(nu.imag) < 1e-12 and abs(nu.real - round(nu.real)) < 1e-9
    )
    if near_int and method != "quadrature":
        # K_nu is even and analytic in nu at integers; average the two
        # one-sided evaluations.  The series combination divides roundoff in
        # I_{-nu} - I_nu by sin(pi nu) ~ pi eps, amplified by I_n/K_n, so it
        # is only used below z = 2 where that ratio stays small.
        eps = 1e-6
        n = round(nu.real)
        out = np.empty(z_arr.shape, dtype=complex)
        small = z_arr < 2.0 if method == "auto" else np.ones(z_arr.shape, bool)
        if np.any(small):
            zs = z_arr[small]
            out[small] = 0.5 * (
                _bessel_k_series(complex(n - eps), zs, scaled)
                + _bessel_k_series(complex(n + eps), zs, scaled)
            )
        if np.any(~small):
            zq = z_arr[~small]
            out[~small] = 0.5 * (
                _bessel_k_quadrature(complex(n - eps), zq, scaled, config)
                + _bessel_k_quadrature(complex(n + eps), zq, scaled, config)
            )
    else:
        if method == "auto":
            small = z_arr <= _series_switch(nu)
            out = np.empty(z_arr.shape, dtype=complex)
            if np.any(small):
                out[small] = _bessel_k_series(nu, z_arr[small], scaled)
            if np.any(~small):
                out[~small] = _bessel_k_quadrature(nu, z_arr[~small], scaled, config)
        elif method == "series":
            out = _bessel_k_series(nu, z_arr, scaled)
        elif method == "quadrature":
            out = _bessel_k_quadrature(nu, z_arr, scaled, config)
        else:
            raise ValueError("unknown method %r" % method)
    if abs(nu.real) < 1e-12 or abs(nu.imag) < 1e-12:
        out = out.real.astype(complex)  # conjugation symmetry: value is real
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out[0])
    return out


# ---------------------------------------------------------------------------
# Bessel J, orders 0 and 1
# ---------------------------------------------------------------------------

_J_SWITCH = 12.0


def _bessel_j_series(order: int, z):
    w = 0.25 * z * z
    t = np.full(z.shape, 1.0 if order == 0 else 0.5, dtype=float)
    if order == 1:
        t = t * z
    total = t.copy()
    for m in range(1, 60):
        t = t * (-w) / (m * (m + order))
        total += t
        if np.all(np.abs(t) <= 1e-18 * (1.0 + np.abs(total))):
            break
    return total


def _hankel_pq(order: int, z, n_terms: int = 12):
    """Asymptotic P, Q series: J_n = sqrt(2/(pi z)) (P cos chi - Q sin chi),
    chi = z - (2n+1) pi/4."""
    mu = 4.0 * order * order
    a = 1.0
    p = np.ones_like(z)
    q = np.zeros_like(z)
    zpow = np.ones_like(z)
    for j in range(1, 2 * n_terms):
        a = a * (mu - (2 * j - 1) ** 2) / (j * 8.0)
        zpow = zpow / z
        if j % 2 == 1:
            q = q + a * zpow * (-1.0) ** ((j - 1) // 2)
        else:
            p = p + a * zpow * (-1.0) ** (j // 2)
    return p, q


def bessel_J(order: int, z):
    """Bessel function J_0 or J_1 for real argument (scalar or array).

    Power series up to |z| = 12, Hankel asymptotic expansion beyond.
    J_0 is even and J_1 odd; negative arguments are folded accordingly.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    sign = np.where((z_arr < 0) & (order == 1), -1.0, 1.0)
    az = np.abs(z_arr)
    out = np.empty(az.shape, dtype=float)
    small = az <= _J_SWITCH
    if np.any(small):
        out[small] = _bessel_j_series(order, az[small])
    if np.any(~small):
        zz = az[~small]
        p, q = _hankel_pq(order, zz)
        chi = zz - (2 * order + 1) * math.pi / 4.0
        out[~small] = np.sqrt(2.0 / (math.pi * zz)) * (
            p * np.cos(chi) - q * np.sin(chi)
        )
    out = out * sign
    if np.isscalar(z) or np.ndim(z) == 0:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# stable unitary kernel B(k, z) = sqrt(2 k sinh(pi k))/pi * K_{ik}(z)
# ---------------------------------------------------------------------------
#
# Two complementary regions.  Where z^2 - k^2 <= eta0^2 the series form is
# used: writing I_{ik}(z) = (z/2)^{ik} T(k,z) / Gamma(1+ik) with
#     T(k,z) = sum_m (z^2/4)^m / (m! (1+ik)_m),
# the identity K_{ik} = -pi Im(I_{ik}) / sinh(pi k) and
# |Gamma(1+ik)| = sqrt(pi k / sinh(pi k)) cancel every exponentially
# large/small factor analytically, leaving
#     B(k,z) = -sqrt(2/pi) * Im( e^{i phi} T ),
#     phi(k,z) = k log(z/2) - arg Gamma(1+ik),
# with the series evaluated as a matrix product of bounded factors:
#     T = R^T Z,  R[m,k] = m! / (1+ik)_m  (|R| <= 1),
#     Z[m,j] = (z_j^2/4)^m / (m!)^2       (<= e^{z_j}).
# The combination Im(e^{i phi} T) cancels ~ e^{2 sqrt(z^2-k^2)} digits once
# z clears k, so beyond eta0 the kernel switches to the scaled quadrature
#     K_{ik}(z) e^{z} = int_0^inf e^{-z(cosh s - 1)} cos(ks) ds,
# recombined in log space; in that region the integral has no cancellation
# at the kernel's own scale, and deep tails underflow to exact zeros.

_ETA0 = 6.0  # series/quadrature split: eta^2 = z^2 - k^2


def _kernel_quad_kcut(z):
    """Per-column k threshold below which the quadrature form wins.

    Series roundoff grows like e^{2 eta + k asin(k/z) - pi k/2}, quadrature
    roundoff like e^{eta + k asin(k/z) - z}; equating gives the curve
    eta + z + 3.9 = pi k / 2.  Rows k above max-threshold keep the series;
    additionally the series is always kept while eta <= 6 (no material
    cancellation yet).
    """
    z = np.asarray(z, dtype=float)
    t1 = np.sqrt(np.maximum(z * z - _ETA0 * _ETA0, 0.0))
    a = 0.25 * math.pi * math.pi + 1.0
    zb = z + 3.9
    disc = (math.pi * zb) ** 2 - 4.0 * a * (zb * zb - z * z)
    t2 = np.where(
        disc >= 0.0,
        (math.pi * zb + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a),
        np.inf,
    )
    return np.minimum(t1, t2)


def kernel_series_length(z_max: float) -> int:
    """Terms needed for the kernel series at argument up to z_max."""
    w = 0.25 * z_max * z_max
    if w <= 1.0:
        return 12
    logw = math.log(w)
    m, log_term, log_peak = 1, 0.0, 0.0
    while True:
        log_term += logw - 2.0 * math.log(m)
        log_peak = max(log_peak, log_term)
        if log_term < log_peak - 41.0 and m > math.sqrt(w):
            return m + 2
        m += 1
        if m > 4000:
            return 4000


def _kernel_series_block(k, theta, lz):
    """Series-form B on the full k grid for one column block."""
    m_terms = kernel_series_length(math.exp(float(lz.max())))
    w = np.exp(2.0 * lz) * 0.25
    Z = np.empty((m_terms, lz.size), dtype=float)
    Z[0] = 1.0
    R = np.empty((m_terms, k.size), dtype=complex)
    R[0] = 1.0
    for m in range(1, m_terms):
        Z[m] = Z[m - 1] * (w / (m * m))
        R[m] = R[m - 1] * (m / (m + 1j * k))
    T = R.T @ Z.astype(complex)
    phi = np.outer(k, lz - _LN2) - theta[:, None]
    return -_SQRT_2_PI * (np.cos(phi) * T.imag + np.sin(phi) * T.real)


def _kernel_quad_block(k_rows, log_w, z_cols):
    """Scaled-quadrature B for rows k_rows x columns z_cols (z > k there)."""
    z_min = float(z_cols.min())
    k_max = float(k_rows.max())
    h = 2.0 * math.pi / (8.0 * (k_max + 30.0))
    s_max = math.acosh(1.0 + 46.0 / z_min)
    s = np.arange(0.0, s_max + h, h)
    growth = np.cosh(s) - 1.0
    cosk = np.cos(np.outer(s, k_rows))
    cosk[0] *= 0.5
    with np.errstate(under="ignore"):
        E = np.exp(-np.outer(z_cols, growth))
        q = (E @ cosk) * h  # K_{ik}(z) e^{z}, shape (nz, nk)
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.log(np.abs(q)) + log_w[None, :] - z_cols[:, None]
        out = np.where(q != 0.0, np.sign(q) * np.exp(mag), 0.0)
    return out.T


def unitary_kernel_table(k, log_z, chunk: int = 1024):
    """B[i, j] = sqrt(2 k_i sinh(pi k_i))/pi * K_{i k_i}(e^{log_z[j]}).

    k is a 1D array of nonnegative values sorted ascending, log_z a 1D
    array of log arguments (any order).  Exact zeros where the kernel is
    below double-precision range.
    """
    k = np.asarray(k, dtype=float)
    log_z = np.asarray(log_z, dtype=float)
    if np.any(np.diff(k) < 0):
        raise ValueError("k grid must be sorted ascending")
    theta = gamma_phase(k)
    with np.errstate(divide="ignore"):
        log_w = log_kernel_weight(np.maximum(k, 1e-300))
    log_w[k == 0.0] = -np.inf
    nk, nz = k.size, log_z.size
    B = np.zeros((nk, nz), dtype=float)
    order = np.argsort(log_z)
    k_max = float(k.max())
    pos = 0
    while pos < nz:
        cols = order[pos:pos + chunk]
        pos += chunk
        lz = log_z[cols]
        z = np.exp(lz)
        col_kcut = _kernel_quad_kcut(z)
        in_series = col_kcut < k_max
        if np.any(in_series):
            B[:, cols[in_series]] = _kernel_series_block(k, theta, lz[in_series])
        # rows with k < kcut(z) need the quadrature form
        n_rows_all = np.searchsorted(k, col_kcut)
        quad_cols = n_rows_all > 0
        if not np.any(quad_cols):
            continue
        zq = z[quad_cols]
        cq = cols[quad_cols]
        n_rows = n_rows_all[quad_cols]
        block = 128
        for b0 in range(0, nk, block):
            b1 = min(b0 + block, nk)
            sel = n_rows > b0  # columns whose quad region reaches this block
            if not np.any(sel):
                continue
            sub_z = zq[sel]
            sub_cols = cq[sel]
            q = _kernel_quad_block(k[b0:b1], log_w[b0:b1], sub_z)
            # only overwrite entries genuinely past the series region
            row_idx = np.arange(b0, b1)
            mask = row_idx[:, None] < n_rows[sel][None, :]
            target = B[b0:b1][:, sub_cols]
            B[b0:b1][:, sub_cols] = np.where(mask, q, target)
    return B


def unitary_kernel(k: float, z: float) -> float:
    """Scalar stable kernel sqrt(2 k sinh(pi k))/pi * K_{ik}(z)."""
    out = unitary_kernel_table(np.array([float(k)]), np.array([math.log(z)]))
    return float(out[0, 0])


def log_kernel_weight(k):
    """log of sqrt(2 k sinh(pi k))/pi, overflow-safe (k > 0)."""
    k = np.asarray(k, dtype=float)
    # log sinh(pi k) = pi k + log((1 - e^{-2 pi k})/2)
    log_sinh = math.pi * k + np.log1p(-np.exp(-2.0 * math.pi * k)) - _LN2
    return 0.5 * (np.log(2.0 * k) + log_sinh) - math.log(math.pi)
