"""Modular surface computations on SL(2,Z)\\H^2.

Fundamental-domain reduction by the two generators z -> z+1 and
z -> -1/z, the truncated Eisenstein series y^s + sum over coprime
bottom rows (c,d) of (Im gz)^s, the continued Riemann zeta function,
and the scattering coefficient

    S(s) = sqrt(pi) Gamma(s-1/2) zeta(2s-1) / (Gamma(s) zeta(2s)),

whose constant-term identity int_0^1 E(x+iy,s) dx = y^s + S(s) y^{1-s}
bridges the lattice sum and the zeta quotient.  The series sums one
representative per coprime pair modulo negation (rows with c >= 1,
the c = 0 class contributing the leading y^s), which is the
normalization the constant-term identity pins down.

Zeta is evaluated by the accelerated alternating (eta) series, with a
direct Euler-Maclaurin branch where the eta prefactor 1 - 2^{1-w}
nearly vanishes, and by the functional equation for Re w < 1/2.  The
removable point s = 1/2 of S is handled by an algebraic rewrite
against the regularized (w-1) zeta(w), never by naive division.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .special_functions import GammaPoleError, _sinpi_complex, gamma_complex

_LN2 = math.log(2.0)
_SQRT_PI = math.sqrt(math.pi)


class PoleError(ValueError):
    """Evaluation at a non-removable pole; carries the location."""

    def __init__(self, location, what="function"):
        self.location = location
        super().__init__("%s has a pole at s = %s" % (what, location))


# ---------------------------------------------------------------------------
# fundamental domain
# ---------------------------------------------------------------------------


@dataclass
class ModularPoint:
    """Point of the upper half plane, optionally marked as reduced."""

    z: complex
    reduced: bool = False

    def __post_init__(self):
        self.z = complex(self.z)
        if not (self.z.imag > 0.0):
            raise ValueError("Im z must be positive")
        if self.reduced:
            if abs(self.z) < 1.0 - 1e-12 or abs(self.z.real) > 0.5 + 1e-12:
                raise ValueError("point marked reduced lies outside "
                                 "|z| >= 1, |Re z| <= 1/2")


def _as_complex(z) -> complex:
    if isinstance(z, ModularPoint):
        return z.z
    z = complex(z)
    if not (z.imag > 0.0):
        raise ValueError("Im z must be positive")
    return z


def _mobius_int(mat, z) -> complex:
    # fractional linear action of an integer 2x2 matrix
    a, b = mat[0]
    c, d = mat[1]
    z = complex(z)
    return (a * z + b) / (c * z + d)


def reduce_with_word(z):
    """Reduce z into the fundamental domain, returning the group element.

    Returns (point, gamma, word length) with gamma an integer matrix,
    a product of the generators, such that gamma z = point.z.  The word
    length counts unit translations and inversions.
    """
    zc = _as_complex(z)
    gamma = np.eye(2, dtype=np.int64)
    length = 0
    for _ in range(512):
        n = math.floor(zc.real + 0.5)
        if n:
            zc = zc - n
            gamma = np.array([[1, -n], [0, 1]], dtype=np.int64) @ gamma
            length += abs(n)
        if abs(zc) >= 1.0 - 1e-15:
            break
        zc = -1.0 / zc
        gamma = np.array([[0, -1], [1, 0]], dtype=np.int64) @ gamma
        length += 1
    else:
        raise RuntimeError("fundamental domain reduction did not terminate")
    return ModularPoint(zc, reduced=True), gamma, length


def reduce_to_fundamental_domain(z):
    """Reduce z into |z| >= 1, |Re z| <= 1/2; returns (point, word length)."""
    point, _, length = reduce_with_word(z)
    return point, length


# ---------------------------------------------------------------------------
# coprime lattice truncation
# ---------------------------------------------------------------------------


def _farey_pairs(bound: int) -> np.ndarray:
    # all coprime (p, q) with 1 <= p <= q <= bound, by the Farey
    # next-term recurrence (no gcd scans); the walk ends at 1/1
    out = []
    a, b, c, d = 0, 1, 1, bound
    while c <= bound:
        out.append((c, d))
        k = (bound + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
    return np.array(out, dtype=np.int64)


@dataclass
class LatticeTruncation:
    """Coprime bottom rows (c,d) with 0 < |c|,|d| <= bound plus the four
    axis classes (0,+-1), (+-1,0); closed under negation."""

    bound: int
    pairs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.bound) != self.bound or self.bound < 1:
            raise ValueError("bound must be a positive integer")
        self.bound = int(self.bound)
        if self.pairs is None:
            pq = _farey_pairs(self.bound)
            p, q = pq[:, 0], pq[:, 1]
            off = pq[p != q]
            quad = np.concatenate([pq, off[:, ::-1]])
            c, d = quad[:, 0], quad[:, 1]
            full = np.concatenate([
                np.stack([c, d], 1), np.stack([-c, -d], 1),
                np.stack([c, -d], 1), np.stack([-c, d], 1),
                [[0, 1], [0, -1], [1, 0], [-1, 0]],
            ])
            order = np.lexsort((full[:, 1], full[:, 0]))
            self.pairs = full[order]
        if np.any(np.gcd(self.pairs[:, 0], self.pairs[:, 1]) != 1):
            raise ValueError("enumerated pair is not coprime")
        if np.unique(self.pairs, axis=0).shape != self.pairs.shape:
            raise ValueError("pair enumeration contains duplicates")
        neg = set(map(tuple, (-self.pairs).tolist()))
        if neg != set(map(tuple, self.pairs.tolist())):
            raise ValueError("pair set is not symmetric under negation")

    def classes(self) -> np.ndarray:
        # one representative per pair modulo negation, c >= 1
        return self.pairs[self.pairs[:, 0] >= 1]

    def tail_bound(self, s) -> float:
        """Upper bound on the dropped part of the series for reduced z.

        Each dropped term with cd != 0 is at most (2/(sqrt(3)|cd|))^sigma
        on the fundamental domain; the bound sums that estimate over the
        complement of the window, closing the sums with integral tails.
        """
        sigma = complex(s).real
        if sigma <= 1.0:
            raise ValueError("tail bound requires Re s > 1")
        M = self.bound
        partial = float(np.sum(np.arange(1, M + 1, dtype=float) ** -sigma))
        tail = M ** (1.0 - sigma) / (sigma - 1.0)
        return (2.0 / math.sqrt(3.0)) ** sigma * 2.0 * tail \
            * (2.0 * partial + tail)


def _as_truncation(M) -> LatticeTruncation:
    if isinstance(M, LatticeTruncation):
        return M
    return LatticeTruncation(M)


def eisenstein_series(z, s, M) -> complex:
    """Truncated Eisenstein series y^s + sum (Im gz)^s over coprime rows.

    The sum runs over the representatives with c >= 1 of the truncation
    M (an order bound or a LatticeTruncation); deterministic for a fixed
    truncation, with the dropped tail controlled by tail_bound.
    """
    s = complex(s)
    if s.real <= 1.0:
        raise ValueError("the series converges only for Re s > 1")
    trunc = _as_truncation(M)
    if trunc.bound < 10:
        raise ValueError("truncation order must be at least 10")
    zc = _as_complex(z)
    x, y = zc.real, zc.imag
    rows = trunc.classes()
    c = rows[:, 0].astype(float)
    d = rows[:, 1].astype(float)
    base = y / ((c * x + d) ** 2 + (c * y) ** 2)
    if s.imag == 0.0:
        total = complex(np.sum(base ** s.real))
    else:
        total = complex(np.sum(np.exp(s * np.log(base))))
    if s.imag == 0.0:
        lead = complex(y ** s.real)
    else:
        lead = complex(np.exp(s * math.log(y)))
    return lead + total


# ---------------------------------------------------------------------------
# Riemann zeta
# ---------------------------------------------------------------------------


def _cvz_weights(n: int) -> np.ndarray:
    # accelerated alternating-series weights; the estimate of
    # sum (-1)^k a_k is sum w_k a_k with error O((3+sqrt8)^-n)
    dd = (3.0 + math.sqrt(8.0)) ** n
    dd = 0.5 * (dd + 1.0 / dd)
    b = -1.0
    c = -dd
    w = np.empty(n)
    for k in range(n):
        c = b - c
        w[k] = c
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return w / dd


_ETA_W = _cvz_weights(128)
_ETA_K = np.arange(1.0, 129.0)

# Bernoulli numbers B_2 .. B_32
_BERNOULLI = np.array([
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0, 43867.0 / 798.0,
    -174611.0 / 330.0, 854513.0 / 138.0, -236364091.0 / 2730.0,
    8553103.0 / 6.0, -23749461029.0 / 870.0, 8615841276005.0 / 14322.0,
    -7709321041217.0 / 510.0,
])


def _eta(w: complex) -> complex:
    return complex(np.sum(_ETA_W * np.exp(-w * np.log(_ETA_K))))


def _zeta_em(w: complex, n: int = 64) -> complex:
    # direct Euler-Maclaurin continuation, used where the eta
    # prefactor loses accuracy
    k = np.arange(1.0, n)
    total = complex(np.sum(np.exp(-w * np.log(k))))
    total += n ** (1.0 - w) / (w - 1.0) + 0.5 * n ** (-w)
    rising = w
    power = n ** (-w - 1.0)
    for j, b2j in enumerate(_BERNOULLI):
        total += b2j / math.factorial(2 * (j + 1)) * rising * power
        rising *= (w + 2 * j + 1) * (w + 2 * j + 2)
        power /= n * n
    return total


def _zeta_right(w: complex) -> complex:
    # Re w >= 1/2, w != 1
    den = -np.expm1((1.0 - w) * _LN2)
    if abs(den) < 0.05 and abs(w - 1.0) > 0.5:
        return _zeta_em(w)
    return _eta(w) / den


def riemann_zeta(s) -> complex:
    """Riemann zeta with analytic continuation; pole error at s = 1.

    Accelerated alternating series for Re s >= 1/2, reflection through
    the functional equation for Re s < 1/2; relative accuracy about
    1e-13 for |Im s| <= 100.
    """
    w = complex(s)
    if w == 1.0:
        raise PoleError(1.0, "zeta")
    if w.real >= 0.5:
        return _zeta_right(w)
    if w == 0.0:
        return complex(-0.5)
    if w.imag == 0.0 and w.real == round(w.real) and round(w.real) % 2 == 0:
        return complex(0.0)
    chi = (2.0 ** w) * math.pi ** (w - 1.0) * _sinpi_complex(0.5 * w) \
        * gamma_complex(1.0 - w)
    return chi * _zeta_right(1.0 - w)


def _zeta_tilde(w: complex) -> complex:
    # regularized (w-1) zeta(w), analytic and equal to 1 at w = 1
    w = complex(w)
    if w == 1.0:
        return complex(1.0)
    u = (w - 1.0) * _LN2
    ratio = u / (-np.expm1(-u)) / _LN2
    return _eta(w) * ratio


# ---------------------------------------------------------------------------
# scattering coefficient
# ---------------------------------------------------------------------------


@dataclass
class SMatrixValue:
    """Scattering coefficient at a spectral point s."""

    s: complex
    value: complex

    def __post_init__(self):
        self.s = complex(self.s)
        self.value = complex(self.value)
        on_line = abs(self.s.real - 0.5) <= 1e-12
        if on_line and abs(self.s - 0.5) > 1e-6:
            if abs(abs(self.value) - 1.0) > 1e-9:
                raise ValueError("scattering value off the unit circle "
                                 "on the critical line")


def smatrix(s) -> SMatrixValue:
    """Scattering coefficient sqrt(pi) G(s-1/2) z(2s-1) / (G(s) z(2s)).

    The removable point s = 1/2 (and its neighborhood) is computed from
    the algebraically equivalent form 2 sqrt(pi) Gamma(s+1/2) zeta(2s-1)
    divided by Gamma(s) (2s-1) zeta(2s), whose regularized denominator
    is finite; the exact value there is -1.  The points s = 1/2 - m and
    s = -m, where a Gamma pole meets a zeta zero, are evaluated through
    the reflection S(s) = 1/S(1-s).  The pole at s = 1 raises.
    """
    sc = complex(s)
    if sc == 1.0:
        raise PoleError(1.0, "scattering matrix")
    if abs(sc - 0.5) < 0.01:
        num = 2.0 * _SQRT_PI * gamma_complex(sc + 0.5) \
            * riemann_zeta(2.0 * sc - 1.0)
        den = gamma_complex(sc) * _zeta_tilde(2.0 * sc)
        return SMatrixValue(sc, num / den)
    try:
        num = _SQRT_PI * gamma_complex(sc - 0.5) \
            * riemann_zeta(2.0 * sc - 1.0)
        den = gamma_complex(sc) * riemann_zeta(2.0 * sc)
        return SMatrixValue(sc, num / den)
    except GammaPoleError:
        # Gamma pole cancelled by a trivial zeta zero; use the
        # functional relation at the regular mirror point
        return SMatrixValue(sc, 1.0 / smatrix(1.0 - sc).value)


def critical_line_sweep(ts) -> np.ndarray:
    """Rows (t, |S|, arg S) for S at s = 1/2 + it over the given t."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    out = np.empty((ts.size, 3))
    for i, t in enumerate(ts):
        v = smatrix(0.5 + 1j * t).value
        out[i] = (t, abs(v), math.atan2(v.imag, v.real))
    return out


# ---------------------------------------------------------------------------
# constant term
# ---------------------------------------------------------------------------


def constant_term_check(y: float, s, M, n_x: int = 128) -> float:
    """Relative residual of int_0^1 E(x+iy,s) dx = y^s + S(s) y^{1-s}.

    The x-integral of the truncated series is done by the midpoint rule
    (the summed rows are near-periodic smooth functions of x), with the
    d-window per row widened beyond the truncation order by eight
    Lorentzian widths so the quadrature tail sits below the target
    rather than at the window edge.  Residual is relative to y^s.
    """
    s = complex(s)
    y = float(y)
    if y < 3.0:
        raise ValueError("constant term check requires y >= 3")
    if s.real < 1.5:
        raise ValueError("constant term check requires Re s >= 1.5")
    bound = _as_truncation(M).bound if isinstance(M, LatticeTruncation) \
        else int(M)
    xs = (np.arange(n_x) + 0.5) / n_x
    total = 0.0 + 0.0j
    for c in range(1, bound + 1):
        half = bound + int(math.ceil(8.0 * c * y))
        d = np.arange(-half, half + 1, dtype=np.int64)
        d = d[np.gcd(np.int64(c), d) == 1].astype(float)
        base = y / ((c * xs[:, None] + d[None, :]) ** 2 + (c * y) ** 2)
        if s.imag == 0.0:
            total += np.sum(base ** s.real) / n_x
        else:
            total += np.sum(np.exp(s * np.log(base))) / n_x
    lead = np.exp(s * math.log(y))
    quad = lead + total
    target = lead + smatrix(s).value * np.exp((1.0 - s) * math.log(y))
    return float(abs(quad - target) / abs(lead))
