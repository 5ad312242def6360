"""Double-double arithmetic (~31 significant digits).

Error-free transformations (two_sum / two_prod with Dekker splitting) and
the handful of transcendentals needed by the high-accuracy Bessel series
path: exp, log, sin/cos, atan2, plus arg Gamma(1+ik) via a shifted
Stirling expansion.  Values are (hi, lo) float pairs with |lo| <= ulp(hi).

Pure Python by design: it is only used on scalar evaluations where double
precision would lose more digits to cancellation than the tolerance allows.
"""

from __future__ import annotations

import math
from fractions import Fraction

_SPLIT = 134217729.0  # 2^27 + 1

PI = (3.141592653589793, 1.2246467991473532e-16)
PI_HALF = (1.5707963267948966, 6.123233995736766e-17)
LN2 = (0.6931471805599453, 2.3190468138462996e-17)


def two_sum(a: float, b: float):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def quick_two_sum(a: float, b: float):
    s = a + b
    return s, b - (s - a)


def two_prod(a: float, b: float):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd(x) -> tuple:
    if isinstance(x, tuple):
        return x
    if isinstance(x, Fraction):
        hi = float(x)
        return hi, float(x - Fraction(hi))
    return float(x), 0.0


def add(a, b):
    s1, s2 = two_sum(a[0], b[0])
    t1, t2 = two_sum(a[1], b[1])
    s2 += t1
    s1, s2 = quick_two_sum(s1, s2)
    s2 += t2
    return quick_two_sum(s1, s2)


def neg(a):
    return -a[0], -a[1]


def sub(a, b):
    return add(a, neg(b))


def mul(a, b):
    p1, p2 = two_prod(a[0], b[0])
    p2 += a[0] * b[1] + a[1] * b[0]
    return quick_two_sum(p1, p2)


def div(a, b):
    q1 = a[0] / b[0]
    r = add(a, neg(mul(b, (q1, 0.0))))
    q2 = r[0] / b[0]
    r = add(r, neg(mul(b, (q2, 0.0))))
    q3 = r[0] / b[0]
    s = quick_two_sum(q1, q2)
    return add(s, (q3, 0.0))


def sqrt(a):
    if a[0] < 0.0:
        raise ValueError("dd sqrt of negative value")
    if a[0] == 0.0:
        return 0.0, 0.0
    x = 1.0 / math.sqrt(a[0])
    ax = a[0] * x
    v = (ax, 0.0)
    r = sub(a, mul(v, v))
    return add(v, (r[0] * x * 0.5, 0.0))


def ldexp(a, n: int):
    return math.ldexp(a[0], n), math.ldexp(a[1], n)


def exp(a):
    if a[0] > 690.0 or a[0] < -690.0:
        raise OverflowError("dd exp out of range")
    n = int(round(a[0] / LN2[0]))
    r = sub(a, mul(LN2, (float(n), 0.0)))
    total = (1.0, 0.0)
    term = (1.0, 0.0)
    m = 1
    while True:
        term = mul(term, r)
        term = div(term, (float(m), 0.0))
        total = add(total, term)
        if abs(term[0]) < 1e-35 * abs(total[0]):
            break
        m += 1
        if m > 40:
            break
    return ldexp(total, n)


def log(a):
    if a[0] <= 0.0:
        raise ValueError("dd log of nonpositive value")
    y0 = math.log(a[0])
    u = sub(mul(a, exp((-y0, 0.0))), (1.0, 0.0))
    corr = sub(u, mul(mul(u, u), (0.5, 0.0)))
    return add((y0, 0.0), corr)


def _sincos_taylor(r):
    # |r| <= pi/4 + small
    r2 = mul(r, r)
    s = r
    term = r
    m = 1
    while True:
        term = mul(term, r2)
        term = div(term, (float((2 * m) * (2 * m + 1)), 0.0))
        s = add(s, term) if m % 2 == 0 else sub(s, term)
        if abs(term[0]) < 1e-35:
            break
        m += 1
        if m > 20:
            break
    c = (1.0, 0.0)
    term = (1.0, 0.0)
    m = 1
    while True:
        term = mul(term, r2)
        term = div(term, (float((2 * m - 1) * (2 * m)), 0.0))
        c = add(c, term) if m % 2 == 0 else sub(c, term)
        if abs(term[0]) < 1e-35:
            break
        m += 1
        if m > 20:
            break
    return s, c


def sincos(a):
    n = int(round(a[0] / PI_HALF[0]))
    r = sub(a, mul(PI_HALF, (float(n), 0.0)))
    s, c = _sincos_taylor(r)
    q = n % 4
    if q == 0:
        return s, c
    if q == 1:
        return c, neg(s)
    if q == 2:
        return neg(s), neg(c)
    return neg(c), s


def atan2(y: float, x: float):
    """dd atan2 for float inputs, one Newton step from the f64 seed."""
    t0 = math.atan2(y, x)
    s, c = sincos((t0, 0.0))
    ydd, xdd = (y, 0.0), (x, 0.0)
    num = sub(mul(ydd, c), mul(xdd, s))
    den = add(mul(xdd, c), mul(ydd, s))
    return add((t0, 0.0), div(num, den))


# complex helpers: pairs (re, im) of dd values


def cmul(a, b):
    return (
        sub(mul(a[0], b[0]), mul(a[1], b[1])),
        add(mul(a[0], b[1]), mul(a[1], b[0])),
    )


def cadd(a, b):
    return add(a[0], b[0]), add(a[1], b[1])


_BERNOULLI = (
    Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
    Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6),
    Fraction(-3617, 510), Fraction(43867, 798), Fraction(-174611, 330),
    Fraction(854513, 138), Fraction(-236364091, 2730), Fraction(8553103, 6),
    Fraction(-23749461029, 870), Fraction(8615841276005, 14322),
    Fraction(-7709321041217, 510),
)

_STIRLING_COEF = tuple(
    dd(b / (2 * n * (2 * n - 1))) for n, b in enumerate(_BERNOULLI, start=1)
)

_ARG_GAMMA_SHIFT = 20


def arg_gamma_1ik(k: float):
    """arg Gamma(1 + ik) to double-double accuracy (k real, |k| < 60).

    Shifts the argument by 20 so the Stirling series converges to ~1e-33,
    then removes the shift with arg(j + ik) = atan2(k, j).
    """
    if k == 0.0:
        return (0.0, 0.0)
    sign = 1.0
    if k < 0.0:
        sign, k = -1.0, -k
    a = float(_ARG_GAMMA_SHIFT + 1)
    adD, kdd = (a, 0.0), (k, 0.0)
    mod2 = add(mul(adD, adD), mul(kdd, kdd))
    log_mod = mul(log(mod2), (0.5, 0.0))
    arg_w = atan2(k, a)
    # Im[(w - 1/2) log w] - Im w,  w = a + ik
    im_main = add(mul((a - 0.5, 0.0), arg_w), mul(kdd, log_mod))
    im_main = sub(im_main, kdd)
    # Bernoulli correction sum B_{2n} / (2n(2n-1) w^{2n-1})
    inv_mod2 = div((1.0, 0.0), mod2)
    u = (mul(adD, inv_mod2), neg(mul(kdd, inv_mod2)))  # 1/w
    u2 = cmul(u, u)
    p = u
    corr = (0.0, 0.0)
    for c in _STIRLING_COEF:
        corr = add(corr, mul(c, p[1]))
        p = cmul(p, u2)
        if abs(p[1][0] * c[0]) < 1e-36:
            break
    theta = add(im_main, corr)
    # remove the shift: arg Gamma(1+ik) = theta - sum_{j=1}^{20} atan2(k, j)
    for j in range(1, _ARG_GAMMA_SHIFT + 1):
        theta = sub(theta, atan2(k, float(j)))
    return (sign * theta[0], sign * theta[1])
