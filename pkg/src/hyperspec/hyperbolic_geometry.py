"""Upper half-space model of hyperbolic space.

Points are (x, y) with x a horizontal vector of dimension n-1 and y > 0;
the metric is ((dx)^2 + (dy)^2) / y^2.  The module provides distances,
geodesics, the two modular Moebius generators (n=2), and geodesic polar
coordinates centered at (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_EQ_TOL = 1e-14  # absolute Euclidean tolerance for point equality


@dataclass(frozen=True)
class UpperHalfPoint:
    """Point of H^n: horizontal coordinate x (length n-1) and height y > 0."""

    x: tuple
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))
        object.__setattr__(self, "y", float(self.y))
        if not self.y > 0:
            raise ValueError("upper half-space requires y > 0")

    @property
    def n(self) -> int:
        return len(self.x) + 1

    def to_json(self) -> dict:
        return {"x": list(self.x), "y": self.y}


def _check_same_dim(p: UpperHalfPoint, q: UpperHalfPoint):
    if len(p.x) != len(q.x):
        raise ValueError("dimension mismatch: %d vs %d" % (p.n, q.n))


def points_equal(p: UpperHalfPoint, q: UpperHalfPoint, tol: float = _EQ_TOL) -> bool:
    _check_same_dim(p, q)
    dx = max((abs(a - b) for a, b in zip(p.x, q.x)), default=0.0)
    return dx <= tol and abs(p.y - q.y) <= tol


def _cosh_distance_minus_one(p: UpperHalfPoint, q: UpperHalfPoint) -> float:
    _check_same_dim(p, q)
    dx2 = sum((a - b) ** 2 for a, b in zip(p.x, q.x))
    return (dx2 + (p.y - q.y) ** 2) / (2.0 * p.y * q.y)


def cosh_distance(p: UpperHalfPoint, q: UpperHalfPoint) -> float:
    """cosh d(p,q) = 1 + (|x-x'|^2 + (y-y')^2) / (2 y y')."""
    return 1.0 + _cosh_distance_minus_one(p, q)


def hyperbolic_distance(p: UpperHalfPoint, q: UpperHalfPoint) -> float:
    """Geodesic distance between two points of H^n.

    Uses the arccosh form; switches to a square-root expansion when
    cosh d - 1 < 1e-8 to avoid cancellation near coincident points.
    """
    eps = _cosh_distance_minus_one(p, q)
    if eps < 1e-8:
        # arccosh(1+e) = sqrt(2e) * (1 - e/12 + 3e^2/160 - ...)
        return math.sqrt(2.0 * eps) * (1.0 - eps / 12.0 + 3.0 * eps * eps / 160.0)
    return math.acosh(1.0 + eps)


def _tanh_half_distance(p: UpperHalfPoint, q: UpperHalfPoint) -> float:
    # tanh^2(d/2) = (|x-x'|^2 + (y-y')^2) / (|x-x'|^2 + (y+y')^2)
    _check_same_dim(p, q)
    dx2 = sum((a - b) ** 2 for a, b in zip(p.x, q.x))
    num = dx2 + (p.y - q.y) ** 2
    den = dx2 + (p.y + q.y) ** 2
    return math.sqrt(num / den)


@dataclass(frozen=True)
class GeodesicCurve:
    """A complete geodesic: vertical line over base_x, or hemicircle
    with center on {y=0} and Euclidean radius > 0."""

    kind: str  # "VerticalLine" | "HemiCircle"
    base_x: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def contains(self, p: UpperHalfPoint, tol: float = 1e-10) -> bool:
        if self.kind == "VerticalLine":
            return max(
                (abs(a - b) for a, b in zip(p.x, self.base_x)), default=0.0
            ) <= tol
        r2 = sum((a - b) ** 2 for a, b in zip(p.x, self.center)) + p.y**2
        return abs(r2 - self.radius**2) <= tol * max(1.0, self.radius**2)


def geodesic_through(p: UpperHalfPoint, q: UpperHalfPoint) -> GeodesicCurve:
    """The unique geodesic through two distinct points.

    Vertical line when the horizontal coordinates coincide, otherwise the
    hemicircle (x - c)^2 + y^2 = A^2 with c on the line through x_p, x_q.
    """
    _check_same_dim(p, q)
    if points_equal(p, q):
        raise ValueError("geodesic through coincident points is undefined")
    dx = np.asarray(q.x) - np.asarray(p.x)
    D = float(np.linalg.norm(dx))
    if D <= _EQ_TOL:
        return GeodesicCurve(kind="VerticalLine", base_x=p.x)
    u = dx / D
    t = (D * D + q.y**2 - p.y**2) / (2.0 * D)
    center = np.asarray(p.x) + t * u
    radius = math.hypot(t, p.y)
    return GeodesicCurve(kind="HemiCircle", center=tuple(center), radius=radius)


@dataclass(frozen=True)
class MoebiusMap:
    """Linear fractional transformation z -> (az+b)/(cz+d), ad - bc = 1 (n=2)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > 1e-12:
            raise ValueError("Moebius map requires ad - bc = 1, got det=%r" % det)

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        # matrix product self @ other, renormalized against roundoff drift
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        det = a * d - b * c
        s = 1.0 / math.sqrt(abs(det))
        return MoebiusMap(a * s, b * s, c * s, d * s)

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap(self.d, -self.b, -self.c, self.a)


# modular group generators: translation z -> z+1 and inversion z -> -1/z
GAMMA_T = MoebiusMap(1.0, 1.0, 0.0, 1.0)
GAMMA_I = MoebiusMap(0.0, -1.0, 1.0, 0.0)
IDENTITY_MAP = MoebiusMap(1.0, 0.0, 0.0, 1.0)


def mobius_apply(g: MoebiusMap, z: UpperHalfPoint) -> UpperHalfPoint:
    """Apply a Moebius map to a point of H^2."""
    if len(z.x) != 1:
        raise ValueError("Moebius maps act on H^2 points only")
    x, y = z.x[0], z.y
    # w = (az+b)(conj(cz+d)) / |cz+d|^2
    cz_re = g.c * x + g.d
    cz_im = g.c * y
    den = cz_re * cz_re + cz_im * cz_im
    num_re = g.a * x + g.b
    num_im = g.a * y
    w_re = (num_re * cz_re + num_im * cz_im) / den
    w_im = (num_im * cz_re - num_re * cz_im) / den
    return UpperHalfPoint(x=(w_re,), y=w_im)


_POLAR_CENTER_TOL = 1e-13


def polar_coordinates(p: UpperHalfPoint):
    """Geodesic polar coordinates (r, theta) centered at (0, 1).

    r is the hyperbolic distance to the center and theta is the unit
    starting direction in the tangent space at (0,1) (Euclidean unit
    vector of dimension n, last component along y).
    """
    n = p.n
    center = UpperHalfPoint(x=(0.0,) * (n - 1), y=1.0)
    if points_equal(p, center, tol=_POLAR_CENTER_TOL):
        raise ValueError("polar coordinates are singular at the center (0,1)")
    r = hyperbolic_distance(center, p)
    x = np.asarray(p.x)
    rho = float(np.linalg.norm(x))
    if rho <= _EQ_TOL:
        theta = np.zeros(n)
        theta[-1] = 1.0 if p.y > 1.0 else -1.0
        return r, tuple(theta)
    u = x / rho
    # hemicircle through (0,1) and p in the (u, y)-plane
    b = (rho * rho + p.y**2 - 1.0) / (2.0 * rho)
    norm = math.hypot(1.0, b)
    # tangent at (0,1) pointing toward p: (u, b)/|(1,b)|
    theta = np.zeros(n)
    theta[: n - 1] = u / norm
    theta[-1] = b / norm
    return r, tuple(theta)


def from_polar(r: float, theta, n: int | None = None) -> UpperHalfPoint:
    """Inverse of polar_coordinates: walk distance r from (0,1) along theta."""
    theta = np.asarray(theta, dtype=float)
    if n is None:
        n = len(theta)
    if len(theta) != n:
        raise ValueError("direction length must equal n")
    nrm = float(np.linalg.norm(theta))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError("direction must be a unit vector")
    theta = theta / nrm
    a = float(np.linalg.norm(theta[: n - 1]))
    if a <= 1e-15:
        y = math.exp(r) if theta[-1] > 0 else math.exp(-r)
        return UpperHalfPoint(x=(0.0,) * (n - 1), y=y)
    u = theta[: n - 1] / a
    c_off = theta[-1] / a
    A = math.hypot(1.0, c_off)
    # circle (xi - c_off)^2 + y^2 = A^2 in the (u,y)-plane through (0,1);
    # hyperbolic arclength s = -log tan(phi/2) increasing toward +u
    phi0 = math.atan2(1.0, -c_off)
    t1 = math.tan(0.5 * phi0) * math.exp(-r)
    phi1 = 2.0 * math.atan(t1)
    xi = c_off + A * math.cos(phi1)
    y = A * math.sin(phi1)
    x = np.zeros(n - 1)
    x[:] = u * xi
    return UpperHalfPoint(x=tuple(x), y=y)


# isometry generators of the upper half-space model, used by invariance tests


def translate(p: UpperHalfPoint, a) -> UpperHalfPoint:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return UpperHalfPoint(x=tuple(np.asarray(p.x) + a), y=p.y)


def dilate(p: UpperHalfPoint, lam: float) -> UpperHalfPoint:
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    return UpperHalfPoint(x=tuple(lam * np.asarray(p.x)), y=lam * p.y)


def invert(p: UpperHalfPoint) -> UpperHalfPoint:
    w = sum(v * v for v in p.x) + p.y * p.y
    return UpperHalfPoint(x=tuple(v / w for v in p.x), y=p.y / w)


def rotate(p: UpperHalfPoint, Q) -> UpperHalfPoint:
    """Apply an orthogonal map Q to the horizontal coordinate."""
    Q = np.asarray(Q, dtype=float)
    return UpperHalfPoint(x=tuple(Q @ np.asarray(p.x)), y=p.y)
