"""Boundary control on a desk-scale rectangle with a conformal metric.

The forward side synthesizes boundary spectral data for the Neumann
Laplacian of g = c(x)^{-2} delta (wave speed c), evaluates wave Fourier
coefficients through the sine-kernel time integral, and computes wave
inner products from boundary data alone.  The inverse side realizes
domain-of-influence projections by regularized control, decides whether
a boundary normal geodesic is still minimizing, estimates boundary
distance functions by bisection on the projector identity
||u||^2 = ||Pu||^2 + ||Qu||^2 - (Pu,Qu), collects them into an
approximate boundary distance representation, and recovers the
contravariant metric from distance gradients.

Conventions.  The grid is vertex centered, shape (nx, ny), spacing
hx = Lx/(nx-1).  In two dimensions the conformal Laplacian reduces to
c^2 times the flat one, so the stiffness matrix is metric free and the
conformal factor sits in the lumped mass c^{-2} dx.  Neumann sources f
are understood in the metric sense (derivative along the unit g-normal)
and the boundary measure is the induced one, c^{-1} dz; the two factors
of c cancel in the weak-form load, which keeps the spectral route and
the finite difference route consistent to machine precision in space.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh as dense_eigh
from scipy.sparse.linalg import eigsh, ArpackNoConvergence


class SolverError(RuntimeError):
    """Eigensolver failed to converge."""


class TruncationError(ArithmeticError):
    """Truncated heat kernel lost positivity."""


class IllPosedError(ValueError):
    """Degenerate direction set in the metric recovery system."""


class BracketError(RuntimeError):
    """Bisection could not bracket the projector-identity threshold."""

    def __init__(self, interval, gap):
        self.interval = interval
        self.gap = gap
        super().__init__(
            "no bracket in [%g, %g], residual gap %.3g" %
            (interval[0], interval[1], gap))


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------


_SMOOTH_LIMIT = 400.0


@dataclass
class ConformalMetric:
    """Conformal factor c > 0 sampled on a vertex-centered rectangle grid."""

    Lx: float
    Ly: float
    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.ndim != 2 or min(self.c.shape) < 2:
            raise ValueError("c must be a 2d grid sample")
        if not (self.Lx > 0.0 and self.Ly > 0.0):
            raise ValueError("rectangle sides must be positive")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("c must be finite")
        if self.c.min() < 0.2 or self.c.max() > 5.0:
            raise ValueError("wave speed must stay within [0.2, 5]")
        # smoothness guard: h^2-scaled second differences stay bounded
        d2x = np.diff(self.c, 2, axis=0) / self.hx ** 2
        d2y = np.diff(self.c, 2, axis=1) / self.hy ** 2
        bend = max(np.abs(d2x).max(initial=0.0), np.abs(d2y).max(initial=0.0))
        if bend > _SMOOTH_LIMIT:
            raise ValueError("conformal factor is not smooth on this grid "
                             "(second difference %.3g)" % bend)

    @property
    def nx(self) -> int:
        return self.c.shape[0]

    @property
    def ny(self) -> int:
        return self.c.shape[1]

    @property
    def hx(self) -> float:
        return self.Lx / (self.c.shape[0] - 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.c.shape[1] - 1)


def constant_metric(nx, ny, Lx=1.0, Ly=1.0, value=1.0) -> ConformalMetric:
    return ConformalMetric(Lx, Ly, np.full((nx, ny), float(value)))


def lens_metric(nx, ny, Lx=1.0, Ly=1.0, depth=0.4, width=0.22,
                center=None) -> ConformalMetric:
    """Speed dip in the middle of the rectangle (a slow lens)."""
    if center is None:
        center = (0.5 * Lx, 0.5 * Ly)
    x = np.linspace(0.0, Lx, nx)[:, None]
    y = np.linspace(0.0, Ly, ny)[None, :]
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    c = 1.0 - depth * np.exp(-r2 / (2.0 * width ** 2))
    return ConformalMetric(Lx, Ly, c)


def table_metric(Lx, Ly, c) -> ConformalMetric:
    return ConformalMetric(Lx, Ly, np.array(c, dtype=float))


# ---------------------------------------------------------------------------
# boundary geometry
# ---------------------------------------------------------------------------


@dataclass
class BoundaryGrid:
    """Perimeter nodes in counterclockwise loop order from the origin."""

    nx: int
    ny: int
    Lx: float
    Ly: float
    index: np.ndarray = field(default=None, repr=False)   # (nb, 2) int
    pos: np.ndarray = field(default=None, repr=False)     # (nb, 2)
    arc: np.ndarray = field(default=None, repr=False)     # (nb,)
    seg_weight: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.index is not None:
            return
        nx, ny = self.nx, self.ny
        hx, hy = self.Lx / (nx - 1), self.Ly / (ny - 1)
        ij = []
        ij += [(i, 0) for i in range(nx)]
        ij += [(nx - 1, j) for j in range(1, ny)]
        ij += [(i, ny - 1) for i in range(nx - 2, -1, -1)]
        ij += [(0, j) for j in range(ny - 2, 0, -1)]
        self.index = np.array(ij, dtype=np.int64)
        self.pos = self.index * np.array([hx, hy])
        step = np.linalg.norm(np.diff(np.vstack([self.pos, self.pos[:1]]),
                                      axis=0), axis=1)
        self.arc = np.concatenate([[0.0], np.cumsum(step[:-1])])
        self.seg_weight = 0.5 * (step + np.roll(step, 1))

    @property
    def count(self) -> int:
        return self.index.shape[0]

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.Lx + self.Ly)

    def arc_distance(self, i, j) -> float:
        gap = abs(self.arc[i] - self.arc[j])
        return float(min(gap, self.perimeter - gap))

    def interval_mask(self, center_index, half_width) -> np.ndarray:
        """Nodes within the given arc half-width of a center node."""
        gap = np.abs(self.arc - self.arc[center_index])
        gap = np.minimum(gap, self.perimeter - gap)
        return gap <= half_width


# ---------------------------------------------------------------------------
# eigensolve
# ---------------------------------------------------------------------------


def _stiff_1d(n, h):
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = np.full(n - 1, -1.0)
    return sparse.diags([off, main, off], [-1, 0, 1]) / h


def _mass_1d(n, h):
    m = np.full(n, h)
    m[0] = m[-1] = 0.5 * h
    return m


def _assemble_operator(metric):
    """Stiffness (metric free in 2d) and lumped g-mass on the grid."""
    nx, ny = metric.nx, metric.ny
    ax = _stiff_1d(nx, metric.hx)
    ay = _stiff_1d(ny, metric.hy)
    mx = _mass_1d(nx, metric.hx)
    my = _mass_1d(ny, metric.hy)
    stiff = sparse.kron(ax, sparse.diags(my)) \
        + sparse.kron(sparse.diags(mx), ay)
    mass = (np.outer(mx, my) * metric.c ** -2).ravel()
    return stiff.tocsr(), mass


@dataclass
class BoundarySpectralData:
    """Eigenvalues with boundary traces and the quadrature that pairs
    with them (the induced boundary measure c^{-1} dz)."""

    lambdas: np.ndarray
    traces: np.ndarray            # (K, nb)
    weights: np.ndarray           # (nb,) dS_g quadrature
    bgrid: BoundaryGrid
    vol_weights: np.ndarray = field(default=None, repr=False)  # (nx, ny)
    interior: np.ndarray = field(default=None, repr=False)     # (K, nx, ny)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.traces = np.asarray(self.traces, dtype=float)
        if self.traces.shape != (self.lambdas.size, self.bgrid.count):
            raise ValueError("trace array shape does not match")
        if np.any(np.diff(self.lambdas) < -1e-9 * max(1.0,
                                                      self.lambdas[-1])):
            raise ValueError("eigenvalues must be nondecreasing")
        if self.lambdas[0] > 1e-8:
            raise ValueError("Neumann spectrum must start at zero")
        if np.any(self.weights <= 0.0):
            raise ValueError("boundary quadrature weights must be positive")
        self._check_multiplicity_traces()

    def _check_multiplicity_traces(self):
        # traces of a multiplicity-m eigenvalue stay independent on the
        # boundary; verified per eigenvalue cluster through the trace Gram
        lam = self.lambdas
        k = 0
        while k < lam.size:
            j = k + 1
            while j < lam.size and lam[j] - lam[k] <= 1e-6 * (1.0 + lam[k]):
                j += 1
            if j - k > 1:
                block = self.traces[k:j]
                gram = (block * self.weights) @ block.T
                w = np.linalg.eigvalsh(gram)
                if w[0] <= 1e-10 * max(w[-1], 1e-30):
                    raise ValueError("degenerate eigenvalue traces are "
                                     "linearly dependent on the boundary")
            k = j

    @property
    def K(self) -> int:
        return self.lambdas.size


def neumann_eigensolve(metric, K, want_interior=True) -> BoundarySpectralData:
    """First K Neumann eigenpairs of -c^2 Laplace, orthonormal in the
    g-volume inner product; traces are sampled on the boundary loop."""
    nx, ny = metric.nx, metric.ny
    if min(nx, ny) < 64:
        raise ValueError("grid must be at least 64 x 64")
    if K > 0.1 * nx * ny:
        raise ValueError("mode count exceeds a tenth of the grid size")
    stiff, mass = _assemble_operator(metric)
    root = np.sqrt(mass)
    sym = sparse.diags(1.0 / root) @ stiff @ sparse.diags(1.0 / root)
    v0 = np.full(nx * ny, 1.0 / math.sqrt(nx * ny))
    try:
        lam, psi = eigsh(sym.tocsc(), k=K, sigma=-0.5, v0=v0)
    except ArpackNoConvergence as exc:
        raise SolverError("Neumann eigensolver did not converge") from exc
    order = np.argsort(lam)
    lam = lam[order]
    psi = psi[:, order]
    if lam[0] < -1e-8:
        raise SolverError("spurious negative eigenvalue %.3g" % lam[0])
    lam = np.maximum(lam, 0.0)
    phi = psi / root[:, None]
    # deterministic sign: largest-magnitude component positive
    pick = np.argmax(np.abs(phi), axis=0)
    sign = np.sign(phi[pick, np.arange(K)])
    sign[sign == 0.0] = 1.0
    phi = phi * sign
    modes = phi.T.reshape(K, nx, ny)
    bgrid = BoundaryGrid(nx, ny, metric.Lx, metric.Ly)
    bx, by = bgrid.index[:, 0], bgrid.index[:, 1]
    traces = modes[:, bx, by]
    weights = bgrid.seg_weight / metric.c[bx, by]
    vol = mass.reshape(nx, ny)
    return BoundarySpectralData(
        lambdas=lam, traces=traces, weights=weights, bgrid=bgrid,
        vol_weights=vol, interior=modes if want_interior else None)


# ---------------------------------------------------------------------------
# controls and wave Fourier coefficients
# ---------------------------------------------------------------------------


@dataclass
class ControlFunction:
    """Neumann source on the boundary loop times a uniform time grid."""

    values: np.ndarray    # (nb, nt)
    tgrid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.tgrid = np.asarray(self.tgrid, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.tgrid.size:
            raise ValueError("control shape does not match the time grid")
        if self.tgrid[0] != 0.0 or np.any(np.diff(self.tgrid) <= 0.0):
            raise ValueError("time grid must increase from zero")
        scale = max(1.0, np.abs(self.values).max())
        if max(np.abs(self.values[:, 0]).max(),
               np.abs(self.values[:, -1]).max()) > 1e-12 * scale:
            raise ValueError("control must vanish at both time endpoints")

    @property
    def T(self) -> float:
        return float(self.tgrid[-1])


@dataclass
class WaveFourierCoeffs:
    """Mode coefficients u_k^f(t) of the wave generated by a control."""

    coeffs: np.ndarray   # (K, nt)
    tgrid: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.tgrid = np.asarray(self.tgrid, dtype=float)
        if self.coeffs.shape[1] != self.tgrid.size:
            raise ValueError("coefficient array does not match the grid")
        scale = max(1.0, np.abs(self.coeffs).max())
        dt = self.tgrid[1] - self.tgrid[0]
        # zero Cauchy data: both the value and the slope vanish at t=0
        if np.abs(self.coeffs[:, 0]).max() > 1e-12 * scale:
            raise ValueError("coefficients must vanish at t = 0")
        if self.coeffs.shape[1] > 1 and \
                np.abs(self.coeffs[:, 1]).max() > 10.0 * dt ** 2 * scale:
            raise ValueError("coefficient slope does not vanish at t = 0")


def _sine_kernel(delta, lams):
    """S(t, lambda) = sin(sqrt(lambda) t)/sqrt(lambda) as (K, m) table."""
    delta = np.asarray(delta, dtype=float)
    root = np.sqrt(np.maximum(np.asarray(lams, dtype=float), 0.0))
    return delta[None, :] * np.sinc(root[:, None] * delta[None, :] / math.pi)


def _trap_weights(ts):
    w = np.full(ts.size, ts[1] - ts[0] if ts.size > 1 else 0.0)
    if ts.size > 1:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def _time_index(tgrid, t):
    j = int(round((t - tgrid[0]) / (tgrid[1] - tgrid[0])))
    if j < 0 or j >= tgrid.size or abs(tgrid[j] - t) > 1e-9 * max(1.0, t):
        raise ValueError("evaluation time %g is not on the control grid" % t)
    return j


def _boundary_profile(bsd, f):
    # beta_i(s) = boundary integral of f against trace i, all times at once
    return bsd.traces @ (bsd.weights[:, None] * f.values)


def blago_coeffs(bsd, f, t) -> np.ndarray:
    """All mode coefficients u_i^f(t) through the sine-kernel integral."""
    j = _time_index(f.tgrid, t)
    if j == 0:
        return np.zeros(bsd.K)
    ts = f.tgrid[:j + 1]
    beta = _boundary_profile(bsd, f)[:, :j + 1]
    kern = _sine_kernel(ts[-1] - ts, bsd.lambdas)
    return np.sum(kern * beta * _trap_weights(ts), axis=1)


def blago_coeff(bsd, f, i, t) -> float:
    """Coefficient u_i^f(t); the lambda = 0 mode uses S(t, 0) = t."""
    if not 0 <= i < bsd.K:
        raise ValueError("mode index %d out of range" % i)
    j = _time_index(f.tgrid, t)
    if j == 0:
        return 0.0
    ts = f.tgrid[:j + 1]
    beta = bsd.traces[i] @ (bsd.weights[:, None] * f.values[:, :j + 1])
    kern = _sine_kernel(ts[-1] - ts, bsd.lambdas[i:i + 1])[0]
    return float(np.sum(kern * beta * _trap_weights(ts)))


def mode_coefficients(bsd, f) -> WaveFourierCoeffs:
    """u_i^f on the whole time grid of the control."""
    beta = _boundary_profile(bsd, f)
    nt = f.tgrid.size
    out = np.zeros((bsd.K, nt))
    tw = _trap_weights(f.tgrid)
    for j in range(1, nt):
        ts = f.tgrid[:j + 1]
        w = _trap_weights(ts)
        kern = _sine_kernel(ts[-1] - ts, bsd.lambdas)
        out[:, j] = np.sum(kern * beta[:, :j + 1] * w, axis=1)
    del tw
    return WaveFourierCoeffs(out, f.tgrid.copy())


def blago_inner(bsd, f, t, h, s) -> float:
    """(u^f(t), u^h(s)) from boundary data alone."""
    return float(blago_coeffs(bsd, f, t) @ blago_coeffs(bsd, h, s))


# ---------------------------------------------------------------------------
# control basis and regularized projection
# ---------------------------------------------------------------------------


@dataclass
class ControlBasis:
    """Tensor control family: boundary hats times cosine-squared bumps."""

    space: np.ndarray    # (Bz, nb)
    time: np.ndarray     # (Bt, nt)
    tgrid: np.ndarray
    time_end: np.ndarray  # (Bt,) support end of each bump

    @property
    def size(self) -> int:
        return self.space.shape[0] * self.time.shape[0]

    def combine(self, alpha) -> ControlFunction:
        alpha = np.asarray(alpha, dtype=float).reshape(
            self.space.shape[0], self.time.shape[0])
        values = np.einsum('ab,az,bt->zt', alpha, self.space, self.time)
        return ControlFunction(values, self.tgrid.copy())


def _hat_profiles(bgrid, centers, half_width):
    prof = np.zeros((len(centers), bgrid.count))
    for a, ci in enumerate(centers):
        gap = np.abs(bgrid.arc - bgrid.arc[ci])
        gap = np.minimum(gap, bgrid.perimeter - gap)
        prof[a] = np.maximum(0.0, 1.0 - gap / half_width)
    return prof


def _bump_profiles(tgrid, starts, length):
    prof = np.zeros((len(starts), tgrid.size))
    for b, t0 in enumerate(starts):
        u = (tgrid - t0) / length
        inside = (u > 0.0) & (u < 1.0)
        prof[b, inside] = np.sin(math.pi * u[inside]) ** 2
    return prof


def make_control_basis(bgrid, tgrid, gamma_mask, horizon, n_space,
                       n_time) -> ControlBasis:
    """Basis supported on gamma x (0, horizon), at most 400 members."""
    if n_space * n_time > 400:
        raise ValueError("control basis is capped at 400 members")
    nodes = np.nonzero(gamma_mask)[0]
    if nodes.size == 0:
        raise ValueError("empty boundary subset")
    step = max(1, nodes.size // n_space)
    centers = nodes[::step][:n_space]
    arcstep = bgrid.perimeter / bgrid.count
    half = max(1.5 * step * arcstep, 2.0 * arcstep)
    space = _hat_profiles(bgrid, centers, half)
    length = horizon / (0.5 * (n_time + 1))
    starts = np.linspace(0.0, horizon - length, n_time)
    time = _bump_profiles(tgrid, starts, length)
    ends = starts + length
    return ControlBasis(space, time, tgrid.copy(), ends)


def _basis_mode_matrix(bsd, basis, j_hi):
    """Coefficients of every basis wave at time tgrid[j_hi], row per member."""
    mspace = basis.space @ (bsd.weights[:, None] * bsd.traces.T)  # (Bz, K)
    ts = basis.tgrid[:j_hi + 1]
    kern = _sine_kernel(ts[-1] - ts, bsd.lambdas) * _trap_weights(ts)
    mtime = basis.time[:, :j_hi + 1] @ kern.T                      # (Bt, K)
    u = mspace[:, None, :] * mtime[None, :, :]
    return u.reshape(basis.size, bsd.K)


@dataclass
class ProjectionResult:
    """Outcome of one regularized control projection."""

    value: float            # ||P u||^2 estimate
    residual_sq: float      # ||u||^2 - ||P u||^2
    total_sq: float
    alpha: np.ndarray
    mode_coeffs: np.ndarray  # coefficients of the control wave
    reg: float
    effective_rank: int
    lcurve: np.ndarray = None


def _project_onto(matrix_u, target, reg=None, lcurve=False):
    gram = matrix_u @ matrix_u.T
    rhs = matrix_u @ target
    total = float(target @ target)
    w, vecs = np.linalg.eigh(gram)
    wmax = max(w[-1], 1e-300)
    if reg is None:
        reg = 1e-6 * wmax
    beta = vecs.T @ rhs

    def solve(r):
        return vecs @ (beta / (w + r))

    alpha = solve(reg)
    fit = float(2.0 * alpha @ rhs - alpha @ gram @ alpha)
    fit = min(max(fit, 0.0), total)
    sweep = None
    if lcurve:
        regs = wmax * np.logspace(-10.0, -2.0, 9)
        rows = []
        for r in regs:
            a = solve(r)
            res = total - 2.0 * a @ rhs + a @ gram @ a
            rows.append((r, math.sqrt(max(res, 0.0)),
                         float(np.linalg.norm(a))))
        sweep = np.array(rows)
    return ProjectionResult(
        value=fit, residual_sq=total - fit, total_sq=total, alpha=alpha,
        mode_coeffs=matrix_u.T @ alpha, reg=float(reg),
        effective_rank=int(np.sum(w > reg)), lcurve=sweep)


def _target_coeffs(bsd, target, target_time):
    if isinstance(target, ControlFunction):
        if target_time is None:
            raise ValueError("a control target needs an evaluation time")
        return blago_coeffs(bsd, target, target_time)
    arr = np.asarray(target, dtype=float)
    if arr.shape != (bsd.K,):
        raise ValueError("target must be a control or a K-vector")
    return arr


def control_project(bsd, gamma_mask, tau, target, target_time=None,
                    reg=None, tgrid=None, n_space=24, n_time=8,
                    lcurve=False) -> ProjectionResult:
    """Estimate ||P_{Gamma,tau} u||^2 by minimizing over basis controls
    supported in Gamma x (0, tau); everything is built from boundary
    spectral data through the sine-kernel integrals."""
    uf = _target_coeffs(bsd, target, target_time)
    total = float(uf @ uf)
    if tau <= 0.0:
        return ProjectionResult(0.0, total, total,
                                np.zeros(0), np.zeros(bsd.K), 0.0, 0)
    if tgrid is None:
        tgrid = np.linspace(0.0, tau, max(2, int(round(tau / 0.005)) + 1))
    j_hi = int(np.searchsorted(tgrid, tau + 1e-12) - 1)
    basis = make_control_basis(bsd.bgrid, tgrid, gamma_mask, tgrid[j_hi],
                               n_space, n_time)
    matrix_u = _basis_mode_matrix(bsd, basis, j_hi)
    return _project_onto(matrix_u, uf, reg=reg, lcurve=lcurve)


# ---------------------------------------------------------------------------
# influence test and boundary distances
# ---------------------------------------------------------------------------


@dataclass
class InfluenceVerdict:
    """Decision on whether a boundary normal geodesic still minimizes."""

    decision: object     # True / False / None for indeterminate
    gap: float
    margin: float


class _BcSession:
    """Shared time grid, probe controls, and Gram caches for one BSD."""

    def __init__(self, bsd, dt=0.005, t_max=None, probe_width=None,
                 n_space_full=36, n_time=8):
        self.bsd = bsd
        diam = math.hypot(bsd.bgrid.Lx, bsd.bgrid.Ly)
        if t_max is None:
            t_max = bsd.bgrid.perimeter / 2.0 + diam
        nt = int(round(t_max / dt)) + 1
        self.tgrid = np.linspace(0.0, t_max, nt)
        self.dt = self.tgrid[1] - self.tgrid[0]
        if probe_width is None:
            probe_width = 6.0 * bsd.bgrid.perimeter / bsd.bgrid.count
        self.probe_width = probe_width
        self.n_space_full = n_space_full
        self.n_time = n_time
        self.full_mask = np.ones(bsd.bgrid.count, dtype=bool)
        self._full_cache = {}
        self._local_cache = {}
        self._probe_cache = {}

    def horizon_index(self, tau):
        j = int(math.floor(tau / self.dt + 1e-9))
        return max(1, min(j, self.tgrid.size - 1))

    def probe_coeffs(self, z_index, s):
        """Mode coefficients at time s of a probe control pushed from a
        narrow boundary window at z during the opening quarter of (0,s)."""
        key = (int(z_index), round(float(s), 9))
        if key not in self._probe_cache:
            bsd = self.bsd
            hat = np.maximum(
                0.0, 1.0 - self._arc_gap(z_index) / self.probe_width)
            js = self.horizon_index(s)
            ts = self.tgrid[:js + 1]
            length = max(0.25 * s, 4.0 * self.dt)
            u = ts / length
            bump = np.zeros_like(ts)
            inside = u < 1.0
            bump[inside] = np.sin(math.pi * u[inside]) ** 2
            beta = (bsd.traces @ (bsd.weights * hat))[:, None] * bump[None, :]
            kern = _sine_kernel(ts[-1] - ts, bsd.lambdas)
            coeffs = np.sum(kern * beta * _trap_weights(ts), axis=1)
            self._probe_cache[key] = coeffs
        return self._probe_cache[key]

    def _arc_gap(self, center):
        bg = self.bsd.bgrid
        gap = np.abs(bg.arc - bg.arc[center])
        return np.minimum(gap, bg.perimeter - gap)

    def _full_matrix(self, j):
        if j not in self._full_cache:
            basis = make_control_basis(
                self.bsd.bgrid, self.tgrid, self.full_mask, self.tgrid[j],
                self.n_space_full, self.n_time)
            u = _basis_mode_matrix(self.bsd, basis, j)
            gram = u @ u.T
            w, vecs = np.linalg.eigh(gram)
            self._full_cache[j] = (u, w, vecs)
        return self._full_cache[j]

    def _local_matrix(self, z_index, j):
        key = (int(z_index), int(j))
        if key not in self._local_cache:
            mask = self.bsd.bgrid.interval_mask(z_index,
                                                1.5 * self.probe_width)
            basis = make_control_basis(
                self.bsd.bgrid, self.tgrid, mask, self.tgrid[j], 3,
                self.n_time)
            u = _basis_mode_matrix(self.bsd, basis, j)
            gram = u @ u.T
            w, vecs = np.linalg.eigh(gram)
            self._local_cache[key] = (u, w, vecs)
        return self._local_cache[key]

    def project(self, which, target, reg_scale=1e-5):
        u, w, vecs = which
        rhs = u @ target
        total = float(target @ target)
        reg = reg_scale * max(w[-1], 1e-300)
        alpha = vecs @ ((vecs.T @ rhs) / (w + reg))
        fit = float(2.0 * alpha @ rhs - alpha @ (u @ (u.T @ alpha)))
        fit = min(max(fit, 0.0), total)
        return fit, u.T @ alpha


def influence_test(bsd, z_index, s, eps=0.10, margin=0.02,
                   session=None) -> InfluenceVerdict:
    """Decide whether the normal geodesic from boundary node z is still
    the minimizer to the boundary at arc length s.

    A probe wave pushed from a narrow window at z for time s + eps has
    its tip at depth min(s + eps, cut distance); controls from the whole
    boundary with horizon s reproduce everything up to depth s plus a
    resolution blur.  The decision statistic is the relative part of
    the probe that the best such control misses: above the margin the
    geodesic still minimizes at s, below half the margin it does not,
    and verdicts inside the band are reported as indeterminate (None).
    """
    if session is None:
        session = _BcSession(bsd)
    if s <= 0.0:
        raise ValueError("arc parameter must be positive")
    uh = session.probe_coeffs(z_index, s + eps)
    total = float(uh @ uh)
    if total <= 0.0:
        raise ValueError("probe wave vanished")
    j = session.horizon_index(s)
    fit, _ = session.project(session._full_matrix(j), uh)
    gap = (total - fit) / total
    if gap >= 1.5 * margin:
        decision = True
    elif gap <= 0.5 * margin:
        decision = False
    else:
        decision = None
    return InfluenceVerdict(decision, float(gap), margin)


def boundary_distance_estimate(bsd, w_index, s, z_index, eps=0.10,
                               margin=0.01, t_tol=0.01,
                               session=None) -> float:
    """Distance from gamma_w(s) to boundary node z, from boundary data.

    Bisection over t on the projector identity: with P the collar
    projection at s - eps and Q the ball around z of radius t - eps,
    the defect ||u||^2 - ||Pu||^2 - ||Qu||^2 + (Pu, Qu) vanishes once
    the union covers the domain of influence, which happens for
    t - eps above the sought distance; eps is subtracted back out.
    """
    if session is None:
        session = _BcSession(bsd)
    uh = session.probe_coeffs(w_index, s)
    total = float(uh @ uh)
    jp = session.horizon_index(s - eps)
    pfit, pcoef = session.project(session._full_matrix(jp), uh)

    def gap(t):
        jq = session.horizon_index(t - eps)
        qfit, qcoef = session.project(
            session._local_matrix(z_index, jq), uh)
        cross = float(pcoef @ qcoef)
        return (total - pfit - qfit + cross) / total

    t_lo = eps + 2.0 * session.dt
    t_hi = s + bsd.bgrid.arc_distance(w_index, z_index) + 4.0 * eps + 0.2
    if gap(t_hi) > margin:
        raise BracketError((t_lo, t_hi), gap(t_hi))
    if gap(t_lo) <= margin:
        return max(t_lo - eps, 0.0)
    lo, hi = t_lo, t_hi
    while hi - lo > t_tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) <= margin:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi) - eps


# ---------------------------------------------------------------------------
# boundary distance vectors and the R set
# ---------------------------------------------------------------------------


@dataclass
class BoundaryDistanceVector:
    """Distances from one interior point to a net of boundary nodes."""

    values: np.ndarray
    z_indices: np.ndarray
    bgrid: BoundaryGrid
    tag: tuple = None
    slack: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.z_indices = np.asarray(self.z_indices, dtype=np.int64)
        if self.values.shape != self.z_indices.shape:
            raise ValueError("values and node indices differ in shape")
        if np.any(self.values < -self.slack):
            raise ValueError("distances must be nonnegative")
        # 1-Lipschitz against the arc metric, which dominates d restricted
        # to the boundary
        vals = self.values
        for a in range(vals.size):
            arc = np.array([self.bgrid.arc_distance(self.z_indices[a], zb)
                            for zb in self.z_indices])
            if np.any(np.abs(vals - vals[a]) > arc + self.slack):
                raise ValueError("distance vector is not 1-Lipschitz "
                                 "along the boundary")


@dataclass
class RSet:
    """Approximate boundary distance representation."""

    vectors: np.ndarray       # (m, nz)
    z_indices: np.ndarray
    tags: list                # (w_index, s) per vector
    excluded: int
    eps: float


def reconstruct_R(bsd, eps, z_count=20, s_cap=None, margin=0.02,
                  session=None, progress=None) -> RSet:
    """Collect boundary distance vectors over a net of boundary normal
    geodesics, keeping only parameters that pass the influence test;
    indeterminate verdicts are excluded and counted."""
    bg = bsd.bgrid
    cell = bg.perimeter / bg.count
    if eps < 2.0 * cell:
        raise ValueError("resolution must cover two boundary cells")
    if session is None:
        session = _BcSession(bsd)
    if s_cap is None:
        s_cap = 0.75 * min(bg.Lx, bg.Ly)
    w_stride = max(1, int(round(eps / cell)))
    w_net = np.arange(0, bg.count, w_stride)
    z_net = np.linspace(0, bg.count, z_count, endpoint=False).astype(int)
    slack = 2.0 * cell + 3.0 * eps
    vectors, tags = [], []
    excluded = 0
    for w in w_net:
        s = eps
        while s <= s_cap:
            verdict = influence_test(bsd, w, s, eps=eps, margin=margin,
                                     session=session)
            if verdict.decision is False:
                break
            if verdict.decision is None:
                excluded += 1
                s += eps
                continue
            try:
                row = [boundary_distance_estimate(
                    bsd, w, s, z, eps=eps, margin=margin,
                    session=session) for z in z_net]
                vec = BoundaryDistanceVector(
                    np.array(row), z_net, bg, tag=(int(w), float(s)),
                    slack=slack)
                vectors.append(vec.values)
                tags.append((int(w), float(s)))
            except (BracketError, ValueError):
                excluded += 1
            if progress is not None:
                progress(w, s)
            s += eps
    return RSet(np.array(vectors), z_net, tags, excluded, eps)


def r_set_hausdorff(vec_a, vec_b) -> float:
    """Hausdorff distance between two vector families in sup norm."""
    a = np.asarray(vec_a, dtype=float)
    b = np.asarray(vec_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("vector families must share the z net")
    best_ab = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        best_ab[i] = np.min(np.max(np.abs(b - a[i]), axis=1))
    best_ba = np.empty(b.shape[0])
    chunk = 512
    for j0 in range(0, b.shape[0], chunk):
        blk = b[j0:j0 + chunk]
        dist = np.max(np.abs(blk[:, None, :] - a[None, :, :]), axis=2)
        best_ba[j0:j0 + blk.shape[0]] = np.min(dist, axis=1)
    return float(max(best_ab.max(initial=0.0), best_ba.max(initial=0.0)))


# ---------------------------------------------------------------------------
# heat kernel distances
# ---------------------------------------------------------------------------


def heat_distance(bsd, p, q, ts) -> float:
    """Geodesic distance from the small-time heat kernel limit.

    Fits -4 t log h(p, q, t) by the expansion d^2 + b t log t + c t on
    the given time sequence and returns the square root of the
    intercept; needs interior eigenfunction values in the data."""
    if bsd.interior is None:
        raise ValueError("heat distances need interior eigenfunctions")
    ts = np.asarray(ts, dtype=float)
    if ts.size < 3 or np.any(ts <= 0.0):
        raise ValueError("need at least three positive times")
    p = tuple(int(v) for v in p)
    q = tuple(int(v) for v in q)
    if p == q:
        return 0.0
    fp = bsd.interior[:, p[0], p[1]]
    fq = bsd.interior[:, q[0], q[1]]
    h = np.array([float(np.sum(np.exp(-bsd.lambdas * t) * fp * fq))
                  for t in ts])
    if np.any(h <= 0.0):
        raise TruncationError("truncated heat kernel is not positive at "
                              "t = %g" % ts[np.argmax(h <= 0.0)])
    f = -4.0 * ts * np.log(h)
    design = np.stack([np.ones_like(ts), ts * np.log(ts), ts], axis=1)
    sol, *_ = np.linalg.lstsq(design, f, rcond=None)
    return math.sqrt(max(sol[0], 0.0))


# ---------------------------------------------------------------------------
# metric recovery from distance gradients
# ---------------------------------------------------------------------------


@dataclass
class MetricEstimate:
    g_upper: np.ndarray
    c_est: float
    condition: float
    probe: tuple


def metric_recover(fields, probe, hx, hy) -> MetricEstimate:
    """Contravariant metric at a probe from boundary distance functions.

    Each distance function obeys the eikonal constraint
    g^{ij} d_i d_j = 1; central-difference gradients of at least three
    functions give a least squares system for (g11, g12, g22)."""
    fields = np.asarray(fields, dtype=float)
    if fields.ndim != 3 or fields.shape[0] < 3:
        raise ValueError("need at least three distance functions")
    ix, iy = int(probe[0]), int(probe[1])
    if not (1 <= ix < fields.shape[1] - 1 and 1 <= iy < fields.shape[2] - 1):
        raise ValueError("probe must be interior to the grid")
    gx = (fields[:, ix + 1, iy] - fields[:, ix - 1, iy]) / (2.0 * hx)
    gy = (fields[:, ix, iy + 1] - fields[:, ix, iy - 1]) / (2.0 * hy)
    design = np.stack([gx ** 2, 2.0 * gx * gy, gy ** 2], axis=1)
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > 1e6:
        raise IllPosedError("direction set is degenerate "
                            "(condition %.3g)" % cond)
    sol, *_ = np.linalg.lstsq(design, np.ones(fields.shape[0]), rcond=None)
    g = np.array([[sol[0], sol[1]], [sol[1], sol[2]]])
    w = np.linalg.eigvalsh(g)
    if w[0] <= 0.0:
        raise IllPosedError("recovered tensor is not positive definite")
    return MetricEstimate(g, math.sqrt(sol[0]), float(cond), (ix, iy))


# ---------------------------------------------------------------------------
# finite difference wave oracle
# ---------------------------------------------------------------------------


@dataclass
class FDWaveResult:
    times: np.ndarray
    fields: np.ndarray        # (len(times), nx, ny)
    energy_times: np.ndarray
    energy: np.ndarray
    dt: float


def fd_wave_oracle(metric, f, T, dt=None, sample_times=(),
                   energy_stride=16) -> FDWaveResult:
    """Leapfrog march of the Neumann problem on the same discrete
    operator as the eigensolve; the boundary load is the weak-form one,
    so the spectral route differs only in time stepping and truncation."""
    stiff, mass = _assemble_operator(metric)
    cmax = float(metric.c.max())
    h = min(metric.hx, metric.hy)
    if dt is None:
        dt = 0.4 * h / cmax
    if dt > 0.5 * h / cmax:
        raise ValueError("CFL violation: dt %.3g exceeds %.3g"
                         % (dt, 0.5 * h / cmax))
    nx, ny = metric.nx, metric.ny
    bgrid = BoundaryGrid(nx, ny, metric.Lx, metric.Ly)
    bx, by = bgrid.index[:, 0], bgrid.index[:, 1]
    bflat = bx * ny + by
    wz = bgrid.seg_weight / metric.c[bx, by]
    steps = int(math.ceil(T / dt))
    dt = T / steps
    tq = f.tgrid
    sample_times = np.asarray(sorted(sample_times), dtype=float)
    want = list(np.round(sample_times / dt).astype(int))
    inv_mass = 1.0 / mass
    u_prev = np.zeros(nx * ny)
    u = np.zeros(nx * ny)

    def load(tn):
        if tn <= 0.0 or tn >= tq[-1]:
            ft = np.zeros(bgrid.count)
        else:
            j = min(int(tn / (tq[1] - tq[0])), tq.size - 2)
            w1 = (tn - tq[j]) / (tq[j + 1] - tq[j])
            ft = (1.0 - w1) * f.values[:, j] + w1 * f.values[:, j + 1]
        out = np.zeros(nx * ny)
        np.add.at(out, bflat, wz * ft)
        return out

    fields, times = [], []
    etimes, evals = [], []
    if want and want[0] == 0:
        while want and want[0] == 0:
            fields.append(u.reshape(nx, ny).copy())
            times.append(0.0)
            want.pop(0)
    # first step from rest: u(dt) = dt^2/2 M^{-1} b(0)
    accel = inv_mass * (load(0.0) - stiff @ u)
    u_next = u + 0.5 * dt ** 2 * accel
    for n in range(1, steps + 1):
        u_prev, u = u, u_next
        if n < steps:
            accel = inv_mass * (load(n * dt) - stiff @ u)
            u_next = 2.0 * u - u_prev + dt ** 2 * accel
        while want and want[0] == n:
            fields.append(u.reshape(nx, ny).copy())
            times.append(n * dt)
            want.pop(0)
        if n % energy_stride == 0 or n == steps:
            v = (u - u_prev) / dt
            kin = 0.5 * float(v @ (mass * v))
            pot = 0.5 * float(u @ (stiff @ u_prev))
            etimes.append((n - 0.5) * dt)
            evals.append(kin + pot)
    return FDWaveResult(np.array(times), np.array(fields),
                        np.array(etimes), np.array(evals), dt)


def project_modes(bsd, field) -> np.ndarray:
    """g-volume inner products of a grid field with the stored modes."""
    if bsd.interior is None:
        raise ValueError("projection needs interior eigenfunctions")
    return np.einsum('kxy,xy,xy->k', bsd.interior, field, bsd.vol_weights)


# ---------------------------------------------------------------------------
# fast marching oracle
# ---------------------------------------------------------------------------


def fast_marching_oracle(metric, source_mask, second_order=True):
    """First-arrival distance solve of |grad d| = 1/c by fast marching
    with an optional second-order upwind stencil."""
    source_mask = np.asarray(source_mask, dtype=bool)
    nx, ny = metric.nx, metric.ny
    if source_mask.shape != (nx, ny):
        raise ValueError("source mask shape does not match the grid")
    if not source_mask.any():
        raise ValueError("empty source set")
    hx, hy = metric.hx, metric.hy
    slow = 1.0 / metric.c
    dist = np.full((nx, ny), np.inf)
    known = np.zeros((nx, ny), dtype=bool)
    heap = []
    sx, sy = np.nonzero(source_mask)
    for i, j in zip(sx.tolist(), sy.tolist()):
        dist[i, j] = 0.0
        heapq.heappush(heap, (0.0, i, j))

    def upwind(i, j):
        s = slow[i, j]
        terms = []
        for di, dj, h in ((1, 0, hx), (0, 1, hy)):
            best = None
            for sgn in (-1, 1):
                a, b = i + sgn * di, j + sgn * dj
                if 0 <= a < nx and 0 <= b < ny and known[a, b]:
                    d1 = dist[a, b]
                    if best is None or d1 < best[0]:
                        a2, b2 = i + 2 * sgn * di, j + 2 * sgn * dj
                        d2 = None
                        if second_order and 0 <= a2 < nx and 0 <= b2 < ny \
                                and known[a2, b2] and dist[a2, b2] <= d1:
                            d2 = dist[a2, b2]
                        best = (d1, d2)
            if best is not None:
                d1, d2 = best
                if d2 is not None:
                    terms.append((1.5 / h, (2.0 * d1 - 0.5 * d2) / h, d1))
                else:
                    terms.append((1.0 / h, d1 / h, d1))
        for use in (terms, terms[:1] if len(terms) > 1 else []):
            if not use:
                continue
            if len(use) == 2 and use[1][2] < use[0][2]:
                use = [use[1], use[0]]
            ka = sum(k * k for k, m, _ in use)
            kb = -2.0 * sum(k * m for k, m, _ in use)
            kc = sum(m * m for k, m, _ in use) - s * s
            disc = kb * kb - 4.0 * ka * kc
            if disc < 0.0:
                continue
            cand = (-kb + math.sqrt(disc)) / (2.0 * ka)
            if cand >= max(d for _, _, d in use) - 1e-12:
                return cand
        # last resort: one-sided first order
        d1 = min(d for _, _, d in terms)
        h = min(hx, hy)
        return d1 + s * h

    while heap:
        d0, i, j = heapq.heappop(heap)
        if known[i, j]:
            continue
        known[i, j] = True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < nx and 0 <= b < ny and not known[a, b]:
                cand = upwind(a, b)
                if cand < dist[a, b]:
                    dist[a, b] = cand
                    heapq.heappush(heap, (cand, a, b))
    return dist


def boundary_source_mask(metric, node_mask=None):
    """Grid mask of boundary nodes; node_mask selects a loop subset."""
    bgrid = BoundaryGrid(metric.nx, metric.ny, metric.Lx, metric.Ly)
    if node_mask is None:
        node_mask = np.ones(bgrid.count, dtype=bool)
    out = np.zeros((metric.nx, metric.ny), dtype=bool)
    sel = bgrid.index[np.asarray(node_mask, dtype=bool)]
    out[sel[:, 0], sel[:, 1]] = True
    return out


@dataclass
class InfluenceDomain:
    """Indicator of the set within metric distance tau of a source."""

    mask: np.ndarray
    tau: float
    source: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.tau < 0.0:
            raise ValueError("radius must be nonnegative")

    def contains(self, other) -> bool:
        return bool(np.all(self.mask | ~other.mask))


def influence_domain(metric, source_mask, tau) -> InfluenceDomain:
    dist = fast_marching_oracle(metric, source_mask)
    h = 0.5 * min(metric.hx, metric.hy)
    return InfluenceDomain(dist <= tau + h, float(tau), source_mask)


# ---------------------------------------------------------------------------
# degenerate one dimensional pipeline
# ---------------------------------------------------------------------------


def interval_modes(c, Lx, K):
    """Neumann eigenvalues of the interval with speed profile c."""
    c = np.asarray(c, dtype=float)
    n = c.size
    h = Lx / (n - 1)
    edge = 0.5 * (c[:-1] + c[1:]) / h
    main = np.zeros(n)
    main[:-1] += edge
    main[1:] += edge
    stiff = np.diag(main) - np.diag(edge, 1) - np.diag(edge, -1)
    m = _mass_1d(n, h) / c
    lam, _ = dense_eigh(stiff, np.diag(m))
    return np.maximum(lam[:K], 0.0)


def travel_time(c, Lx) -> float:
    c = np.asarray(c, dtype=float)
    return float(np.trapz(1.0 / c, dx=Lx / (c.size - 1)))


def travel_time_from_spectrum(lams, k_lo=5, k_hi=None) -> float:
    """Total travel time from the Weyl slope sqrt(lambda_k) ~ pi k / T."""
    lams = np.asarray(lams, dtype=float)
    if k_hi is None:
        k_hi = lams.size - 1
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    root = np.sqrt(lams[k_lo:k_hi + 1])
    slope = float(k @ root) / float(k @ k)
    return math.pi / slope


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def write_bsd_csv(path, bsd):
    header = "i,lambda," + ",".join(
        "z%d" % j for j in range(bsd.bgrid.count))
    rows = np.column_stack([np.arange(bsd.K), bsd.lambdas, bsd.traces])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write("%d," % int(row[0]) +
                     ",".join("%.12e" % v for v in row[1:]) + "\n")


def write_distances_csv(path, rset):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("probe,z_index,r\n")
        for p, vec in enumerate(rset.vectors):
            for z, r in zip(rset.z_indices, vec):
                fh.write("%d,%d,%.12e\n" % (p, int(z), r))


def write_recovery_csv(path, probes, c_true, c_est):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("probe,c_true,c_est\n")
        for p, (ct, ce) in enumerate(zip(c_true, c_est)):
            fh.write("%d,%.12e,%.12e\n" % (p, ct, ce))
