"""Subordination functions for the free additive convolution of two laws.

For probability measures ``mu1``, ``mu2`` on the line there are analytic
self-maps ``omega1``, ``omega2`` of the upper half plane with

    F_{mu1 [+] mu2}(z) = F_{mu1}(omega1(z)) = F_{mu2}(omega2(z)) = omega1 + omega2 - z.

``omega1(z)`` is the attracting fixed point of

    phi(w) = F_{mu2}(F_{mu1}(w) - w + z) - (F_{mu1}(w) - w + z) + z.

Two solvers are provided.

* Off the imaginary axis (or for non-symmetric laws) a damped fixed-point
  iteration started at ``w = z`` is combined with safeguarded Newton steps,
  and small ``Im z`` is reached by continuation from ``Im z >= 1``.
* On the imaginary axis with symmetric laws everything is purely imaginary.
  Writing ``omega_j = i y_j`` and ``F_mu(iy) = i (y + E_mu(y))`` the system
  becomes ``y1 = E2(y2) + eta``, ``y2 = E1(y1) + eta``: a scalar root problem
  on a known bracket, solved by Newton in ``log y`` with bisection fallback
  and vectorized over many laws at once (see :func:`solve_axis`).

Plain iteration contracts like ``1 - O(eta)`` near the real axis, which is why
neither path relies on it alone.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _quadrature
from .errors import BoundaryExtrapolationError, ConvergenceError, DomainError
from .measures import AtomicMeasure, HalfPlanePoint, SymmetricMeasure

__all__ = [
    "SolverSettings",
    "SubordinationResult",
    "BoundaryValue",
    "ConvolvedMeasure",
    "AtomStack",
    "AxisSolution",
    "solve",
    "solve_axis",
    "cauchy",
    "boundary_omega",
    "classify_boundary",
    "density_at",
    "bulk_test",
    "smoothed_cdf",
]

EPS = np.finfo(float).eps
ZERO_THRESHOLD = 1e-6
INFINITE_THRESHOLD = 1e6
DIVERGENCE_FLOOR = 1e4
DIVERGENCE_RATIO = 1.5


@dataclass(frozen=True)
class SolverSettings:
    """Plain configuration record for the subordination solvers.

    ``tol`` is relative to ``1 + |z|``. The dyadic ladder ``2^-k`` for
    ``k = ladder_kmin..ladder_kmax`` is used for boundary values at ``z -> 0``.
    """

    tol: float = 1e-12
    max_iter: int = 100_000
    damping: float = 1.0
    ladder_kmin: int = 10
    ladder_kmax: int = 26
    bulk_delta: float = 1e-6

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class SubordinationResult:
    omega1: complex
    omega2: complex
    residual: float
    iterations: int


@dataclass(frozen=True)
class BoundaryValue:
    """Magnitude of ``omega_j(i0+)`` and its class.

    ``classified`` is one of ``"finite_positive"``, ``"zero"``, ``"infinite"``.
    ``sequence`` holds the ladder magnitudes the value was extrapolated from.
    """

    value: float
    classified: str
    sequence: tuple = field(default=(), repr=False)

    @property
    def is_finite_positive(self):
        return self.classified == "finite_positive"


# ---------------------------------------------------------------------------
# axis laws


class AtomStack:
    """A batch of symmetric atomic laws, one per row, sharing an atom count.

    Rows shorter than the common count are padded with zero-weight atoms.

    Parameters
    ----------
    t2 : ndarray, shape (P, n)
        Squared half-atom locations.
    w : ndarray, shape (P, n)
        Half-atom weights (rows sum to one).
    """

    def __init__(self, t2, w):
        self.t2 = np.atleast_2d(np.asarray(t2, dtype=float))
        self.w = np.atleast_2d(np.asarray(w, dtype=float))
        self.support_bound = np.sqrt(self.t2.max(axis=1))
        self.zero_mass = np.where(self.t2 == 0.0, self.w, 0.0).sum(axis=1)

    @classmethod
    def from_measures(cls, measures):
        halves = [m.half if isinstance(m, SymmetricMeasure) else m for m in measures]
        n = max(len(h) for h in halves)
        t2 = np.zeros((len(halves), n))
        w = np.zeros((len(halves), n))
        for i, h in enumerate(halves):
            t2[i, : len(h)] = h.locations**2
            w[i, : len(h)] = h.weights
        return cls(t2, w)

    def __len__(self):
        return self.t2.shape[0]

    def take(self, idx):
        out = AtomStack.__new__(AtomStack)
        out.t2 = self.t2[idx]
        out.w = self.w[idx]
        out.support_bound = self.support_bound[idx]
        out.zero_mass = self.zero_mass[idx]
        return out

    def axis_e(self, y):
        y = np.asarray(y, dtype=float)
        yy = y[:, None]
        d = 1.0 / (yy * yy + self.t2)
        wd = self.w * d
        g = wd.sum(axis=1)
        num = (wd * self.t2).sum(axis=1)
        wdd = wd * d
        gp = -2.0 * y * wdd.sum(axis=1)
        nump = -2.0 * y * (wdd * self.t2).sum(axis=1)
        den = y * g
        e = num / den
        de = (nump - e * (g + y * gp)) / den
        return e, de


class _Shared:
    """Broadcast one symmetric law over a batch."""

    def __init__(self, mu):
        self.mu = mu
        self.support_bound = mu.support_bound
        self.zero_mass = getattr(mu, "zero_mass", 0.0)

    def take(self, idx):
        return self

    def axis_e(self, y):
        return self.mu.axis_e(y)


def _as_axis_law(law):
    if isinstance(law, SymmetricMeasure):
        return _Shared(law)
    if hasattr(law, "axis_e") and hasattr(law, "take"):
        return law
    raise DomainError(f"{type(law).__name__} has no imaginary-axis transform")


@dataclass
class AxisSolution:
    """Solutions ``omega_j(i eta) = i y_j`` for a batch of laws."""

    eta: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray

    @property
    def cauchy_imag(self):
        """``Im G(i eta) = -1 / (y1 + y2 - eta)``, formed without cancellation."""
        return -1.0 / (self.e1 + self.e2 + self.eta)


def solve_axis(law1, law2, eta, y0=None, rtol=1e-14, max_iter=400):
    """Solve the subordination system at ``z = i eta`` for a batch of laws.

    ``law1`` and ``law2`` are :class:`SymmetricMeasure` (shared by the whole
    batch) or batch laws with ``axis_e``/``take`` (see :class:`AtomStack`).
    The fixed point ``y1`` of ``y -> E2(E1(y) + eta) + eta`` is unique in
    ``[eta, eta + R2^2/eta]`` where ``R2`` bounds the support of ``law2``.

    Parameters
    ----------
    eta : float or ndarray
        Positive heights, scalar or one per batch row.
    y0 : ndarray, optional
        Warm start for ``y1``.
    """
    law1, law2 = _as_axis_law(law1), _as_axis_law(law2)
    sizes = [len(l) for l in (law1, law2) if not isinstance(l, _Shared)]
    if y0 is not None:
        sizes.append(np.size(y0))
    if np.ndim(eta):
        sizes.append(np.size(eta))
    P = max(sizes) if sizes else 1
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (P,)).copy()
    if np.any(eta <= 0.0):
        raise DomainError("eta must be positive")
    eta_full = eta.copy()
    r2 = np.broadcast_to(np.asarray(law2.support_bound, dtype=float), (P,))
    lo = eta.copy()
    hi = eta + r2 * r2 / eta + 1.0
    if y0 is None:
        y = np.sqrt(lo * hi)
    else:
        y = np.clip(np.asarray(y0, dtype=float), lo, hi)
    out_y = np.empty(P)
    out_it = np.zeros(P, dtype=int)
    idx = np.arange(P)
    l1, l2 = law1, law2
    for it in range(1, max_iter + 1):
        e1, de1 = l1.axis_e(y)
        e2, de2 = l2.axis_e(e1 + eta)
        psi = e2 + eta - y
        dpsi = de2 * de1 - 1.0
        pos = psi > 0.0
        lo = np.where(pos, np.maximum(lo, y), lo)
        hi = np.where(pos, hi, np.minimum(hi, y))
        du = -psi / (dpsi * y)
        cand = y * np.exp(np.clip(du, -700.0, 700.0))
        inside = (cand > lo) & (cand < hi)
        new = np.where(inside, cand, np.sqrt(lo * hi))
        noise = 8.0 * EPS * (y + e2 + eta) / (np.abs(dpsi) * y)
        done = inside & (np.abs(du) <= np.maximum(rtol, noise))
        done |= hi <= lo * (1.0 + 4.0 * EPS)
        out_y[idx] = new
        out_it[idx] = it
        keep = ~done
        if not keep.any():
            break
        y, lo, hi, eta, idx = new[keep], lo[keep], hi[keep], eta[keep], idx[keep]
        l1, l2 = l1.take(keep), l2.take(keep)
    else:
        raise ConvergenceError(
            f"axis solver did not converge for {idx.size} of {P} points", iterations=max_iter
        )
    return _finish_axis(law1, law2, out_y, out_it, eta_full)


def _finish_axis(law1, law2, y1, iterations, eta):
    e1, _ = law1.axis_e(y1)
    y2 = e1 + eta
    e2, _ = law2.axis_e(y2)
    residual = np.abs(e2 + eta - y1)
    return AxisSolution(
        eta=eta, y1=y1, y2=y2, e1=e1, e2=e2, residual=residual, iterations=iterations
    )


# ---------------------------------------------------------------------------
# general complex solver


def _check_law(mu, name):
    if not isinstance(mu, (AtomicMeasure, SymmetricMeasure)):
        raise DomainError(f"{name} must be an AtomicMeasure or SymmetricMeasure")
    if mu.is_point_mass():
        raise DomainError(f"{name} is a point mass; shift by a constant instead")


def _f_and_derivative(mu, w):
    g = mu.cauchy(w)
    dg = mu.cauchy_derivative(w)
    return 1.0 / g, -dg / (g * g)


def _phi(mu1, mu2, w, z):
    f1, df1 = _f_and_derivative(mu1, w)
    v = f1 - w + z
    f2, df2 = _f_and_derivative(mu2, v)
    phi = f2 - v + z
    dphi = (df2 - 1.0) * (df1 - 1.0)
    return phi, dphi, f1, f2, v


def _residual(mu1, mu2, w, z):
    phi, _, f1, f2, v = _phi(mu1, mu2, w, z)
    return np.abs(f1 - f2) + np.abs(w + v - z - f1), phi, v


def _iterate_complex(mu1, mu2, z, w, settings):
    """Damped fixed-point iteration with safeguarded Newton steps, vectorized.

    A Newton candidate is accepted when it stays above ``Im z`` and lowers the
    residual; otherwise the damped step ``w + theta (phi(w) - w)`` is taken and
    ``theta`` is halved whenever the residual grows.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex).copy()
    theta = np.full(w.shape, float(settings.damping))
    res, phi, _ = _residual(mu1, mu2, w, z)
    scale = 1.0 + np.abs(z)
    iters = np.zeros(w.shape, dtype=int)
    active = res > settings.tol * scale
    it = 0
    while active.any():
        it += 1
        if it > settings.max_iter:
            raise ConvergenceError(
                "subordination iteration exceeded max_iter",
                residual=float(np.max(res[active] / scale[active])),
                iterations=it - 1,
            )
        wa, za = w[active], z[active]
        ph, dph, _, _, _ = _phi(mu1, mu2, wa, za)
        psi = ph - wa
        newton = wa - psi / (dph - 1.0)
        ok = np.isfinite(newton) & (newton.imag >= za.imag * (1.0 - 1e-12))
        newton = np.where(ok, newton, wa)
        r_new, _, _ = _residual(mu1, mu2, newton, za)
        ra = res[active]
        take_newton = ok & (r_new < ra)
        th = theta[active]
        damped = wa + th * psi
        r_damp, _, _ = _residual(mu1, mu2, damped, za)
        worse = ~take_newton & (r_damp > ra)
        th = np.where(worse, 0.5 * th, th)
        w_next = np.where(take_newton, newton, np.where(worse, wa, damped))
        r_next = np.where(take_newton, r_new, np.where(worse, ra, r_damp))
        step = np.abs(w_next - wa)
        w[active] = w_next
        res[active] = r_next
        theta[active] = np.maximum(th, 1e-12)
        iters[active] += 1
        stalled = step <= 4.0 * EPS * np.abs(wa)
        conv = (r_next <= settings.tol * scale[active]) | (stalled & ~worse)
        sub = np.flatnonzero(active)
        active[sub[conv]] = False
    return w, res, iters


def _continuation_heights(im, top=1.0):
    """Heights ``im * 2^j`` from above ``top`` down to ``im``."""
    levels = [im]
    h = im
    while h < top:
        h *= 2.0
        levels.append(h)
    return levels[::-1]


def _solve_complex(mu1, mu2, z, settings, w0=None):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    im = z.imag
    top = max(1.0, 2.0 * (mu1.support_bound + mu2.support_bound))
    n_levels = int(np.max(np.ceil(np.log2(np.maximum(top / im, 1.0))))) + 1
    w = z.real + 1j * np.maximum(im, top) if w0 is None else np.asarray(w0, dtype=complex)
    total = np.zeros(z.shape, dtype=int)
    for j in range(n_levels - 1, -1, -1):
        zj = z.real + 1j * np.maximum(im, im * 2.0**j)
        if w0 is None and j == n_levels - 1:
            w = zj.copy()
        w = np.where(w.imag < zj.imag, w.real + 1j * zj.imag, w)
        w, res, it = _iterate_complex(mu1, mu2, zj, w, settings)
        total += it
    _, _, f1, _, v = _phi(mu1, mu2, w, z)
    return w, v, res, total


def solve(mu1, mu2, z, settings=DEFAULT_SETTINGS):
    """Subordination functions ``(omega1(z), omega2(z))`` of ``mu1 [+] mu2``.

    Neither law may be a point mass. On the imaginary axis with two symmetric
    laws the result is exactly purely imaginary.

    Examples
    --------
    >>> b = SymmetricMeasure(AtomicMeasure([1.0]))
    >>> r = solve(b, b, 1j)
    >>> round(r.omega1.imag, 12)
    1.618033988749
    """
    _check_law(mu1, "mu1")
    _check_law(mu2, "mu2")
    z = HalfPlanePoint.of(z).z
    if z.real == 0.0 and isinstance(mu1, SymmetricMeasure) and isinstance(mu2, SymmetricMeasure):
        sol = solve_axis(mu1, mu2, z.imag)
        scale = 1.0 + abs(z)
        if sol.residual[0] > max(settings.tol, 1e-10) * scale * max(1.0, sol.y1[0]):
            raise ConvergenceError("axis solver residual too large", residual=float(sol.residual[0]))
        return SubordinationResult(
            omega1=complex(0.0, sol.y1[0]),
            omega2=complex(0.0, sol.y2[0]),
            residual=float(sol.residual[0]),
            iterations=int(sol.iterations[0]),
        )
    w, v, res, it = _solve_complex(mu1, mu2, z, settings)
    return SubordinationResult(
        omega1=complex(w[0]), omega2=complex(v[0]), residual=float(res[0]), iterations=int(it[0])
    )


# ---------------------------------------------------------------------------
# convolved measure


class ConvolvedMeasure:
    """Handle onto ``mu1 [+] mu2`` evaluated through its subordination functions.

    Parameters
    ----------
    mu1, mu2 : SymmetricMeasure or AtomicMeasure
        Neither may be a point mass.
    settings : SolverSettings, optional
    """

    def __init__(self, mu1, mu2, settings=DEFAULT_SETTINGS):
        _check_law(mu1, "mu1")
        _check_law(mu2, "mu2")
        self.mu1 = mu1
        self.mu2 = mu2
        self.settings = settings

    @property
    def symmetric(self):
        return isinstance(self.mu1, SymmetricMeasure) and isinstance(self.mu2, SymmetricMeasure)

    @property
    def support_bound(self):
        return self.mu1.support_bound + self.mu2.support_bound

    def __repr__(self):
        return f"ConvolvedMeasure({self.mu1!r}, {self.mu2!r})"

    def solve(self, z):
        return solve(self.mu1, self.mu2, z, self.settings)

    def cauchy(self, z):
        """``G(z) = 1 / F_{mu1}(omega1(z))`` for scalar or array ``z``."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        if np.any(flat.imag <= 0.0):
            raise DomainError("Im z must be positive")
        out = np.empty(flat.shape, dtype=complex)
        on_axis = (flat.real == 0.0) & self.symmetric
        if on_axis.any():
            out[on_axis] = self.cauchy_on_axis(flat[on_axis].imag)
        rest = ~on_axis
        if rest.any():
            w, _, _, _ = _solve_complex(self.mu1, self.mu2, flat[rest], self.settings)
            out[rest] = self.mu1.cauchy(w)
        return out.reshape(z.shape) if z.ndim else complex(out[0])

    def cauchy_on_axis(self, eta):
        """``G(i eta)`` for an array of heights, solved with descending warm starts."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        order = np.argsort(-eta)
        out = np.empty(eta.shape)
        y = None
        for i in order:
            sol = solve_axis(self.mu1, self.mu2, eta[i], y0=y)
            y = sol.y1
            out[i] = sol.cauchy_imag[0]
        return 1j * out

    def omega_ladder(self, etas):
        """Axis solutions at descending heights, warm-started down the ladder."""
        sols = []
        y = None
        for e in etas:
            sol = solve_axis(self.mu1, self.mu2, e, y0=y)
            y = sol.y1
            sols.append(sol)
        return sols

    def density(self, x):
        return density_at(self, x)


def cauchy(c, z):
    """Cauchy transform of the convolution ``c`` at ``z`` in the upper half plane."""
    z = HalfPlanePoint.of(z).z
    return c.cauchy(z)


# ---------------------------------------------------------------------------
# boundary values at z -> 0


def classify_boundary(sequence):
    """Extrapolate a dyadic ladder of magnitudes ``|omega(i 2^-k)|`` to ``eta = 0``.

    The last three terms are combined by Aitken's delta-squared rule, which is
    exact for ``L + c q^k``; this covers analytic behaviour (``q = 1/2``) and
    power-law decay to zero at singular points (``q = 2^-p``).

    Returns
    -------
    BoundaryValue
    """
    m = np.asarray(sequence, dtype=float)
    seq = tuple(m.tolist())
    last = m[-1]
    if not np.isfinite(last) or last > INFINITE_THRESHOLD:
        return BoundaryValue(np.inf, "infinite", seq)
    ratios = m[1:] / m[:-1]
    if last > DIVERGENCE_FLOOR and np.all(ratios[-3:] > DIVERGENCE_RATIO):
        return BoundaryValue(np.inf, "infinite", seq)
    d = np.diff(m)
    scale = max(last, 1e-300)
    tail = d[-4:]
    big = np.abs(tail) > 1e-8 * scale
    signs = np.sign(tail[big])
    if signs.size >= 3 and np.any(signs[1:] != signs[:-1]):
        raise BoundaryExtrapolationError(f"ladder oscillates: {m[-5:]}")
    d1, d2 = d[-2], d[-1]
    denom = d2 - d1
    if d1 != 0.0 and 0.0 < d2 / d1 < 1.0 and denom != 0.0:
        limit = last - d2 * d2 / denom
    else:
        limit = last
    limit = max(limit, 0.0)
    if limit < ZERO_THRESHOLD:
        return BoundaryValue(0.0, "zero", seq)
    if limit > INFINITE_THRESHOLD:
        return BoundaryValue(np.inf, "infinite", seq)
    return BoundaryValue(float(limit), "finite_positive", seq)


def _ladder(settings, kmin=0):
    return _quadrature.eta_ladder(kmin, settings.ladder_kmax)


def boundary_omega(c, j):
    """Boundary value ``omega_j(0)`` of a symmetric convolution, with its class."""
    if j not in (1, 2):
        raise DomainError("j must be 1 or 2")
    if not c.symmetric:
        raise DomainError("boundary values are defined here for symmetric laws only")
    etas = _ladder(c.settings)
    sols = c.omega_ladder(etas)
    k0 = c.settings.ladder_kmin
    mags = [(s.y1 if j == 1 else s.y2)[0] for s in sols[k0:]]
    return classify_boundary(mags)


# ---------------------------------------------------------------------------
# density and bulk


def _ladder_cauchy(c, x):
    """``G(x + i 2^-k)`` for ``k = 0..ladder_kmax``, shape ``(K, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    etas = _ladder(c.settings)
    out = np.empty((etas.size, x.size), dtype=complex)
    w = None
    for k, e in enumerate(etas):
        z = x + 1j * e
        w, _, _, _ = _solve_complex(c.mu1, c.mu2, z, c.settings, w0=w)
        out[k] = c.mu1.cauchy(w)
    return etas, out


def density_at(c, x):
    """Density of ``c`` at ``x`` by Stieltjes inversion at ``eta = 2^-26``.

    One Richardson step against ``eta = 2^-25`` removes the linear term.
    Scalar in, scalar out.
    """
    scalar = np.ndim(x) == 0
    _, g = _ladder_cauchy(c, x)
    rho = -g.imag / np.pi
    out = 2.0 * rho[-1] - rho[-2]
    return float(out[0]) if scalar else out


def bulk_test(c, x):
    """True when ``x`` is in the bulk of ``c``.

    The Richardson density must lie in ``(delta, 1/delta)`` and ``|Im G|``
    must not keep growing down the ladder; growth by more than 5% on each of
    the last four halvings signals an atom or a divergent density.
    """
    scalar = np.ndim(x) == 0
    _, g = _ladder_cauchy(c, x)
    im = np.abs(g.imag)
    rho = -g.imag / np.pi
    dens = 2.0 * rho[-1] - rho[-2]
    delta = c.settings.bulk_delta
    growth = im[-4:] / im[-5:-1]
    singular = np.all(growth > 1.05, axis=0)
    out = (dens > delta) & (dens < 1.0 / delta) & ~singular
    return bool(out[0]) if scalar else out


def smoothed_cdf(c, x, eps=1e-4):
    """CDF of ``c`` convolved with the Cauchy kernel of width ``eps`` on a sorted grid.

    The density ``-Im G(x + i eps) / pi`` is integrated by the trapezoid rule
    from ``x[0]``, which should lie left of the support. The smoothing moves
    the CDF by ``O(eps log(1/eps))``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(np.diff(x) <= 0.0):
        raise DomainError("x must be a strictly increasing 1-d grid")
    if not eps > 0.0:
        raise DomainError("eps must be positive")
    d = -np.asarray(c.cauchy(x + 1j * eps)).imag / np.pi
    return np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
