"""Finite atomic probability measures on the real line and their transforms.

Every law handled by the package (spectral laws of matrices, singular value
laws, discretized operator laws) is stored as a finite list of weighted
atoms. Symmetric laws are stored through their restriction to ``[0, inf)``.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _quadrature
from .errors import DomainError, QuadratureError

__all__ = [
    "AtomicMeasure",
    "SymmetricMeasure",
    "HalfPlanePoint",
    "cauchy_transform",
    "f_transform",
    "symmetrize",
    "levy_distance",
    "singular_value_law",
    "log_moment",
    "axis_log_integral",
]

MERGE_RTOL = 1e-12
WEIGHT_ATOL = 1e-12


class AtomicMeasure:
    """Probability measure ``sum_k w_k delta_{t_k}`` with finitely many atoms.

    Atoms closer than ``1e-12 * support_bound`` are merged and their weights
    summed. Instances are read-only.

    Parameters
    ----------
    locations : array_like
        Atom locations (any order, finite).
    weights : array_like, optional
        Positive weights summing to one. Uniform weights if omitted.
    """

    __slots__ = ("_t", "_w")

    def __init__(self, locations, weights=None):
        t = np.asarray(locations, dtype=float).ravel()
        if t.size == 0:
            raise DomainError("a measure needs at least one atom")
        if weights is None:
            w = np.full(t.size, 1.0 / t.size)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape != t.shape:
                raise DomainError("locations and weights differ in length")
        if not np.all(np.isfinite(t)):
            raise DomainError("atom locations must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise DomainError("atom weights must be strictly positive")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_ATOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        order = np.argsort(t, kind="stable")
        t, w = t[order], w[order]
        t, w = _merge(t, w)
        t.setflags(write=False)
        w.setflags(write=False)
        self._t = t
        self._w = w

    @property
    def locations(self):
        return self._t

    @property
    def weights(self):
        return self._w

    @property
    def atoms(self):
        return list(zip(self._t.tolist(), self._w.tolist()))

    @property
    def support_bound(self):
        return float(np.max(np.abs(self._t)))

    def __len__(self):
        return self._t.size

    def __repr__(self):
        if len(self) <= 4:
            body = ", ".join(f"({t:.6g}, {w:.6g})" for t, w in self.atoms)
        else:
            body = f"{len(self)} atoms in [{self._t[0]:.6g}, {self._t[-1]:.6g}]"
        return f"AtomicMeasure({body})"

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (
            self._t.shape == other._t.shape
            and np.array_equal(self._t, other._t)
            and np.array_equal(self._w, other._w)
        )

    __hash__ = None

    def mass_at(self, x, atol=0.0):
        """Total weight of atoms within ``atol`` of ``x``."""
        return float(self._w[np.abs(self._t - x) <= atol].sum())

    def moment(self, k):
        return float(np.sum(self._w * self._t**k))

    def cdf(self, x):
        """Right-continuous distribution function evaluated at ``x``."""
        cw = np.concatenate([[0.0], np.cumsum(self._w)])
        idx = np.searchsorted(self._t, np.asarray(x, dtype=float), side="right")
        return np.minimum(cw[idx], 1.0)

    def cauchy(self, z):
        """Vectorized ``sum_k w_k / (z - t_k)``; no domain checks."""
        z = np.asarray(z, dtype=complex)
        return np.sum(self._w / (z[..., None] - self._t), axis=-1)

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return -np.sum(self._w / (z[..., None] - self._t) ** 2, axis=-1)

    def is_point_mass(self):
        return len(self) == 1

    def to_json(self):
        return json.dumps({"atoms": [[repr_float(t), repr_float(w)] for t, w in self.atoms]})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else text
        try:
            atoms = data["atoms"]
        except (KeyError, TypeError) as exc:
            raise DomainError("measure JSON needs an 'atoms' list") from exc
        if not atoms:
            raise DomainError("measure JSON has no atoms")
        arr = np.asarray(atoms, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("each atom must be a [location, weight] pair")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise DomainError("atom locations must be strictly increasing")
        return cls(arr[:, 0], arr[:, 1])


def repr_float(x):
    """Round-trip a float through JSON at 17 significant digits."""
    return float(f"{x:.17g}")


def _merge(t, w):
    if t.size == 1:
        return t.copy(), w.copy()
    bound = np.max(np.abs(t))
    gap = np.diff(t)
    new = np.concatenate([[True], gap > MERGE_RTOL * bound])
    if new.all():
        return t.copy(), w.copy()
    groups = np.cumsum(new) - 1
    wm = np.bincount(groups, weights=w)
    tm = np.bincount(groups, weights=w * t) / wm
    return tm, wm


class SymmetricMeasure:
    """Even measure ``mu(B) = (half(B) + half(-B)) / 2`` stored by its half.

    ``half`` lives on ``[0, inf)``. An atom of ``half`` at zero keeps its full
    weight; an atom at ``t > 0`` with weight ``p`` becomes ``p/2`` at each of
    ``+t`` and ``-t``.
    """

    __slots__ = ("half", "_t2")

    def __init__(self, half):
        if not isinstance(half, AtomicMeasure):
            half = AtomicMeasure(*half)
        if half.locations[0] < 0.0:
            raise DomainError("the half of a symmetric measure must live on [0, inf)")
        self.half = half
        t2 = half.locations**2
        t2.setflags(write=False)
        self._t2 = t2

    @property
    def support_bound(self):
        return self.half.support_bound

    @property
    def zero_mass(self):
        return self.half.mass_at(0.0)

    def __repr__(self):
        return f"SymmetricMeasure(half={self.half!r})"

    def __eq__(self, other):
        if not isinstance(other, SymmetricMeasure):
            return NotImplemented
        return self.half == other.half

    __hash__ = None

    def is_point_mass(self):
        return len(self.half) == 1 and self.half.locations[0] == 0.0

    def full(self):
        """Return the measure as an :class:`AtomicMeasure` on the whole line."""
        t, w = self.half.locations, self.half.weights
        pos = t > 0.0
        loc = np.concatenate([-t[pos][::-1], t[~pos], t[pos]])
        wt = np.concatenate([0.5 * w[pos][::-1], w[~pos], 0.5 * w[pos]])
        return AtomicMeasure(loc, wt)

    def cdf(self, x):
        return self.full().cdf(x)

    def moment(self, k):
        if k % 2:
            return 0.0
        return self.half.moment(k)

    def cauchy(self, z):
        # z/(z^2 - t^2) keeps Re G(i eta) exactly zero
        z = np.asarray(z, dtype=complex)
        zz = z[..., None]
        return np.sum(self.half.weights * zz / (zz * zz - self._t2), axis=-1)

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        z2 = (z * z)[..., None]
        return -np.sum(self.half.weights * (z2 + self._t2) / (z2 - self._t2) ** 2, axis=-1)

    def axis_e(self, y):
        """``E(y) = F(iy)/i - y`` and its derivative for ``y > 0``.

        ``F(iy) = i (y + E(y))`` with ``E >= 0``; the excess is formed from
        positive sums only, so no cancellation occurs for large ``y``.
        """
        y = np.asarray(y, dtype=float)
        yy = y[..., None]
        d = 1.0 / (yy * yy + self._t2)
        wd = self.half.weights * d
        g = wd.sum(axis=-1)
        num = (wd * self._t2).sum(axis=-1)
        wdd = wd * d
        gp = -2.0 * y * wdd.sum(axis=-1)
        nump = -2.0 * y * (wdd * self._t2).sum(axis=-1)
        den = y * g
        e = num / den
        de = (nump - e * (g + y * gp)) / den
        return e, de

    def take(self, idx):
        return self


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point ``re + i im`` of the open upper half plane."""

    re: float
    im: float

    def __post_init__(self):
        if not (self.im > 0.0) or not math.isfinite(self.im) or not math.isfinite(self.re):
            raise DomainError(f"Im z must be positive and finite, got {self.im!r}")

    @property
    def z(self):
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z):
        if isinstance(z, HalfPlanePoint):
            return z
        z = complex(z)
        return cls(z.real, z.imag)


def cauchy_transform(mu, z):
    """Cauchy transform ``G_mu(z) = int dmu(t) / (z - t)`` at ``z`` in the upper half plane.

    Examples
    --------
    >>> cauchy_transform(AtomicMeasure([-1.0, 1.0]), 2j)
    -0.4j
    """
    z = HalfPlanePoint.of(z).z
    return complex(mu.cauchy(z))


def f_transform(mu, z):
    """Reciprocal Cauchy transform ``F_mu = 1 / G_mu``; ``Im F_mu(z) >= Im z``."""
    return 1.0 / cauchy_transform(mu, z)


def symmetrize(mu):
    """Symmetrization of a measure carried by ``[0, inf)``."""
    if isinstance(mu, SymmetricMeasure):
        return mu
    if mu.locations[0] < 0.0:
        raise DomainError("symmetrize expects a measure on [0, inf)")
    return SymmetricMeasure(mu)


def _as_line_measure(mu):
    return mu.full() if isinstance(mu, SymmetricMeasure) else mu


def _levy_ok(f, g, eps):
    # G(x) <= F(x + eps) + eps and F(x) <= G(x + eps) + eps at every jump
    gt, ft = g.locations, f.locations
    up = np.max(g.cdf(gt) - f.cdf(gt + eps))
    down = np.max(f.cdf(ft) - g.cdf(ft + eps))
    return max(up, down) <= eps


def levy_distance(mu, nu, tol=1e-10):
    """Levy distance between the distribution functions of two measures.

    Both distribution functions are step functions, so the band condition
    only has to be checked at jump points. The smallest admissible band
    width is located by bisection to ``tol``.
    """
    f, g = _as_line_measure(mu), _as_line_measure(nu)
    if f == g:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _levy_ok(f, g, mid):
            hi = mid
        else:
            lo = mid
    return hi


def singular_value_law(matrix):
    """Empirical law of the singular values of a square matrix."""
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("singular_value_law expects a square matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    return AtomicMeasure(np.maximum(s, 0.0))


_LOWER = _quadrature.lower_axis_rule()
_UPPER = _quadrature.upper_axis_rule()
LOG_MOMENT_ATOL = 1e-9


def axis_log_integral(cauchy_on_axis, atol=LOG_MOMENT_ATOL):
    """``Im int_0^1 G(i eta) d eta`` by geometric panels down to ``2^-27``.

    The piece below the last panel is approximated by ``eta_min * Im G(i eta_min)``.
    Returns ``(value, error_estimate)``; raises :class:`QuadratureError` when the
    estimate exceeds ``atol``, which happens when ``G`` blows up like ``1/eta``
    (an atom at zero).
    """
    eta = _LOWER.nodes
    g = np.array([cauchy_on_axis(e) for e in eta], dtype=complex)
    value, err = _LOWER.integrate(g.imag)
    e0 = 2.0 ** -_quadrature.ETA_FLOOR_EXPONENT
    g0 = complex(cauchy_on_axis(e0)).imag
    g1 = complex(cauchy_on_axis(2.0 * e0)).imag
    value += e0 * g0
    err += e0 * abs(g0 - g1)
    if not err <= atol:
        raise QuadratureError(
            f"eta-integral did not converge (estimated error {err:.3g})", residual=float(err)
        )
    return float(value), float(err)


def _upper_log_integral(cauchy_on_axis):
    # int_1^inf (Im G(i eta) + 1/eta) d eta, with eta = 1/t
    t = _UPPER.nodes
    eta = 1.0 / t
    g = np.array([cauchy_on_axis(e) for e in eta], dtype=complex)
    vals = (g.imag + t) / t**2
    value, err = _UPPER.integrate(vals)
    # below the last panel the integrand is linear in t to leading order
    t0 = 2.0 ** -_quadrature.ETA_FLOOR_EXPONENT
    v0 = (complex(cauchy_on_axis(1.0 / t0)).imag + t0) / t0**2
    v1 = (complex(cauchy_on_axis(0.5 / t0)).imag + 2.0 * t0) / (2.0 * t0) ** 2
    return value + 0.5 * t0 * v0, err + 0.5 * t0 * abs(v0 - 0.5 * v1)


def log_moment(mu, cauchy_on_axis=None, atol=LOG_MOMENT_ATOL):
    """``int log|u| dmu(u)`` through the cutoff identity with cutoff 1.

    ``int log|u| dmu = int log|u - i| dmu + Im int_0^1 G(i eta) d eta``.

    For a :class:`SymmetricMeasure` the first term is summed exactly over the
    atoms. For any other law (for instance a free convolution, which is not
    atomic) it is obtained as ``int_1^inf (Im G(i eta) + 1/eta) d eta``.

    Parameters
    ----------
    mu : SymmetricMeasure or object with a ``cauchy`` method
    cauchy_on_axis : callable, optional
        ``eta -> G_mu(i eta)``. Defaults to ``mu.cauchy``.
    """
    if cauchy_on_axis is None:
        cauchy_on_axis = lambda eta: mu.cauchy(1j * eta)  # noqa: E731
    lower, _ = axis_log_integral(cauchy_on_axis, atol=atol)
    if isinstance(mu, SymmetricMeasure):
        t2 = mu.half.locations**2
        upper = 0.5 * float(np.sum(mu.half.weights * np.log1p(t2)))
    else:
        upper, err = _upper_log_integral(cauchy_on_axis)
        if not err <= atol:
            raise QuadratureError(f"tail integral error {err:.3g}", residual=float(err))
    return upper + lower
