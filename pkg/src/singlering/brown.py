"""Brown measure of ``y = T + a`` with ``T`` R-diagonal, on a lattice of points.

For every ``lam`` the singular value law of ``y - lam`` is the free convolution
of the symmetrized laws of ``|a - lam|`` and ``sigma = |T|``. Everything is
computed on the imaginary axis, where both subordination functions are purely
imaginary:

* the log-potential ``h(lam) = int log|u| d(mu1 [+] mu2)(u)`` through the
  cutoff identity with cutoff 1,
* the region label from the boundary values ``omega_j(lam, 0)``,
* the density ``(1/2pi) Lap h`` by the 5-point stencil.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _quadrature
from .errors import BoundaryExtrapolationError, DomainError
from .measures import AtomicMeasure, SymmetricMeasure, repr_float, singular_value_law
from .subordination import (
    DEFAULT_SETTINGS,
    AtomStack,
    BoundaryValue,
    SolverSettings,
    classify_boundary,
    solve_axis,
)

__all__ = [
    "OperatorModel",
    "HaarModulusLaw",
    "RegionLabel",
    "GridSpec",
    "BrownField",
    "l2_data",
    "classify",
    "log_potential",
    "brown_field",
    "d_epsilon",
    "exterior_cauchy_bound",
    "OMEGA_INTERIOR",
    "SINGULAR_S",
    "EXTERIOR",
]

OMEGA_INTERIOR = "omega_interior"
SINGULAR_S = "singular_S"
EXTERIOR = "exterior"
LABEL_CODES = {EXTERIOR: 0, OMEGA_INTERIOR: 1, SINGULAR_S: 2}
LABEL_NAMES = {v: k for k, v in LABEL_CODES.items()}

#: potential values below this are reported as ``-inf``
POTENTIAL_FLOOR = -1e3
HAAR_ATOMS = 4096
KINDS = ("scalar_zero", "hermitian", "haar_unitary", "normal_from_matrix", "general_from_matrix")


# ---------------------------------------------------------------------------
# the |e^{i theta} - lam| family


class HaarModulusLaw:
    """Symmetrized law of ``|u - lam|``, ``u`` Haar unitary, for a batch of ``|lam| = r``.

    Averaging over the angle gives the closed forms

    ``int y / (y^2 + t^2) = y / D``,  ``D = sqrt((y^2 + (1-r)^2)(y^2 + (1+r)^2))``

    so ``E(y) = D/y - y`` needs no discretization. The excess is written as
    ``(2 y^2 (1 + r^2) + (1 - r^2)^2) / (y (D + y^2))`` to avoid cancellation.
    """

    def __init__(self, r):
        self.r = np.atleast_1d(np.asarray(r, dtype=float))
        self.support_bound = 1.0 + self.r
        self.zero_mass = np.zeros_like(self.r)

    def __len__(self):
        return self.r.size

    def take(self, idx):
        return HaarModulusLaw(self.r[idx])

    def axis_e(self, y):
        y = np.asarray(y, dtype=float)
        r = self.r
        s = 1.0 + r * r
        c = (1.0 - r * r) ** 2
        y2 = y * y
        a = y2 + s
        d = np.sqrt((y2 + (1.0 - r) ** 2) * (y2 + (1.0 + r) ** 2))
        num = 2.0 * y2 * s + c
        den = y * (d + y2)
        e = num / den
        dd = 2.0 * y * a / d
        dden = d + y2 + y * (dd + 2.0 * y)
        de = (4.0 * y * s * den - num * dden) / (den * den)
        return e, de


def haar_modulus_atoms(lam, n=HAAR_ATOMS):
    """Quantile discretization of the law of ``|e^{i theta} - lam|`` with ``n`` atoms."""
    theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    return AtomicMeasure(np.abs(np.exp(1j * theta) - lam))


# ---------------------------------------------------------------------------
# operator model


@dataclass(frozen=True)
class OperatorModel:
    """Laws of ``sigma = |T|`` and of the deterministic part ``a``.

    Parameters
    ----------
    sigma_law : AtomicMeasure
        Law of ``sigma`` on ``[0, inf)``; must not be the point mass at 0.
    a_kind : str
        One of ``scalar_zero``, ``hermitian``, ``haar_unitary``,
        ``normal_from_matrix``, ``general_from_matrix``.
    a_atoms : AtomicMeasure, optional
        Spectral law of ``a`` for ``hermitian``.
    matrix : ndarray, optional
        Matrix for the ``*_from_matrix`` kinds.
    n_atoms : int
        Atom count when the Haar family is discretized.
    """

    sigma_law: AtomicMeasure
    a_kind: str = "scalar_zero"
    a_atoms: AtomicMeasure = None
    matrix: np.ndarray = field(default=None, repr=False, compare=False)
    n_atoms: int = HAAR_ATOMS

    def __post_init__(self):
        if not isinstance(self.sigma_law, AtomicMeasure):
            raise DomainError("sigma_law must be an AtomicMeasure")
        if self.sigma_law.locations[0] < 0.0:
            raise DomainError("sigma_law must live on [0, inf)")
        if self.sigma_law.is_point_mass() and self.sigma_law.locations[0] == 0.0:
            raise DomainError("sigma_law is the point mass at 0")
        if self.a_kind not in KINDS:
            raise DomainError(f"unknown a_kind {self.a_kind!r}")
        if self.a_kind == "hermitian" and not isinstance(self.a_atoms, AtomicMeasure):
            raise DomainError("hermitian a needs a_atoms")
        if self.a_kind.endswith("_from_matrix"):
            m = np.asarray(self.matrix)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DomainError(f"{self.a_kind} needs a square matrix")
            object.__setattr__(self, "matrix", m)
            if self.a_kind == "normal_from_matrix":
                object.__setattr__(self, "_eigs", np.linalg.eigvals(m))

    # -- constructors
    @classmethod
    def scalar_zero(cls, sigma_law):
        return cls(sigma_law, "scalar_zero")

    @classmethod
    def hermitian(cls, sigma_law, a_atoms):
        return cls(sigma_law, "hermitian", a_atoms=a_atoms)

    @classmethod
    def haar_unitary(cls, sigma_law, n_atoms=HAAR_ATOMS):
        return cls(sigma_law, "haar_unitary", n_atoms=n_atoms)

    @classmethod
    def normal_from_matrix(cls, sigma_law, matrix):
        return cls(sigma_law, "normal_from_matrix", matrix=matrix)

    @classmethod
    def general_from_matrix(cls, sigma_law, matrix):
        return cls(sigma_law, "general_from_matrix", matrix=matrix)

    # -- laws
    @property
    def rotation_invariant(self):
        return self.a_kind in ("scalar_zero", "haar_unitary")

    @property
    def a_bound(self):
        if self.a_kind == "scalar_zero":
            return 0.0
        if self.a_kind == "haar_unitary":
            return 1.0
        if self.a_kind == "hermitian":
            return self.a_atoms.support_bound
        if self.a_kind == "normal_from_matrix":
            return float(np.max(np.abs(self._eigs)))
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def sigma_bound(self):
        return self.sigma_law.support_bound

    def spectral_points(self):
        """Atoms ``(x_k, w_k)`` of the spectral law of a normal ``a``, or None."""
        if self.a_kind == "scalar_zero":
            return np.zeros(1, dtype=complex), np.ones(1)
        if self.a_kind == "hermitian":
            return self.a_atoms.locations.astype(complex), self.a_atoms.weights
        if self.a_kind == "normal_from_matrix":
            n = self._eigs.size
            return self._eigs, np.full(n, 1.0 / n)
        return None

    def abs_law(self, lam):
        """Law of ``|a - lam|`` as an :class:`AtomicMeasure`."""
        lam = complex(lam)
        if self.a_kind == "haar_unitary":
            return haar_modulus_atoms(lam, self.n_atoms)
        if self.a_kind == "general_from_matrix":
            n = self.matrix.shape[0]
            return singular_value_law(self.matrix - lam * np.eye(n))
        x, w = self.spectral_points()
        return AtomicMeasure(np.abs(x - lam), w)

    def axis_laws(self, lams):
        """Batch law of ``|a - lam|`` usable by the axis solver."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        if self.a_kind == "haar_unitary":
            return HaarModulusLaw(np.abs(lams))
        if self.a_kind == "general_from_matrix":
            n = self.matrix.shape[0]
            s = np.stack([np.linalg.svd(self.matrix - l * np.eye(n), compute_uv=False) for l in lams])
            return AtomStack(s * s, np.full(s.shape, 1.0 / n))
        x, w = self.spectral_points()
        t2 = np.abs(x[None, :] - lams[:, None]) ** 2
        return AtomStack(t2, np.broadcast_to(w, t2.shape))

    def to_dict(self):
        out = {"a_kind": self.a_kind, "sigma_law": [list(a) for a in self.sigma_law.atoms]}
        if self.a_kind == "hermitian":
            out["a_atoms"] = [list(a) for a in self.a_atoms.atoms]
        if self.a_kind == "haar_unitary":
            out["n_atoms"] = self.n_atoms
        if self.matrix is not None:
            m = np.asarray(self.matrix)
            out["matrix_shape"] = list(m.shape)
        return out


def _second_moments(x, w, lam):
    d2 = np.abs(x - lam) ** 2
    m2 = float(np.sum(w * d2))
    with np.errstate(divide="ignore"):
        inv = float(np.sum(w / d2)) if np.all(d2 > 0.0) else math.inf
    return m2, inv


def l2_data(m, lam):
    """``(|a - lam|_2, |(a - lam)^-1|_2, |T|_2, |T^-1|_2)`` in the trace L2 norm.

    Examples
    --------
    >>> m = OperatorModel.scalar_zero(AtomicMeasure([1.0]))
    >>> l2_data(m, 2.0)
    (2.0, 0.5, 1.0, 1.0)
    """
    lam = complex(lam)
    if m.a_kind == "haar_unitary":
        r2 = abs(lam) ** 2
        m2 = 1.0 + r2
        inv = 1.0 / abs(1.0 - r2) if r2 != 1.0 else math.inf
    elif m.a_kind == "general_from_matrix":
        s = np.linalg.svd(m.matrix - lam * np.eye(m.matrix.shape[0]), compute_uv=False)
        m2, inv = _second_moments(s, np.full(s.size, 1.0 / s.size), 0.0)
    else:
        x, w = m.spectral_points()
        m2, inv = _second_moments(x, w, lam)
    s, sw = m.sigma_law.locations, m.sigma_law.weights
    t2, tinv = _second_moments(s, sw, 0.0)
    return (math.sqrt(m2), math.sqrt(inv), math.sqrt(t2), math.sqrt(tinv))


def moment_label(m, lam):
    """Membership of the closed region ``|(a-lam)^-1| |T| >= 1, |a-lam| |T^-1| >= 1``."""
    na, ia, nt, it = l2_data(m, lam)
    inside = ia * nt >= 1.0 and na * it >= 1.0
    return OMEGA_INTERIOR if inside else EXTERIOR


# ---------------------------------------------------------------------------
# region labels


@dataclass(frozen=True)
class RegionLabel:
    """Region of a point with the boundary values that decided it.

    ``moment_agrees`` compares with the moment characterization of the closed
    region; it is a diagnostic only.
    """

    label: str
    omega1_0: BoundaryValue
    omega2_0: BoundaryValue
    moment_agrees: bool = True


def trichotomy(b1, b2):
    """Label from the two boundary classes, or None when they fit no case."""
    c1, c2 = b1.classified, b2.classified
    if c1 == "infinite" or c2 == "infinite":
        return EXTERIOR
    if c1 == "zero" and c2 == "zero":
        return SINGULAR_S
    if c1 == "finite_positive" and c2 == "finite_positive":
        return OMEGA_INTERIOR
    return None


# ---------------------------------------------------------------------------
# batched axis sweep


_LOWER = _quadrature.lower_axis_rule()
_UPPER = _quadrature.upper_axis_rule()
_E0 = 2.0 ** -_quadrature.ETA_FLOOR_EXPONENT


def _sweep_heights(settings):
    ladder = _quadrature.eta_ladder(0, settings.ladder_kmax)
    extra = np.array([_E0, 2.0 * _E0, 1.0 / _E0, 0.5 / _E0])
    all_eta = np.concatenate([1.0 / _UPPER.nodes, _LOWER.nodes, ladder, extra])
    uniq, inv = np.unique(all_eta, return_inverse=True)
    return uniq[::-1], inv, ladder


@dataclass
class AxisSweep:
    """Results of one descending sweep for a batch of points.

    ``potential`` is NaN where the lower integral failed its error test
    without an atom at zero; ``-inf`` where an atom at zero makes it diverge.
    """

    potential: np.ndarray
    potential_error: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    cauchy_ladder: np.ndarray
    zero_atom: np.ndarray


def axis_sweep(law1, law2, settings=DEFAULT_SETTINGS, atol=1e-9):
    """Solve down the axis for a batch and integrate the log-potential.

    Parameters
    ----------
    law1 : batch law (``AtomStack`` or ``HaarModulusLaw``)
        Law of ``|a - lam|`` per point.
    law2 : SymmetricMeasure
        Law of ``sigma``.
    """
    heights, inv, ladder = _sweep_heights(settings)
    P = len(law1)
    im_g = np.empty((P, heights.size))
    esum = np.empty((P, heights.size))
    y = None
    lset = {float(e): k for k, e in enumerate(ladder)}
    y1 = np.empty((P, ladder.size))
    y2 = np.empty((P, ladder.size))
    for j, eta in enumerate(heights):
        sol = solve_axis(law1, law2, eta, y0=y)
        y = sol.y1
        im_g[:, j] = sol.cauchy_imag
        esum[:, j] = sol.e1 + sol.e2
        k = lset.get(float(eta))
        if k is not None:
            y1[:, k] = sol.y1
            y2[:, k] = sol.y2
    col = heights.size - 1 - inv  # heights are descending
    nu, nl, nlad = _UPPER.nodes.size, _LOWER.nodes.size, ladder.size
    c_up = col[:nu]
    c_lo = col[nu: nu + nl]
    c_lad = col[nu + nl: nu + nl + nlad]
    c_e0, c_e1, c_t0, c_t1 = col[-4:]
    t = _UPPER.nodes
    eta_up = 1.0 / t
    # Im G + 1/eta, formed as (e1 + e2) / (eta (e1 + e2 + eta)) without cancellation
    s_up = esum[:, c_up]
    upper_vals = s_up / (eta_up * (s_up + eta_up)) / t**2
    upper, up_err = _UPPER.integrate(upper_vals)
    # linear tail below the last t-panel
    s0, s1 = esum[:, c_t0], esum[:, c_t1]
    v0 = s0 / (s0 + 1.0 / _E0) / _E0
    v1 = s1 / (s1 + 0.5 / _E0) / (2.0 * _E0)
    upper = upper + 0.5 * _E0 * v0
    up_err = up_err + 0.5 * _E0 * np.abs(v0 - 0.5 * v1)
    lower, lo_err = _LOWER.integrate(im_g[:, c_lo])
    g0, g1 = im_g[:, c_e0], im_g[:, c_e1]
    lower = lower + _E0 * g0
    lo_err = lo_err + _E0 * np.abs(g0 - g1)
    pot = upper + lower
    err = up_err + lo_err
    atom = -_E0 * g0  # eta |Im G| at the smallest height
    zero_atom = atom > settings.bulk_delta
    bad = ~(err <= atol)
    pot = np.where(bad & zero_atom, -np.inf, pot)
    pot = np.where(bad & ~zero_atom, np.nan, pot)
    pot = np.where(pot < POTENTIAL_FLOOR, -np.inf, pot)
    return AxisSweep(
        potential=pot,
        potential_error=err,
        y1=y1,
        y2=y2,
        cauchy_ladder=im_g[:, c_lad],
        zero_atom=zero_atom,
    )


def _boundary_pair(sweep, i, settings):
    k0 = settings.ladder_kmin
    b1 = classify_boundary(sweep.y1[i, k0:])
    b2 = classify_boundary(sweep.y2[i, k0:])
    return b1, b2


def _sigma_measure(m):
    return SymmetricMeasure(m.sigma_law)


def _label_points(m, lams, sweep, settings, strict=True):
    """Region labels and diagnostics for every point of a sweep."""
    labels = np.empty(len(lams), dtype=object)
    flags = np.zeros(len(lams), dtype=bool)
    failed = np.zeros(len(lams), dtype=bool)
    for i, lam in enumerate(lams):
        ml = moment_label(m, lam)
        try:
            b1, b2 = _boundary_pair(sweep, i, settings)
            lab = trichotomy(b1, b2)
        except BoundaryExtrapolationError:
            if strict:
                raise
            b1 = b2 = BoundaryValue(math.nan, "undetermined")
            lab = None
        if lab is None:
            failed[i] = True
            lab = ml
        flags[i] = (lab == SINGULAR_S) or (lab == ml)
        labels[i] = RegionLabel(lab, b1, b2, moment_agrees=bool(flags[i]))
    return labels, failed


def classify(m, lam, settings=DEFAULT_SETTINGS):
    """Region label of ``lam`` from the boundary values of both subordination functions.

    The label is cross-checked against the moment inequalities of the closed
    region; ``RegionLabel.moment_agrees`` reports the comparison.

    Examples
    --------
    >>> sig = AtomicMeasure([0.5, 1.0])
    >>> classify(OperatorModel.scalar_zero(sig), 0.7).label
    'omega_interior'
    """
    lams = np.array([complex(lam)])
    sweep = axis_sweep(m.axis_laws(lams), _sigma_measure(m), settings)
    labels, _ = _label_points(m, lams, sweep, settings, strict=True)
    return labels[0]


def log_potential(m, lam, settings=DEFAULT_SETTINGS):
    """``h(lam) = tau log|y - lam|``; ``-inf`` where the integral diverges.

    Examples
    --------
    >>> m = OperatorModel.scalar_zero(AtomicMeasure([1.0]))
    >>> round(log_potential(m, 2.0), 9)
    0.693147181
    """
    lams = np.array([complex(lam)])
    sweep = axis_sweep(m.axis_laws(lams), _sigma_measure(m), settings)
    return float(sweep.potential[0])


# ---------------------------------------------------------------------------
# grid and field


@dataclass(frozen=True)
class GridSpec:
    """Square lattice ``center + h (i + j sqrt(-1))`` of ``n x n`` nodes."""

    center: complex = 0j
    side: float = 3.0
    n: int = 201

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("grid needs at least 3 nodes per side")
        if not self.side > 0.0:
            raise DomainError("grid side must be positive")

    @classmethod
    def default_for(cls, m, n=201):
        """Centered square of side ``2 (|a| bound + |sigma| bound) + 1``."""
        return cls(0j, 2.0 * (m.a_bound + m.sigma_bound) + 1.0, n)

    @property
    def spacing(self):
        return self.side / (self.n - 1)

    @property
    def axes(self):
        off = (np.arange(self.n) - (self.n - 1) / 2.0) * self.spacing
        return self.center.real + off, self.center.imag + off

    def nodes(self):
        """Complex node array of shape ``(n, n)`` indexed ``[row (imag), col (real)]``."""
        re, im = self.axes
        return re[None, :] + 1j * im[:, None]

    def to_dict(self):
        return {"center": [self.center.real, self.center.imag], "side": self.side, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        c = d.get("center", [0.0, 0.0])
        return cls(complex(c[0], c[1]), float(d.get("side", 3.0)), int(d.get("n", 201)))


@dataclass
class BrownField:
    """Potential, density and labels on a :class:`GridSpec` lattice.

    ``density`` is zero on the outer frame and at nodes whose stencil touches
    a non-finite potential. ``atoms`` maps S nodes to their mass deficit.
    """

    grid: GridSpec
    potential: np.ndarray
    density: np.ndarray
    labels: np.ndarray
    atoms: dict
    model: OperatorModel = None
    settings: SolverSettings = DEFAULT_SETTINGS
    flags: dict = field(default_factory=dict)

    @property
    def cell_area(self):
        return self.grid.spacing**2

    @property
    def continuous_mass(self):
        return float(np.sum(self.density) * self.cell_area)

    @property
    def total_mass(self):
        return self.continuous_mass + float(sum(self.atoms.values()))

    def label_names(self):
        return np.vectorize(LABEL_NAMES.get)(self.labels)

    def mass_in(self, mask):
        return float(np.sum(self.density[mask]) * self.cell_area)

    def summary(self):
        return {
            "continuous_mass": self.continuous_mass,
            "atom_mass": float(sum(self.atoms.values())),
            "total_mass": self.total_mass,
            "n_interior": int(np.sum(self.labels == LABEL_CODES[OMEGA_INTERIOR])),
            "n_singular": int(np.sum(self.labels == LABEL_CODES[SINGULAR_S])),
            "n_exterior": int(np.sum(self.labels == LABEL_CODES[EXTERIOR])),
            "min_density": float(np.min(self.density)),
            **{k: v for k, v in self.flags.items()},
        }

    def to_csv(self, path):
        """Write ``re, im, potential, density, label`` with 17 significant digits."""
        if hasattr(path, "write"):
            self._write_csv(path)
        else:
            with open(path, "w", encoding="ascii") as fh:
                self._write_csv(fh)

    def _write_csv(self, fh):
        z = self.grid.nodes().ravel()
        names = self.label_names().ravel()
        fh.write("re,im,potential,density,label\n")
        for zz, p, d, lab in zip(z, self.potential.ravel(), self.density.ravel(), names):
            fh.write(
                f"{repr_float(zz.real)},{repr_float(zz.imag)},{repr_float(p)},"
                f"{repr_float(d)},{lab}\n"
            )

    def header(self):
        return {
            "grid": self.grid.to_dict(),
            "model": self.model.to_dict() if self.model is not None else None,
            "solver": self.settings.to_dict(),
            "mass": self.summary(),
            "atoms": [[k[0], k[1], v] for k, v in self.atoms.items()],
        }

    def to_json(self):
        return json.dumps(self.header(), indent=2)


def laplacian_density(potential, h):
    """5-point stencil ``Lap h / 2pi`` on interior nodes, zero on the frame."""
    p = potential
    dens = np.zeros_like(p)
    lap = p[1:-1, 2:] + p[1:-1, :-2] + p[2:, 1:-1] + p[:-2, 1:-1] - 4.0 * p[1:-1, 1:-1]
    with np.errstate(invalid="ignore"):
        inner = lap / (2.0 * np.pi * h * h)
    dens[1:-1, 1:-1] = np.where(np.isfinite(inner), inner, 0.0)
    return dens


def _unique_points(m, lams):
    """Representative points and the map back, using the model's symmetries."""
    flat = lams.ravel()
    if m.rotation_invariant:
        key = np.abs(flat)
        uniq, inv = np.unique(key, return_inverse=True)
        return uniq.astype(complex), inv
    if m.a_kind == "hermitian":
        key = flat.real + 1j * np.abs(flat.imag)
        uniq, inv = np.unique(key, return_inverse=True)
        return uniq, inv
    return flat, np.arange(flat.size)


def _chunks(n, size):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def brown_field(m, grid=None, settings=DEFAULT_SETTINGS, threads=1, chunk=2048):
    """Predicted Brown measure of ``m`` on ``grid``.

    Points are swept in independent chunks (optionally on a thread pool); the
    result does not depend on the order in which chunks finish. Boundary
    extrapolation failures fall back on the moment label and are counted in
    ``flags["undetermined"]``.

    Parameters
    ----------
    m : OperatorModel
    grid : GridSpec, optional
        Defaults to :meth:`GridSpec.default_for`.
    threads : int
    chunk : int
        Points per independent sweep.
    """
    grid = grid or GridSpec.default_for(m)
    lams = grid.nodes()
    reps, inv = _unique_points(m, lams)
    sigma = _sigma_measure(m)
    parts = _chunks(reps.size, chunk)

    def work(sl):
        sub = reps[sl]
        sweep = axis_sweep(m.axis_laws(sub), sigma, settings)
        labels, failed = _label_points(m, sub, sweep, settings, strict=False)
        return sweep.potential, labels, failed

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, parts))
    else:
        results = [work(sl) for sl in parts]
    pot_u = np.concatenate([r[0] for r in results])
    lab_u = np.concatenate([r[1] for r in results])
    fail_u = np.concatenate([r[2] for r in results])
    codes_u = np.array([LABEL_CODES[l.label] for l in lab_u])
    agree_u = np.array([l.moment_agrees for l in lab_u])

    shape = lams.shape
    potential = pot_u[inv].reshape(shape)
    labels = codes_u[inv].reshape(shape)
    h = grid.spacing
    density = laplacian_density(potential, h)
    cont = float(np.sum(density) * h * h)
    atoms = {}
    s_nodes = np.argwhere(labels == LABEL_CODES[SINGULAR_S])
    if s_nodes.size:
        deficit = max(0.0, 1.0 - cont)
        # one S point per connected cluster is not resolvable on the lattice;
        # the deficit goes to the S node with the most negative potential
        vals = potential[tuple(s_nodes.T)]
        k = int(np.argmin(np.where(np.isfinite(vals), vals, -np.inf)))
        r, c = s_nodes[k]
        z = lams[r, c]
        atoms[(float(z.real), float(z.imag))] = deficit
    flags = {
        "undetermined": int(np.sum(fail_u[inv])),
        "moment_disagreements": int(np.sum(~agree_u[inv])),
        "nan_potential": int(np.sum(np.isnan(potential))),
    }
    return BrownField(grid, potential, density, labels, atoms, m, settings, flags)


def d_epsilon(m, grid, eps, settings=DEFAULT_SETTINGS):
    """Mask of nodes whose boundary magnitudes both lie in ``(eps, 1/eps)``."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    lams = grid.nodes() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=complex)
    reps, inv = _unique_points(m, lams)
    sweep = axis_sweep(m.axis_laws(reps), _sigma_measure(m), settings)
    member = np.zeros(reps.size, dtype=bool)
    for i in range(reps.size):
        try:
            b1, b2 = _boundary_pair(sweep, i, settings)
        except BoundaryExtrapolationError:
            continue
        member[i] = all(eps < b.value < 1.0 / eps for b in (b1, b2))
    return member[inv].reshape(lams.shape)


def exterior_cauchy_bound(m, nodes, settings=DEFAULT_SETTINGS):
    """``sup |G(i eta)|`` over exterior nodes and the height ladder.

    Returns
    -------
    bound : float
    flagged : ndarray of bool
        Nodes whose boundary trichotomy is not ``exterior`` (misclassified for
        this purpose), or where ``|G|`` keeps growing down the ladder.
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=complex))
    sweep = axis_sweep(m.axis_laws(nodes), _sigma_measure(m), settings)
    g = np.abs(sweep.cauchy_ladder)
    flagged = np.zeros(nodes.size, dtype=bool)
    for i in range(nodes.size):
        try:
            lab = trichotomy(*_boundary_pair(sweep, i, settings))
        except BoundaryExtrapolationError:
            lab = None
        growth = g[i, -4:] / g[i, -5:-1]
        flagged[i] = lab != EXTERIOR or bool(np.all(growth > 1.05))
    ok = ~flagged
    bound = float(np.max(g[ok])) if ok.any() else math.inf
    return bound, flagged
