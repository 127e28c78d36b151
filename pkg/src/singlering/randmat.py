"""Monte Carlo side: Haar unitaries, the model ``Y = U Sigma V* + A`` and its spectra.

Randomness is keyed by ``(seed, trial, role)`` through
:class:`numpy.random.SeedSequence` spawn keys, so every trial can be drawn
independently and in any order with bit-identical results.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError
from .measures import AtomicMeasure, repr_float

__all__ = [
    "EnsembleSpec",
    "SpectrumSample",
    "SminTail",
    "InterlacingResult",
    "rng_stream",
    "haar_unitary",
    "free_sum_eigenvalues",
    "sigma_diagonal",
    "a_matrix",
    "assemble",
    "eigenvalues",
    "sample_spectrum",
    "hermitize_svals",
    "hermitization_svals",
    "empirical_cauchy",
    "smin",
    "smin_tail",
    "product_smin_property",
    "approx_subordination",
    "jordan_matrix",
    "jordan_svals",
    "bidiagonal_svals",
    "singular_values",
    "jordan_sv_check",
    "interlacing_check",
    "write_eigenvalues_csv",
    "write_svals_csv",
]

ROLES = {"U": 0, "V": 1, "W": 2, "A": 3, "Q": 4}
N_CAP = 4096
SIGMA_KINDS = ("explicit", "two_level", "quantiles")
A_KINDS = ("zero", "hermitian_diag", "unitary_perm", "jordan_block", "haar", "file")


def rng_stream(seed, trial, role):
    """Generator for one ``(seed, trial, role)`` substream."""
    key = ROLES[role] if isinstance(role, str) else int(role)
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), key))
    return np.random.Generator(np.random.PCG64(ss))


def haar_unitary(n, rng):
    """Haar-distributed ``n x n`` unitary by phase-corrected QR of a complex Ginibre matrix.

    Examples
    --------
    >>> u = haar_unitary(3, np.random.default_rng(0))
    >>> bool(np.allclose(u.conj().T @ u, np.eye(3)))
    True
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    ph = d / np.abs(d)
    return q * ph[None, :]


def free_sum_eigenvalues(d1, d2, rng):
    """Eigenvalues of ``diag(d1) + Q diag(d2) Q*`` with ``Q`` Haar unitary."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != d2.shape or d1.ndim != 1:
        raise DomainError("d1 and d2 must be 1-d of equal length")
    q = haar_unitary(d1.size, rng)
    h = (q * d2[None, :]) @ q.conj().T
    h[np.diag_indices_from(h)] += d1
    return scipy.linalg.eigvalsh(h, overwrite_a=True, check_finite=False)


# ---------------------------------------------------------------------------
# ensemble specification


@dataclass(frozen=True)
class EnsembleSpec:
    """Matrix model ``Y = U Sigma V* + A`` at size ``N``.

    Parameters
    ----------
    N : int
    sigma : dict
        ``{"kind": "explicit", "values": [...]}``,
        ``{"kind": "two_level", "v1": 1.0, "v2": 1e-15, "fraction": 0.5}`` (the
        first ``fraction`` of the diagonal is ``v1``; ``v2`` may be the string
        ``"N^-5"`` style power ``{"power": -5}``), or
        ``{"kind": "quantiles", "atoms": [[t, w], ...]}``.
    a : dict
        ``{"kind": "zero"}``, ``{"kind": "hermitian_diag", "values": [...]}``
        (a two-entry list is repeated in equal blocks), ``{"kind":
        "unitary_perm"}``, ``{"kind": "jordan_block"}``, ``{"kind": "haar"}``
        or ``{"kind": "file", "path": ...}`` (``.npy``).
    M : float
        Norm bound for ``Sigma`` and ``A``.
    seed, trials : int
    alpha : float, optional
        Declares ``min Sigma_ii >= N^-alpha`` (checked).
    """

    N: int
    sigma: dict = field(default_factory=lambda: {"kind": "explicit", "values": [1.0]})
    a: dict = field(default_factory=lambda: {"kind": "zero"})
    M: float = 10.0
    seed: int = 0
    trials: int = 1
    alpha: float = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise DomainError("N must be positive")
        if self.N > N_CAP:
            raise DomainError(f"N exceeds the cap {N_CAP}")
        if self.trials < 1:
            raise DomainError("trials must be positive")
        if self.sigma.get("kind") not in SIGMA_KINDS:
            raise DomainError(f"sigma kind must be one of {SIGMA_KINDS}")
        if self.a.get("kind") not in A_KINDS:
            raise DomainError(f"a kind must be one of {A_KINDS}")
        s = sigma_diagonal(self)
        if np.any(s < 0.0):
            raise DomainError("Sigma must be nonnegative")
        if np.max(s) > self.M:
            raise DomainError(f"max Sigma_ii = {np.max(s):.6g} exceeds the norm bound M = {self.M}")
        if self.alpha is not None and np.min(s) < self.N ** (-self.alpha) * (1.0 - 1e-12):
            raise DomainError("min Sigma_ii is below the declared N^-alpha")
        if self.a["kind"] == "file":
            na = float(np.linalg.norm(a_matrix(self), 2))
        else:
            na = _a_norm(self)
        if na > self.M * (1.0 + 1e-12):
            raise DomainError(f"|A| = {na:.6g} exceeds the norm bound M = {self.M}")

    def with_(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return EnsembleSpec.from_dict(d)

    def to_dict(self):
        return {
            "N": int(self.N),
            "sigma": dict(self.sigma),
            "a": dict(self.a),
            "M": float(self.M),
            "seed": int(self.seed),
            "trials": int(self.trials),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"N", "sigma", "a", "M", "seed", "trials", "alpha"}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown ensemble fields {sorted(extra)}")
        return cls(
            N=int(d["N"]),
            sigma=dict(d.get("sigma", {"kind": "explicit", "values": [1.0]})),
            a=dict(d.get("a", {"kind": "zero"})),
            M=float(d.get("M", 10.0)),
            seed=int(d.get("seed", 0)),
            trials=int(d.get("trials", 1)),
            alpha=d.get("alpha"),
        )

    def to_json(self):
        return json.dumps(self.to_dict())


def _level(v, n):
    if isinstance(v, dict):
        return float(n) ** float(v["power"]) * float(v.get("scale", 1.0))
    return float(v)


def _blocks(values, n):
    values = np.asarray(values, dtype=float)
    if values.size == n:
        return values
    if n % values.size:
        raise DomainError(f"{values.size} values do not divide N = {n}")
    return np.repeat(values, n // values.size)


def sigma_diagonal(spec):
    """Diagonal of ``Sigma`` for the spec."""
    n = spec.N
    s = spec.sigma
    kind = s["kind"]
    if kind == "explicit":
        return _blocks(s["values"], n)
    if kind == "two_level":
        k = int(round(float(s.get("fraction", 0.5)) * n))
        out = np.empty(n)
        out[:k] = _level(s.get("v1", 1.0), n)
        out[k:] = _level(s.get("v2", 0.0), n)
        return out
    atoms = np.asarray(s["atoms"], dtype=float)
    law = AtomicMeasure(atoms[:, 0], atoms[:, 1])
    cdf = np.cumsum(law.weights)
    q = (np.arange(n) + 0.5) / n
    return law.locations[np.minimum(np.searchsorted(cdf, q), len(law) - 1)]


def jordan_matrix(n):
    """Nilpotent Jordan block: ones on the superdiagonal."""
    if n < 1:
        raise DomainError("n must be positive")
    return np.eye(n, k=1)


def _a_norm(spec):
    a = spec.a
    kind = a["kind"]
    if kind == "zero":
        return 0.0
    if kind == "hermitian_diag":
        return float(np.max(np.abs(a["values"])))
    if kind == "jordan_block":
        return 1.0 if spec.N > 1 else 0.0
    return 1.0


def a_matrix(spec, trial=0):
    """Deterministic part ``A``; the ``haar`` kind draws from the ``W`` substream."""
    n = spec.N
    kind = spec.a["kind"]
    if kind == "zero":
        return np.zeros((n, n), dtype=complex)
    if kind == "hermitian_diag":
        return np.diag(_blocks(spec.a["values"], n)).astype(complex)
    if kind == "unitary_perm":
        return np.roll(np.eye(n), 1, axis=0).astype(complex)
    if kind == "jordan_block":
        return jordan_matrix(n).astype(complex)
    if kind == "haar":
        return haar_unitary(n, rng_stream(spec.seed, trial, "W"))
    m = np.load(spec.a["path"])
    if m.shape != (n, n):
        raise DomainError(f"matrix file has shape {m.shape}, expected {(n, n)}")
    return m.astype(complex)


def assemble(spec, trial):
    """``(Y, U, V, Sigma, A)`` for one trial."""
    n = spec.N
    u = haar_unitary(n, rng_stream(spec.seed, trial, "U"))
    v = haar_unitary(n, rng_stream(spec.seed, trial, "V"))
    s = sigma_diagonal(spec)
    a = a_matrix(spec, trial)
    y = (u * s[None, :]) @ v.conj().T + a
    return y, u, v, s, a


def eigenvalues(y):
    """Eigenvalues of a dense general matrix (balanced, no eigenvectors)."""
    return scipy.linalg.eigvals(y, check_finite=False)


@dataclass
class SpectrumSample:
    """Eigenvalues of one trial and singular values at probe points."""

    eigenvalues: np.ndarray
    svals: dict
    trial: int
    seed: int


def sample_spectrum(spec, trial, probes=()):
    y = assemble(spec, trial)[0]
    ev = eigenvalues(y)
    sv = {complex(p): hermitize_svals(y, p) for p in probes}
    return SpectrumSample(ev, sv, trial, spec.seed)


def hermitize_svals(y, lam):
    """Singular values of ``Y - lam``, descending.

    Examples
    --------
    >>> hermitize_svals(np.diag([2.0, 0.0]), 0.0).tolist()
    [2.0, 0.0]
    """
    y = np.asarray(y)
    n = y.shape[0]
    return np.linalg.svd(y - lam * np.eye(n), compute_uv=False)


def hermitization_svals(y, lam):
    """Same values as :func:`hermitize_svals` via the ``2N`` Hermitian block matrix."""
    y = np.asarray(y, dtype=complex)
    n = y.shape[0]
    x = y - lam * np.eye(n)
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, n:] = x
    h[n:, :n] = x.conj().T
    ev = np.linalg.eigvalsh(h)
    return np.maximum(ev[n:][::-1], 0.0)


def empirical_cauchy(svals, eta):
    """``G(i eta) = (1/2N) sum [1/(i eta - s) + 1/(i eta + s)]``, exactly imaginary.

    Examples
    --------
    >>> empirical_cauchy([1.0], 1.0)
    -0.5j
    """
    eta = np.asarray(eta, dtype=float)
    if not np.all(eta > 0.0):
        raise DomainError("eta must be positive")
    s = np.asarray(svals, dtype=float)
    im = -np.mean(eta[..., None] / (eta[..., None] ** 2 + s * s), axis=-1)
    return 1j * im


def smin(y, lam=0.0):
    return float(hermitize_svals(y, lam)[-1])


# ---------------------------------------------------------------------------
# least singular value tails


@dataclass
class SminTail:
    """Empirical ``P(s_min < t_k)`` at one probe point."""

    probe: complex
    thresholds: np.ndarray
    exceedance: np.ndarray
    trials: int
    samples: np.ndarray = field(repr=False, default=None)


def smin_tail(spec, lam, thresholds, trials=None):
    """Empirical tail of ``s_min(Y - lam)`` over trials.

    Requires either a declared ``alpha`` (invertible ``Sigma``) or ``A - lam``
    invertible.
    """
    trials = spec.trials if trials is None else trials
    if spec.alpha is None:
        a = a_matrix(spec)
        if smin(a, lam) == 0.0:
            raise DomainError("neither invertible Sigma declared nor A - lam invertible")
    thresholds = np.sort(np.asarray(thresholds, dtype=float))
    s = np.array([smin(assemble(spec, k)[0], lam) for k in range(trials)])
    exc = np.mean(s[None, :] < thresholds[:, None], axis=1)
    return SminTail(complex(lam), thresholds, exc, trials, s)


def product_smin_property(a1, a2, slack=1e-12):
    """``s_min(A1 A2) >= s_min(A1) s_min(A2)`` up to ``slack`` (relative to the norms)."""
    s1 = np.linalg.svd(a1, compute_uv=False)
    s2 = np.linalg.svd(a2, compute_uv=False)
    s12 = np.linalg.svd(a1 @ a2, compute_uv=False)
    return bool(s12[-1] >= s1[-1] * s2[-1] - slack * max(1.0, s1[0] * s2[0]))


# ---------------------------------------------------------------------------
# approximate subordination


def approx_subordination(spec, lam, eta, trials=None, return_stats=False):
    """Monte Carlo ``omega_A(i eta)`` and ``omega_B(i eta)`` of the Hermitization.

    ``H = [[0, X], [X*, 0]]`` with ``X = Y - lam`` splits as ``B + Xi`` where
    ``B`` is the block of ``U Sigma V*`` and ``Xi`` that of ``A - lam``. With
    ``m = E tr G_H`` (normalized trace over ``2N``),

    ``omega_A = z - E tr[G_H B] / m``, ``omega_B = z - E tr[G_H Xi] / m``

    where ``G_H = (z - H)^-1``; with this sign ``E tr G_H ~ G_Xi(omega_A)``
    (a scalar shift ``B = b`` must give ``omega_A = z - b``).

    Parameters
    ----------
    return_stats : bool
        Also return a dict with the jackknife standard errors of both
        estimates and the trial means.
    """
    if not eta >= 1e-12:
        raise DomainError("eta below 1e-12 gives a singular resolvent")
    trials = spec.trials if trials is None else trials
    z = 1j * eta
    n = spec.N
    g = np.empty(trials, dtype=complex)
    tb = np.empty(trials, dtype=complex)
    tx = np.empty(trials, dtype=complex)
    for k in range(trials):
        _, u, v, s, a = assemble(spec, k)
        b = (u * s[None, :]) @ v.conj().T
        xi = a - lam * np.eye(n)
        # H has eigenpairs (p_j, +-q_j)/sqrt(2) with eigenvalues +-s_j from X = P S Q*
        p, sv, qh = np.linalg.svd(b + xi)
        q = qh.conj().T
        r = 2.0 * sv / (z * z - sv * sv)
        g[k] = np.mean(2.0 * z / (z * z - sv * sv)) / 2.0

        def trace_with(m):
            # tr[G M] / 2N for the block Hermitian M = [[0, m], [m*, 0]]
            d = np.einsum("ij,ij->j", p.conj(), m @ q).real
            return np.sum(r * d) / (2 * n)

        tb[k] = trace_with(b)
        tx[k] = trace_with(xi)
    m = g.mean()
    omega_a = z - tb.mean() / m
    omega_b = z - tx.mean() / m
    if not return_stats:
        return omega_a, omega_b
    # jackknife over trials
    if trials > 1:
        idx = np.arange(trials)
        ja = np.array([z - tb[idx != k].mean() / g[idx != k].mean() for k in idx])
        jb = np.array([z - tx[idx != k].mean() / g[idx != k].mean() for k in idx])
        c = (trials - 1) / trials
        se_a = math.sqrt(c * np.sum(np.abs(ja.real - ja.real.mean()) ** 2))
        se_b = math.sqrt(c * np.sum(np.abs(jb.real - jb.real.mean()) ** 2))
    else:
        se_a = se_b = math.inf
    # each trial's ratio is imaginary up to rounding, so the SE cannot fall below it
    eps = np.finfo(float).eps
    se_a = max(se_a, 64 * eps * abs(omega_a))
    se_b = max(se_b, 64 * eps * abs(omega_b))
    stats = {"se_re_omega_a": se_a, "se_re_omega_b": se_b, "cauchy": m, "trials": trials}
    return omega_a, omega_b, stats


# ---------------------------------------------------------------------------
# Jordan block and interlacing


def bidiagonal_svals(d, e):
    """Singular values of the upper bidiagonal matrix with diagonal ``d`` and superdiagonal ``e``.

    Diagonal unitary scalings make the entries real and nonnegative without
    changing the singular values; these are then the nonnegative eigenvalues
    of the ``2n`` Golub-Kahan tridiagonal matrix with zero diagonal and
    off-diagonal ``|d_1|, |e_1|, |d_2|, ...``. Descending order.
    """
    d = np.abs(np.asarray(d))
    e = np.abs(np.asarray(e))
    n = d.size
    off = np.zeros(2 * n - 1)
    off[0::2] = d
    off[1::2] = e
    ev = scipy.linalg.eigvalsh_tridiagonal(np.zeros(2 * n), off)
    return np.maximum(ev[n:][::-1], 0.0)


def singular_values(m):
    """Descending singular values, with a fast exact path for upper bidiagonal ``m``."""
    m = np.asarray(m)
    n = m.shape[0]
    if n > 2 and not np.any(np.triu(m, 2)) and not np.any(np.tril(m, -1)):
        return bidiagonal_svals(np.diagonal(m), np.diagonal(m, 1))
    return np.linalg.svd(m, compute_uv=False)


def jordan_svals(n, lam):
    """Singular values of ``J - lam``, descending."""
    return bidiagonal_svals(np.full(n, -lam), np.ones(n - 1))


def jordan_sv_check(n, lam, slack=1e-10):
    """All but one singular value of ``J - lam`` are ``>= 1 - |lam|`` when ``|lam| < 1``;
    all are ``>= |lam| - 1`` when ``|lam| > 1``."""
    if n < 2:
        raise DomainError("n must be at least 2")
    s = jordan_svals(n, lam)
    r = abs(lam)
    if r < 1.0:
        return bool(s[-2] >= 1.0 - r - slack)
    if r > 1.0:
        return bool(s[-1] >= r - 1.0 - slack)
    return True


@dataclass
class InterlacingResult:
    """Outcome of :func:`interlacing_check`; ``holds`` is None when the rank is ambiguous."""

    holds: object
    rank: int
    worst_margin: float


def interlacing_check(lower, upper, lam, tol=1e-10):
    """``s_n(lam - L) >= s_{n+k}(lam - U) - tol`` with ``k = rank(L - U)``.

    The rank counts singular values of ``L - U`` above ``1e-10 |L - U|``; a
    singular value inside ``[1e-12, 1e-8] |L - U|`` makes the rank ambiguous and
    the result indeterminate.
    """
    lower = np.asarray(lower, dtype=complex)
    upper = np.asarray(upper, dtype=complex)
    n = lower.shape[0]
    d = np.linalg.svd(lower - upper, compute_uv=False)
    norm = d[0] if d.size else 0.0
    if norm == 0.0:
        k = 0
    else:
        rel = d / norm
        if np.any((rel >= 1e-12) & (rel <= 1e-8)):
            return InterlacingResult(None, -1, math.nan)
        k = int(np.sum(rel > 1e-10))
    eye = np.eye(n)
    sl = np.linalg.svd(lam * eye - lower, compute_uv=False)
    su = np.linalg.svd(lam * eye - upper, compute_uv=False)
    if k >= n:
        return InterlacingResult(True, k, math.inf)
    margin = sl[: n - k] - su[k:]
    worst = float(np.min(margin))
    return InterlacingResult(bool(worst >= -tol), k, worst)


# ---------------------------------------------------------------------------
# CSV export


def write_eigenvalues_csv(fh, samples):
    """Rows ``trial, re, im`` for an iterable of ``(trial, eigenvalues)``."""
    fh.write("trial,re,im\n")
    for trial, ev in samples:
        for z in ev:
            fh.write(f"{trial},{repr_float(z.real)},{repr_float(z.imag)}\n")


def write_svals_csv(fh, rows):
    """Rows ``trial, lam_re, lam_im, rank, sval`` for ``(trial, lam, svals)`` triples."""
    fh.write("trial,lam_re,lam_im,rank,sval\n")
    for trial, lam, sv in rows:
        lam = complex(lam)
        for k, s in enumerate(sv, start=1):
            fh.write(f"{trial},{repr_float(lam.real)},{repr_float(lam.imag)},{k},{repr_float(s)}\n")
