"""Scenario runners. Each returns a :class:`RunReport` plus the raw data it produced."""

import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from .. import __version__
from ..brown import GridSpec, brown_field, d_epsilon
from ..errors import DomainError
from ..measures import AtomicMeasure, SymmetricMeasure
from ..randmat import (
    a_matrix,
    assemble,
    eigenvalues,
    empirical_cauchy,
    hermitize_svals,
    rng_stream,
    sigma_diagonal,
    singular_values,
)
from ..subordination import ConvolvedMeasure, solve, solve_axis
from .compare import compare_esd_to_brown, energy_distance
from .config import ScenarioConfig, model_for_ensemble

__all__ = [
    "RunReport",
    "map_trials",
    "run_convolve",
    "run_brown",
    "run_simulate",
    "run_single_ring",
    "run_jordan",
    "run_local_law",
    "run_local_window",
    "run_lsv",
    "run_assumption_audit",
    "bump",
    "RUNNERS",
]


@dataclass
class RunReport:
    """Metrics, pass flags against declared thresholds, timing and provenance.

    All thresholds are operational tolerances declared by the scenario or by
    ``DEFAULT_THRESHOLDS``; none is a sharp constant.
    """

    scenario: str
    metrics: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return all(self.passed.values())

    def check(self, name, value, ok):
        """Record metric ``name`` and its pass flag."""
        self.metrics[name] = value
        self.passed[name] = bool(ok)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "ok": self.ok,
            "metrics": self.metrics,
            "thresholds": self.thresholds,
            "passed": self.passed,
            "timing": self.timing,
            "provenance": self.provenance,
            "config": self.config,
            "notes": self.notes,
        }


def _report(cfg):
    seed = cfg.ensemble.seed if cfg.ensemble else None
    return RunReport(
        scenario=cfg.kind,
        thresholds=dict(cfg.thresholds),
        config=cfg.to_dict(),
        provenance={
            "seed": seed,
            "solver": cfg.solver.to_dict(),
            "package": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    )


def map_trials(fn, n, threads=1):
    """``[fn(0), ..., fn(n-1)]``, evaluated on a thread pool when ``threads > 1``."""
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(k) for k in range(n)]


def _need(cfg, what):
    if what == "ensemble" and cfg.ensemble is None:
        raise DomainError(f"{cfg.kind} needs an ensemble")
    if what == "model" and cfg.model is None:
        raise DomainError(f"{cfg.kind} needs a model")


def _timed(report, key):
    class _T:
        def __enter__(self):
            self.t = time.perf_counter()

        def __exit__(self, *exc):
            report.timing[key] = time.perf_counter() - self.t

    return _T()


# ---------------------------------------------------------------------------
# convolution and field


def _half(pairs):
    a = np.asarray(pairs, dtype=float)
    return SymmetricMeasure(AtomicMeasure(a[:, 0], a[:, 1]))


def run_convolve(cfg, threads=1):
    """Subordination values, Cauchy transforms and densities of ``mu1 [+] mu2``.

    ``params``: ``mu1``, ``mu2`` as ``[[t, w], ...]`` lists (laws symmetrized),
    ``z`` as ``[[re, im], ...]``, optional ``x`` for densities.
    """
    rep = _report(cfg)
    p = cfg.params
    c = ConvolvedMeasure(_half(p["mu1"]), _half(p["mu2"]), cfg.solver)
    rows = []
    with _timed(rep, "solve"):
        for re, im in p.get("z", [[0.0, 1.0]]):
            r = solve(c.mu1, c.mu2, complex(re, im), cfg.solver)
            rows.append(
                {"z": complex(re, im), "omega1": r.omega1, "omega2": r.omega2,
                 "residual": r.residual, "cauchy": c.cauchy(complex(re, im))}
            )
        dens = [float(c.density(x)) for x in p.get("x", [])]
    rep.metrics["points"] = rows
    rep.metrics["density"] = dict(zip(map(str, p.get("x", [])), dens))
    res = max((r["residual"] / (1.0 + abs(r["z"])) for r in rows), default=0.0)
    rep.check("max_relative_residual", res, res <= 1e-10)
    return rep, rows


def run_brown(cfg, threads=1):
    """Brown field of the model on the configured grid; passes when its mass is in [0.98, 1.02]."""
    _need(cfg, "model")
    rep = _report(cfg)
    with _timed(rep, "field"):
        fld = brown_field(cfg.model, cfg.grid, cfg.solver, threads=threads)
    s = fld.summary()
    rep.metrics.update({k: v for k, v in s.items() if k != "total_mass"})
    rep.check("total_mass", s["total_mass"], 0.98 <= s["total_mass"] <= 1.02)
    return rep, fld


def _trial_eigs(spec, probes=()):
    def one(k):
        y = assemble(spec, k)[0]
        return eigenvalues(y), [(p, hermitize_svals(y, p)) for p in probes]

    return one


def run_simulate(cfg, threads=1):
    """Eigenvalues of every trial and singular values at ``params.probes``."""
    _need(cfg, "ensemble")
    rep = _report(cfg)
    spec = cfg.ensemble
    probes = [complex(*p) for p in cfg.params.get("probes", [])]
    with _timed(rep, "simulate"):
        out = map_trials(_trial_eigs(spec, probes), spec.trials, threads)
    eig = [(k, ev) for k, (ev, _) in enumerate(out)]
    sv = [(k, p, s) for k, (_, rows) in enumerate(out) for p, s in rows]
    bound = 2.0 * spec.M
    mx = max(float(np.max(np.abs(ev))) for _, ev in eig)
    rep.check("max_abs_eigenvalue", mx, mx <= bound + 1e-8)
    rep.metrics["rows_per_trial"] = spec.N
    return rep, {"eigenvalues": eig, "svals": sv}


def run_single_ring(cfg, threads=1):
    """Simulated eigenvalues against the Brown field (single ring and deformed variants)."""
    _need(cfg, "ensemble")
    _need(cfg, "model")
    rep, fld = run_brown(cfg, threads)
    srep, data = run_simulate(cfg, threads)
    rep.timing.update(srep.timing)
    eigs = np.concatenate([ev for _, ev in data["eigenvalues"]])
    with _timed(rep, "compare"):
        m = compare_esd_to_brown(eigs, fld, rng=rng_stream(cfg.ensemble.seed, 0, 4))
    t = cfg.thresholds
    rep.check("radial_ks", m["radial_ks"], m["radial_ks"] < t.get("radial_ks", 0.05))
    rep.check("energy_distance", m["energy_distance"], m["energy_distance"] < t.get("energy_distance", 0.05))
    if "angular_ks" in m:
        rep.metrics["angular_ks"] = m["angular_ks"]
        if "angular_ks" in t:
            rep.passed["angular_ks"] = m["angular_ks"] < t["angular_ks"]
    rep.metrics["n_eigenvalues"] = m["n_eigenvalues"]
    return rep, {"field": fld, **data}


# ---------------------------------------------------------------------------
# Jordan reproduction


def run_jordan(cfg, threads=1):
    """Twin ensembles ``U Sigma V* + J`` and ``U Sigma V* + W`` with the same ``U, V``.

    Reports the energy distance between the two clouds and from each to the
    Brown field of (Haar unitary, sigma). With ``params.sigma_zero_check`` the
    nilpotent spectrum of ``J`` alone is also compared with the field.
    """
    _need(cfg, "ensemble")
    spec = cfg.ensemble
    if spec.a["kind"] != "jordan_block":
        raise DomainError("run_jordan needs a = jordan_block")
    rep, fld = run_brown(cfg, threads)
    twin = spec.with_(a={"kind": "haar"})

    def one(k):
        ya = assemble(spec, k)[0]
        yw = assemble(twin, k)[0]
        return eigenvalues(ya), eigenvalues(yw)

    with _timed(rep, "simulate"):
        out = map_trials(one, spec.trials, threads)
    ea = np.concatenate([a for a, _ in out])
    ew = np.concatenate([w for _, w in out])
    t = cfg.thresholds
    with _timed(rep, "compare"):
        e_twin = energy_distance(ea, ew)
        rng = rng_stream(spec.seed, 0, 4)
        ca = compare_esd_to_brown(ea, fld, rng=rng)
        cw = compare_esd_to_brown(ew, fld, rng=rng)
    rep.check("energy_twin", e_twin, e_twin < t.get("energy_twin", 0.05))
    ef = t.get("energy_field", 0.07)
    rep.check("energy_A_field", ca["energy_distance"], ca["energy_distance"] < ef)
    rep.check("energy_W_field", cw["energy_distance"], cw["energy_distance"] < ef)
    rep.metrics["radial_ks_A"] = ca["radial_ks"]
    rep.metrics["radial_ks_W"] = cw["radial_ks"]
    if cfg.params.get("sigma_zero_check"):
        ej = eigenvalues(a_matrix(spec))
        d0 = compare_esd_to_brown(ej, fld, rng=rng)["energy_distance"]
        rep.metrics["energy_sigma_zero_field"] = d0
        rep.notes.append(
            "Sigma = 0: the Jordan block alone has all eigenvalues at 0, far from the "
            "Brown field of its limit; the limit of spectra need not be the Brown measure."
        )
    return rep, {"field": fld, "eigenvalues": list(enumerate(ea.reshape(spec.trials, -1)))}


# ---------------------------------------------------------------------------
# local law and local windows


def predicted_cauchy(sigma_diag, a, lam, eta):
    """``Im G`` of the free convolution of the symmetrized laws of ``Sigma`` and ``|A - lam|``."""
    n = a.shape[0]
    s_a = np.linalg.svd(a - lam * np.eye(n), compute_uv=False)
    mu1 = SymmetricMeasure(AtomicMeasure(s_a))
    mu2 = SymmetricMeasure(AtomicMeasure(sigma_diag))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    out = np.empty(eta.size)
    for i, e in enumerate(eta):
        out[i] = solve_axis(mu1, mu2, e).cauchy_imag[0]
    return out


def _probe_in_bulk(cfg, lam, eps):
    if cfg.model is None:
        return True
    return bool(d_epsilon(cfg.model, np.array([lam]), eps, cfg.solver)[0])


def run_local_law(cfg, threads=1):
    """Trial-mean ``|G^lam(i eta) - G_pred(i eta)|`` across ``N`` and its log-log slope.

    ``params``: ``N_list``, ``lam`` ``[re, im]``, ``eta`` (default 1),
    ``eps`` for the bulk check (default 0.1), ``eta_points`` for the envelope
    check at the largest ``N`` (default 5).
    """
    _need(cfg, "ensemble")
    rep = _report(cfg)
    p = cfg.params
    lam = complex(*p.get("lam", [0.0, 0.0]))
    eta = float(p.get("eta", 1.0))
    eps = float(p.get("eps", 0.1))
    n_list = [int(n) for n in p.get("N_list", [250, 500, 1000, 2000])]
    if not _probe_in_bulk(cfg, lam, eps):
        raise DomainError(f"probe {lam} is not inside D^(eps) for eps = {eps}")
    n_eta = int(p.get("eta_points", 5))
    means = []
    env = None
    with _timed(rep, "simulate"):
        for n in n_list:
            spec = cfg.ensemble.with_(N=n)
            last = n == max(n_list)
            etas = np.array([eta])
            if last and n_eta > 1:
                etas = np.concatenate([[eta], np.geomspace(n ** -0.25, 1.0, n_eta)])
            pred = 1j * predicted_cauchy(sigma_diagonal(spec), a_matrix(spec), lam, etas)

            def one(k, spec=spec, etas=etas, pred=pred):
                sv = hermitize_svals(assemble(spec, k)[0], lam)
                return np.abs(empirical_cauchy(sv, etas) - pred)

            errs = np.array(map_trials(one, spec.trials, threads))
            means.append(float(errs[:, 0].mean()))
            if last and n_eta > 1:
                env = (etas[1:], errs[:, 1:].mean(axis=0))
    logn, loge = np.log(n_list), np.log(means)
    slope = float(np.polyfit(logn, loge, 1)[0])
    t = cfg.thresholds
    rep.metrics["N_list"] = n_list
    rep.metrics["mean_error"] = means
    rep.check("slope", slope, t.get("slope_min", -1.4) <= slope <= t.get("slope_max", -0.6))
    dec = all(b < a for a, b in zip(means, means[1:]))
    rep.check("strictly_decreasing", dec, dec)
    if env is not None:
        n = max(n_list)
        scaled = env[1] * n * env[0]
        c1 = means[-1] * n * eta
        ratio = float(np.max(scaled) / c1)
        rep.metrics["envelope_etas"] = env[0]
        rep.check("envelope_ratio", ratio, ratio <= 10.0)
    return rep, {"mean_error": means}


def bump(w):
    """``(1 - |w|^2)^4`` on the unit disk, zero outside."""
    r2 = np.abs(w) ** 2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 4, 0.0)


def window_integral(model, w0, n, beta, solver, f=bump, refine=16):
    """``int f_{w0} d mu`` with ``f_{w0}(w) = N^{2 beta} f(N^beta (w - w0))``.

    The field is recomputed on a local grid of pitch ``N^-beta / refine``
    around ``w0``; cell masses are integrated against ``f_{w0}`` sampled on
    ``4 x 4`` sub-points per cell.
    """
    r = n ** (-beta)
    pitch = r / refine
    k = int(math.ceil(1.25 * r / pitch))
    grid = GridSpec(complex(w0), 2 * k * pitch, 2 * k + 1)
    fld = brown_field(model, grid, solver)
    z = grid.nodes()
    sub = ((np.arange(4) + 0.5) / 4 - 0.5) * pitch
    acc = np.zeros(z.shape)
    for dx in sub:
        for dy in sub:
            acc += f((z + dx + 1j * dy - w0) / r)
    fz = n ** (2 * beta) * acc / 16.0
    val = float(np.sum(fz * fld.density) * pitch * pitch)
    for (a, b), m in fld.atoms.items():
        val += m * float(n ** (2 * beta) * f((complex(a, b) - w0) / r))
    return val


def run_local_window(cfg, threads=1):
    """Linear statistic of a shrinking bump against the Brown field.

    ``params``: ``beta`` (0.25), ``w0`` ``[re, im]``, ``N_list``, ``bump``
    (``"poly"`` or ``"zero"``).
    """
    _need(cfg, "ensemble")
    _need(cfg, "model")
    rep = _report(cfg)
    p = cfg.params
    beta = float(p.get("beta", 0.25))
    if not 0.0 < beta < 0.5:
        raise DomainError("beta must lie in (0, 1/2)")
    w0 = complex(*p.get("w0", [0.0, 0.0]))
    n_list = [int(n) for n in p.get("N_list", [cfg.ensemble.N])]
    f = bump if p.get("bump", "poly") == "poly" else (lambda w: np.zeros(np.shape(w)))
    eps = float(p.get("eps", 0.1))
    if not _probe_in_bulk(cfg, w0, eps):
        raise DomainError(f"w0 = {w0} is not inside D^(eps) for eps = {eps}")
    g = cfg.grid
    re, im = g.axes
    for n in n_list:
        r = n ** (-beta)
        if not (re[0] <= w0.real - r and w0.real + r <= re[-1] and im[0] <= w0.imag - r and w0.imag + r <= im[-1]):
            raise DomainError(f"window of radius {r:.3g} around {w0} exceeds the grid")
    raw, norm = [], []
    with _timed(rep, "run"):
        for n in n_list:
            spec = cfg.ensemble.with_(N=n)
            model = model_for_ensemble(spec) if "model" not in cfg.raw else cfg.model
            integral = window_integral(model, w0, n, beta, cfg.solver, f)
            r = n ** (-beta)

            def one(k, spec=spec, n=n, r=r, integral=integral):
                ev = eigenvalues(assemble(spec, k)[0])
                return float(np.mean(n ** (2 * beta) * f((ev - w0) / r))) - integral

            devs = np.abs(np.array(map_trials(one, spec.trials, threads)))
            raw.append(float(devs.mean()))
            norm.append(float(devs.mean() * n ** (1.0 - 2.0 * beta)))
    rep.metrics["N_list"] = n_list
    rep.metrics["mean_abs_deviation"] = raw
    limit = cfg.thresholds.get("normalized_deviation", 10.0)
    rep.check("normalized_deviation", norm, max(norm) <= limit)
    if len(n_list) > 1:
        dec = raw[-1] < raw[0]
        rep.check("deviation_decreases", dec, dec)
    return rep, {"deviation": raw}


# ---------------------------------------------------------------------------
# least singular values and audits


def _lam_grid(cfg):
    p = cfg.params
    if "lams" in p:
        return [complex(*z) for z in p["lams"]]
    re = p.get("lam_re", [-1.5, 0.0, 1.5])
    im = p.get("lam_im", [-1.5, 0.0, 1.5])
    return [complex(x, y) for y in im for x in re]


def run_lsv(cfg, threads=1):
    """``s_min(Y - lam)`` over a coarse lambda grid and all trials.

    Reports the global minimum, exceedance curves, the fraction of
    ``(lam, trial)`` pairs with ``s_min < N^-8``, and, when ``Sigma = I`` and
    ``A = 0``, the worst violation of ``s_min >= |1 - |lam||``.
    """
    _need(cfg, "ensemble")
    rep = _report(cfg)
    spec = cfg.ensemble
    lams = _lam_grid(cfg)
    thresholds = np.geomspace(1e-8, 1.0, 17)

    def one(k):
        y = assemble(spec, k)[0]
        return [hermitize_svals(y, l)[-1] for l in lams]

    with _timed(rep, "simulate"):
        s = np.array(map_trials(one, spec.trials, threads))  # (trials, lams)
    n = spec.N
    tiny = float(np.mean(s < n ** -8.0))
    rep.metrics["global_min_smin"] = float(s.min())
    rep.metrics["exceedance"] = {
        repr(l): (np.mean(s[:, j][None, :] < thresholds[:, None], axis=1)).tolist()
        for j, l in enumerate(lams)
    }
    rep.metrics["exceedance_thresholds"] = thresholds.tolist()
    rep.check("tiny_fraction", tiny, tiny <= cfg.thresholds.get("tiny_fraction", 0.0))
    sig = sigma_diagonal(spec)
    if spec.a["kind"] == "zero" and np.all(sig == 1.0):
        floor = np.array([abs(1.0 - abs(l)) for l in lams])
        worst = float(np.min(s - floor[None, :]))
        slack = cfg.thresholds.get("floor_slack", 1e-10)
        rep.check("unitary_floor_margin", worst, worst >= -slack)
    return rep, {"smin": s, "lams": lams}


def kappa2_hat(a, lams, n, kappa1, n_eta=64):
    """``sup |G(i eta)|`` of the symmetrized singular value law of ``A - lam``."""
    etas = np.geomspace(n ** (-kappa1), 1.0, n_eta)
    best = 0.0
    for lam in lams:
        s = singular_values(a - lam * np.eye(a.shape[0]))
        g = np.abs(empirical_cauchy(s, etas))
        best = max(best, float(np.max(g)))
    return best


def run_assumption_audit(cfg, threads=1):
    """Measured ``kappa2`` over probe sets and sizes.

    ``params``: ``kappa1`` (default 1), ``N_list``, ``probe_sets`` as a list of
    ``{"radius": r, "count": k, "bound": b}`` circles or ``{"points": [[re, im], ...]}``.
    A probe set passes when its ``kappa2`` is finite, below ``bound`` if
    given, and stable across ``N`` (ratio of extremes at most 2).
    """
    _need(cfg, "ensemble")
    rep = _report(cfg)
    p = cfg.params
    kappa1 = float(p.get("kappa1", 1.0))
    n_list = [int(n) for n in p.get("N_list", [cfg.ensemble.N])]
    sets = p.get("probe_sets", [{"radius": 0.5, "count": 16}])
    with _timed(rep, "audit"):
        for i, ps in enumerate(sets):
            if "points" in ps:
                lams = [complex(*z) for z in ps["points"]]
                name = ps.get("name", f"set{i}")
            else:
                k = int(ps.get("count", 16))
                lams = list(ps["radius"] * np.exp(2j * np.pi * (np.arange(k) + 0.5) / k))
                name = ps.get("name", f"radius_{ps['radius']}")
            vals = []
            for n in n_list:
                a = a_matrix(cfg.ensemble.with_(N=n))
                vals.append(kappa2_hat(a, lams, n, kappa1))
            finite = all(math.isfinite(v) for v in vals)
            stable = finite and max(vals) <= 2.0 * min(vals)
            ok = finite and stable
            if "bound" in ps:
                ok = ok and max(vals) <= float(ps["bound"])
            rep.check(f"kappa2_{name}", vals, ok)
    rep.metrics["N_list"] = n_list
    return rep, {}


RUNNERS = {
    "convolve": run_convolve,
    "single_ring": run_single_ring,
    "deformed_hermitian": run_single_ring,
    "deformed_unitary": run_single_ring,
    "jordan": run_jordan,
    "local_law": run_local_law,
    "local_window": run_local_window,
    "lsv_tail": run_lsv,
    "assumption_audit": run_assumption_audit,
}


def run(cfg: ScenarioConfig, threads=1):
    return RUNNERS[cfg.kind](cfg, threads)
