"""Acceptance criteria 1 to 13, at their declared tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary) and
then asserts. Monte Carlo criteria run the scenario files in ``demos/configs``
through the same runners as the command line.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from singlering.brown import GridSpec, OperatorModel, brown_field, log_potential
from singlering.errors import ConvergenceError
from singlering.experiments.config import ScenarioConfig
from singlering.experiments.runners import run
from singlering.measures import AtomicMeasure, SymmetricMeasure
from singlering.randmat import (
    EnsembleSpec,
    approx_subordination,
    free_sum_eigenvalues,
    interlacing_check,
    jordan_sv_check,
    rng_stream,
)
from singlering.subordination import ConvolvedMeasure, smoothed_cdf, solve

from conftest import ACCEPTANCE

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def record(k, name, ok, detail):
    ACCEPTANCE[k] = (bool(ok), name, detail)
    assert ok, f"criterion {k} ({name}) failed: {detail}"


def scenario(name):
    return run(ScenarioConfig.load(CONFIGS / f"{name}.json"))[0]


def fmt(rep):
    return ", ".join(f"{k}={rep.metrics[k]!r}" for k in rep.passed)


def test_01_bernoulli_exactness():
    t = time.perf_counter()
    b = SymmetricMeasure(AtomicMeasure([1.0]))
    c = ConvolvedMeasure(b, b)
    eta = np.geomspace(1e-4, 1e3, 50)
    g_err = float(np.max(np.abs(c.cauchy(1j * eta) + 1j / np.sqrt(eta**2 + 4))))
    w_err = abs(solve(b, b, 1j).omega1 - 1j * (1 + math.sqrt(5)) / 2)
    dt = time.perf_counter() - t
    record(1, "Bernoulli subordination", g_err <= 1e-8 and w_err <= 1e-10,
           f"max|G err|={g_err:.2e}, |omega(i) err|={w_err:.2e}, {dt:.2f}s")


def test_02_residual_invariant():
    rng = np.random.default_rng(20240601)

    def law():
        m = int(rng.integers(1, 6))
        w = rng.uniform(0.1, 1.0, m)
        return SymmetricMeasure(AtomicMeasure(rng.uniform(0.05, 3.0, m), w / w.sum()))

    worst_res = worst_re = 0.0
    failures = 0
    for _ in range(200):
        a, b = law(), law()
        for z in (1j * 10 ** rng.uniform(-4, 3), complex(rng.uniform(-3, 3), 10 ** rng.uniform(-3, 1))):
            try:
                r = solve(a, b, z)
            except ConvergenceError:
                failures += 1
                continue
            worst_res = max(worst_res, r.residual / (1 + abs(z)))
            if z.real == 0.0:
                worst_re = max(worst_re, abs(r.omega1.real), abs(r.omega2.real))
    ok = worst_res <= 1e-10 and worst_re <= 1e-12
    record(2, "residual and imaginary-axis invariants", ok,
           f"max residual/(1+|z|)={worst_res:.2e}, max|Re omega|={worst_re:.1e}, "
           f"{failures} points not accepted")


@pytest.mark.slow
def test_03_matrix_oracle():
    c = ConvolvedMeasure(SymmetricMeasure(AtomicMeasure([1.0])), SymmetricMeasure(AtomicMeasure([0.5])))
    x = np.linspace(-2.0, 2.0, 8001)
    f = smoothed_cdf(c, x, eps=1e-4)
    n, trials = 2000, 20
    d1 = np.repeat([-1.0, 1.0], n // 2)
    d2 = np.repeat([-0.5, 0.5], n // 2)
    ev = np.sort(np.concatenate([free_sum_eigenvalues(d1, d2, rng_stream(20240601, k, "Q")) for k in range(trials)]))
    emp = np.searchsorted(ev, x, side="right") / ev.size
    dist = float(np.max(np.abs(emp - f)))
    record(3, "matrix-oracle convolution", dist < 0.02, f"sup CDF distance={dist:.4f}")


@pytest.mark.slow
def test_04_annulus_radii():
    m = OperatorModel.scalar_zero(AtomicMeasure([0.5, 1.0]))
    fld = brown_field(m, GridSpec(0j, 3.0, 201))
    r = np.abs(fld.grid.nodes())
    h = fld.grid.spacing
    inside = fld.mass_in((r >= math.sqrt(0.4) - 2 * h) & (r <= math.sqrt(0.625) + 2 * h))
    total = fld.total_mass
    frac = inside / total
    record(4, "Brown support radii", frac >= 0.99 and 0.98 <= total <= 1.02,
           f"mass in dilated annulus={frac:.5f}, total mass={total:.6f}")


@pytest.mark.slow
def test_05_degenerate_ring():
    m = OperatorModel.scalar_zero(AtomicMeasure([1.0]))
    fld = brown_field(m, GridSpec(0j, 3.0, 201))
    r = np.abs(fld.grid.nodes())
    ring = fld.mass_in((r > 0.9) & (r < 1.1)) / fld.total_mass
    away = np.abs(r - 1) > 0.05
    exact = np.log(np.maximum(r, 1.0))
    pot_err = float(np.max(np.abs(fld.potential[away] - exact[away])))
    pts = [0.0, 0.5, 0.94, 1.06, 1.2 + 0.3j, 1e3]
    pot_err = max(pot_err, max(abs(log_potential(m, p) - max(0.0, math.log(abs(p)) if p else 0.0)) for p in pts))
    record(5, "degenerate ring", ring >= 0.95 and pot_err <= 1e-4,
           f"mass in 0.9<|lam|<1.1={ring:.5f}, max potential error={pot_err:.1e}")


@pytest.mark.slow
def test_06_deformed_hermitian():
    rep = scenario("deformed_hermitian")
    record(6, "deformed single ring (hermitian A)", rep.ok, fmt(rep))


@pytest.mark.slow
def test_07_jordan():
    rep = scenario("jordan")
    record(7, "Jordan reproduction", rep.ok, fmt(rep))


def test_08_jordan_sv_bound():
    fails = 0
    total = 0
    for n in (50, 200, 1000):
        for r in (0.3, 0.7, 1.5, 3.0):
            for th in 2 * np.pi * (np.arange(16) + 0.5) / 16:
                total += 1
                fails += not jordan_sv_check(n, r * np.exp(1j * th), slack=1e-10)
    record(8, "Jordan singular-value bound", fails == 0, f"{fails} failures in {total} cases")


def test_09_interlacing():
    rng = np.random.default_rng(20240609)
    n = 40
    fails = 0
    total = 0
    worst = math.inf
    for k in (1, 2, 3):
        for _ in range(100):
            lo = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            up = lo + (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) @ rng.standard_normal((k, n))
            lam = complex(*rng.uniform(-3, 3, 2))
            res = interlacing_check(lo, up, lam)
            total += 1
            fails += not (res.holds and res.rank == k)
            worst = min(worst, res.worst_margin)
    record(9, "interlacing under rank-k perturbation", fails == 0,
           f"{fails} failures in {total} trials, worst margin={worst:.2e}")


@pytest.mark.slow
def test_10_local_law():
    rep = scenario("local_law")
    record(10, "local-law scaling", rep.passed["slope"] and rep.passed["strictly_decreasing"],
           f"slope={rep.metrics['slope']:.3f}, means={['%.2e' % v for v in rep.metrics['mean_error']]}")


@pytest.mark.slow
def test_11_least_singular_value():
    uni = scenario("lsv_unitary")
    two = scenario("lsv_two_level")
    ok = uni.passed["unitary_floor_margin"] and uni.ok and two.passed["tiny_fraction"]
    record(11, "least-singular-value floor", ok,
           f"unitary floor margin={uni.metrics['unitary_floor_margin']:.2e}, "
           f"two-level tiny fraction={two.metrics['tiny_fraction']}, "
           f"two-level min s_min={two.metrics['global_min_smin']:.3e}")


def test_12_assumption_audit():
    rep = scenario("audit_jordan")
    record(12, "assumption audit", rep.ok, fmt(rep))


@pytest.mark.slow
def test_13_approximate_subordination():
    spec = EnsembleSpec(
        500,
        sigma={"kind": "explicit", "values": [0.5, 1.0]},
        a={"kind": "hermitian_diag", "values": [-1.0, 1.0]},
        M=2.0,
        seed=20240608,
        trials=100,
    )
    wa, _, st = approx_subordination(spec, 0.5 + 0.5j, 0.5, return_stats=True)
    z = abs(wa.real) / st["se_re_omega_a"]
    record(13, "approximate subordination is imaginary", z <= 3.0,
           f"Re omega_A={wa.real:.2e}, SE={st['se_re_omega_a']:.2e}, ratio={z:.2f}")
