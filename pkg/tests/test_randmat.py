import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singlering.errors import DomainError
from singlering.randmat import (
    EnsembleSpec,
    a_matrix,
    approx_subordination,
    assemble,
    bidiagonal_svals,
    eigenvalues,
    empirical_cauchy,
    free_sum_eigenvalues,
    haar_unitary,
    hermitization_svals,
    hermitize_svals,
    interlacing_check,
    jordan_matrix,
    jordan_sv_check,
    jordan_svals,
    product_smin_property,
    rng_stream,
    sigma_diagonal,
    singular_values,
    smin,
    smin_tail,
    write_eigenvalues_csv,
    write_svals_csv,
)


def test_streams_are_keyed_and_reproducible():
    a = rng_stream(7, 3, "U").standard_normal(4)
    b = rng_stream(7, 3, "U").standard_normal(4)
    c = rng_stream(7, 3, "V").standard_normal(4)
    d = rng_stream(7, 4, "U").standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_haar_unitary_is_unitary(rng):
    u = haar_unitary(50, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(50), atol=1e-12)


def test_haar_phases_are_uniform():
    # a QR without phase correction would put the first entry on the positive axis
    ph = np.array([np.angle(haar_unitary(4, rng_stream(1, k, 0))[0, 0]) for k in range(400)])
    assert np.mean(ph > 0) == pytest.approx(0.5, abs=0.1)
    assert np.mean(np.exp(1j * ph)) == pytest.approx(0, abs=0.15)


def test_trials_do_not_depend_on_order():
    spec = EnsembleSpec(20, seed=9, trials=3)
    y2 = assemble(spec, 2)[0]
    assemble(spec, 0)
    assert np.array_equal(assemble(spec, 2)[0], y2)


def test_sigma_kinds():
    s = sigma_diagonal(EnsembleSpec(10, sigma={"kind": "explicit", "values": [0.5, 1.0]}))
    assert s.tolist() == [0.5] * 5 + [1.0] * 5
    spec = EnsembleSpec(
        100, sigma={"kind": "two_level", "v1": 1.0, "v2": {"power": -5}, "fraction": 0.5}, alpha=5
    )
    s = sigma_diagonal(spec)
    assert s[0] == 1.0 and s[-1] == pytest.approx(1e-10)
    s = sigma_diagonal(EnsembleSpec(4, sigma={"kind": "quantiles", "atoms": [[1.0, 0.25], [2.0, 0.75]]}))
    assert s.tolist() == [1.0, 2.0, 2.0, 2.0]


@pytest.mark.parametrize(
    "kw",
    [
        {"N": 0},
        {"N": 5000},
        {"trials": 0},
        {"sigma": {"kind": "explicit", "values": [20.0]}},
        {"sigma": {"kind": "explicit", "values": [-1.0]}},
        {"sigma": {"kind": "explicit", "values": [0.0, 1.0]}, "alpha": 3},
        {"a": {"kind": "hermitian_diag", "values": [-30.0, 30.0]}},
        {"a": {"kind": "mystery"}},
        {"sigma": {"kind": "explicit", "values": [1.0, 2.0, 3.0]}},
    ],
)
def test_bad_specs(kw):
    d = {"N": 10, **kw}
    with pytest.raises(DomainError):
        EnsembleSpec.from_dict(d)


def test_spec_round_trip():
    spec = EnsembleSpec(10, a={"kind": "jordan_block"}, seed=4, trials=2, M=2.0)
    assert EnsembleSpec.from_dict(spec.to_dict()) == spec
    assert spec.with_(N=20).N == 20
    with pytest.raises(DomainError):
        EnsembleSpec.from_dict({"N": 4, "bogus": 1})


def test_a_matrices(tmp_path):
    assert np.array_equal(a_matrix(EnsembleSpec(3, a={"kind": "jordan_block"})), jordan_matrix(3))
    p = a_matrix(EnsembleSpec(4, a={"kind": "unitary_perm"}))
    np.testing.assert_allclose(p @ p.conj().T, np.eye(4))
    m = np.diag([0.1, 0.2, 0.3])
    path = tmp_path / "a.npy"
    np.save(path, m)
    assert np.array_equal(a_matrix(EnsembleSpec(3, a={"kind": "file", "path": str(path)})), m)
    with pytest.raises(DomainError):
        EnsembleSpec(4, a={"kind": "file", "path": str(path)})


def test_assemble_structure():
    spec = EnsembleSpec(30, sigma={"kind": "explicit", "values": [0.5, 1.0]}, a={"kind": "jordan_block"})
    y, u, v, s, a = assemble(spec, 0)
    np.testing.assert_allclose(y, u @ np.diag(s) @ v.conj().T + a, atol=1e-12)
    sv = hermitize_svals(y - a, 0.0)
    np.testing.assert_allclose(np.sort(sv), np.sort(s), atol=1e-12)


def test_eigenvalues_of_diagonal():
    ev = eigenvalues(np.diag([1.0, 2.0j]))
    assert sorted(ev.tolist(), key=abs) == [1.0, 2.0j]


def test_hermitization_route_agrees(rng):
    y = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    np.testing.assert_allclose(hermitization_svals(y, 0.3j), hermitize_svals(y, 0.3j), atol=1e-11)


def test_empirical_cauchy_is_imaginary():
    g = empirical_cauchy([0.0, 1.0, 2.0], np.array([0.5, 1.0]))
    assert np.all(g.real == 0.0) and np.all(g.imag < 0)
    assert empirical_cauchy([1.0], 1.0) == -0.5j
    with pytest.raises(DomainError):
        empirical_cauchy([1.0], 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.floats(-3, 3), st.floats(-3, 3))
def test_bidiagonal_svals_match_dense(n, re, im):
    lam = complex(re, im)
    d = np.full(n, -lam)
    e = np.ones(n - 1)
    m = np.diag(d) + np.diag(e, 1)
    np.testing.assert_allclose(bidiagonal_svals(d, e), np.linalg.svd(m, compute_uv=False), atol=1e-12)
    np.testing.assert_allclose(singular_values(m), jordan_svals(n, lam), atol=1e-12)


def test_singular_values_dense_path(rng):
    m = rng.standard_normal((5, 5))
    np.testing.assert_allclose(singular_values(m), np.linalg.svd(m, compute_uv=False))


@pytest.mark.parametrize("n", [2, 10, 60])
@pytest.mark.parametrize("r", [0.3, 0.7, 1.5, 3.0])
def test_jordan_sv_bound(n, r):
    for th in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        assert jordan_sv_check(n, r * np.exp(1j * th))


def test_jordan_sv_bound_is_sharp_inside():
    # one singular value of J - lam is exponentially small for |lam| < 1
    s = jordan_svals(60, 0.5)
    assert s[-1] < 1e-15
    assert s[-2] >= 0.5


def test_interlacing_random_rank(rng):
    n = 12
    lo = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    for k in (0, 1, 3):
        up = lo + rng.standard_normal((n, k)) @ rng.standard_normal((k, n))
        res = interlacing_check(lo, up, 0.4 - 0.2j)
        assert res.holds and res.rank == k


def test_interlacing_detects_violation():
    lo = np.diag([1.0, 1.0, 1.0])
    up = np.diag([5.0, 5.0, 1.0])  # rank 2 difference
    res = interlacing_check(lo, up, 0.0)
    assert res.rank == 2 and res.holds
    # pretend the difference had rank 0
    assert interlacing_check(lo, lo, 0.0).holds


def test_interlacing_ambiguous_rank():
    lo = np.eye(3)
    up = np.eye(3) + np.diag([1.0, 1e-10, 0.0])
    assert interlacing_check(lo, up, 0.5).holds is None


def test_smin_and_tail():
    spec = EnsembleSpec(30, trials=5, seed=1)
    y = assemble(spec, 0)[0]
    # Sigma = I, A = 0 makes Y unitary
    assert smin(y, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert smin(y, 2.0) >= 1.0 - 1e-12
    tail = smin_tail(spec, 0.5, [1e-3, 0.6])
    assert tail.exceedance[0] == 0.0 and tail.samples.shape == (5,)
    with pytest.raises(DomainError):
        smin_tail(EnsembleSpec(4, sigma={"kind": "explicit", "values": [1.0]}), 0.0, [1.0])


def test_product_smin(rng):
    a = rng.standard_normal((6, 6))
    b = rng.standard_normal((6, 6))
    assert product_smin_property(a, b)


def test_free_sum_eigenvalues():
    ev = free_sum_eigenvalues(np.repeat([-1.0, 1.0], 100), np.repeat([-1.0, 1.0], 100), np.random.default_rng(0))
    assert ev.size == 200
    assert np.all(np.abs(ev) <= 2 + 1e-10)
    assert np.mean(ev) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DomainError):
        free_sum_eigenvalues([1.0], [1.0, 2.0], np.random.default_rng(0))


def test_approx_subordination_scalar_shift():
    # Sigma = c I with U = V: B = c I, so omega_A = z - c exactly
    spec = EnsembleSpec(20, sigma={"kind": "explicit", "values": [0.0, 1.0]}, a={"kind": "hermitian_diag", "values": [-1.0, 1.0]}, trials=4, seed=2)
    wa, wb, stats = approx_subordination(spec, 0.0, 0.5, return_stats=True)
    assert abs(wa.real) <= 3 * stats["se_re_omega_a"]
    assert wa.imag > 0 and wb.imag > 0
    assert stats["se_re_omega_a"] >= 64 * np.finfo(float).eps * abs(wa)


def test_csv_writers():
    fh = io.StringIO()
    write_eigenvalues_csv(fh, [(0, np.array([1 + 2j]))])
    assert fh.getvalue() == "trial,re,im\n0,1.0,2.0\n"
    fh = io.StringIO()
    write_svals_csv(fh, [(1, 0.5j, [2.0, 1.0])])
    assert fh.getvalue().splitlines()[1:] == ["1,0.0,0.5,1,2.0", "1,0.0,0.5,2,1.0"]
