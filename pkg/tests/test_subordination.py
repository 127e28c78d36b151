import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singlering.errors import BoundaryExtrapolationError, DomainError
from singlering.measures import AtomicMeasure, SymmetricMeasure
from singlering.subordination import (
    AtomStack,
    ConvolvedMeasure,
    SolverSettings,
    boundary_omega,
    bulk_test,
    classify_boundary,
    density_at,
    smoothed_cdf,
    solve,
    solve_axis,
)

from conftest import half_laws, symmetric_laws

GOLDEN = (1 + math.sqrt(5)) / 2


def omega_oracle(eta):
    # Bernoulli [+] Bernoulli: w^2 - i eta w - 1 = 0 in the upper half plane, on z = i eta
    return 1j * (eta + math.sqrt(eta * eta + 4)) / 2


def test_bernoulli_omega_at_i(bernoulli):
    r = solve(bernoulli, bernoulli, 1j)
    assert abs(r.omega1 - 1j * GOLDEN) <= 1e-10
    assert r.omega1 == r.omega2


@pytest.mark.parametrize("eta", [1e-4, 0.3, 3.0, 1e3])
def test_bernoulli_omega_on_axis(bernoulli, eta):
    r = solve(bernoulli, bernoulli, 1j * eta)
    assert abs(r.omega1 - omega_oracle(eta)) <= 1e-10 * (1 + eta)


def test_bernoulli_cauchy_closed_form(bernoulli):
    c = ConvolvedMeasure(bernoulli, bernoulli)
    eta = np.geomspace(1e-4, 1e3, 50)
    g = c.cauchy(1j * eta)
    assert np.max(np.abs(g - (-1j / np.sqrt(eta**2 + 4)))) <= 1e-8


@pytest.mark.parametrize("z", [0.5 + 0.1j, -1.3 + 0.01j, 2.5 + 1e-3j, 0.0 + 2.0j])
def test_bernoulli_cauchy_off_axis(bernoulli, z):
    # arcsine law on [-2, 2]: G(z) = 1 / sqrt(z^2 - 4) on the upper branch
    c = ConvolvedMeasure(bernoulli, bernoulli)
    g = complex(c.cauchy(z))
    ref = 1 / (np.sqrt(z - 2) * np.sqrt(z + 2))
    assert abs(g - ref) <= 1e-8


def test_arcsine_density(bernoulli):
    c = ConvolvedMeasure(bernoulli, bernoulli)
    for x in (0.0, 1.0, -1.5):
        assert density_at(c, x) == pytest.approx(1 / (math.pi * math.sqrt(4 - x * x)), rel=1e-6)
    assert abs(density_at(c, 3.0)) < 1e-10


def test_point_mass_rejected(bernoulli):
    with pytest.raises(DomainError):
        solve(SymmetricMeasure(AtomicMeasure([0.0])), bernoulli, 1j)
    with pytest.raises(DomainError):
        solve(bernoulli, bernoulli, 1.0)


@settings(max_examples=60, deadline=None)
@given(symmetric_laws(), symmetric_laws(), st.floats(1e-4, 1e3))
def test_axis_solutions_are_imaginary(a, b, eta):
    r = solve(a, b, 1j * eta)
    assert r.omega1.real == 0.0 and r.omega2.real == 0.0
    assert r.omega1.imag >= eta and r.omega2.imag >= eta
    assert r.residual <= 1e-10 * (1 + eta)


@settings(max_examples=40, deadline=None)
@given(symmetric_laws(), symmetric_laws(), st.floats(-3, 3), st.floats(1e-3, 10))
def test_complex_residual_and_subordination(a, b, x, y):
    z = complex(x, y)
    r = solve(a, b, z)
    assert r.residual <= 1e-10 * (1 + abs(z))
    # omega1 + omega2 = z + F(z), and both F_mu(omega_j) agree
    f1 = 1 / a.cauchy(r.omega1)
    f2 = 1 / b.cauchy(r.omega2)
    assert abs(f1 - f2) <= 1e-9 * (1 + abs(f1))
    assert abs(r.omega1 + r.omega2 - z - f1) <= 1e-9 * (1 + abs(f1))
    assert r.omega1.imag >= y * (1 - 1e-12)


def test_non_symmetric_laws_use_complex_solver():
    a = AtomicMeasure([-1.0, 2.0], [0.6, 0.4])
    b = AtomicMeasure([0.0, 1.0])
    r = solve(a, b, 1j)
    assert r.residual <= 2e-10
    assert r.omega1.real != 0.0


def test_batch_axis_solver_matches_scalar():
    halves = [AtomicMeasure([0.5, 1.0]), AtomicMeasure([0.2, 2.0], [0.3, 0.7]), AtomicMeasure([1.0])]
    stack = AtomStack.from_measures(halves)
    b = SymmetricMeasure(AtomicMeasure([0.7]))
    batch = solve_axis(stack, b, 0.01)
    for k, h in enumerate(halves):
        one = solve_axis(SymmetricMeasure(h), b, 0.01)
        assert batch.y1[k] == pytest.approx(one.y1[0], rel=1e-13)


def test_cauchy_on_axis_vectorized(bernoulli):
    c = ConvolvedMeasure(bernoulli, SymmetricMeasure(AtomicMeasure([0.5, 2.0])))
    eta = np.array([3.0, 1e-3, 0.5])
    g = c.cauchy_on_axis(eta)
    for e, v in zip(eta, g):
        assert v == pytest.approx(complex(c.cauchy(1j * e)), rel=1e-12)


def test_boundary_values():
    c = ConvolvedMeasure(*(SymmetricMeasure(AtomicMeasure([1.0])),) * 2)
    bv = boundary_omega(c, 1)
    assert bv.is_finite_positive
    assert bv.value == pytest.approx(1.0, rel=1e-4)
    # 1/2 delta_0 + 1/4 (delta_2 + delta_-2) with itself has an atom at zero
    s = SymmetricMeasure(AtomicMeasure([0.0, 2.0]))
    cs = ConvolvedMeasure(s, s)
    assert boundary_omega(cs, 1).classified == "zero"
    assert not bulk_test(cs, 0.0)
    with pytest.raises(DomainError):
        boundary_omega(c, 3)


def test_bulk_test(bernoulli):
    c = ConvolvedMeasure(bernoulli, bernoulli)
    assert bulk_test(c, 0.0)
    assert not bulk_test(c, 2.5)


def test_classify_boundary_cases():
    k = np.arange(17)
    assert classify_boundary(2.0 + 2.0**-k).classified == "finite_positive"
    assert classify_boundary(2.0 + 2.0**-k).value == pytest.approx(2.0, rel=1e-12)
    assert classify_boundary(2.0 ** (-k - 20.0)).classified == "zero"
    assert classify_boundary(2.0 ** (k + 10.0)).classified == "infinite"
    with pytest.raises(BoundaryExtrapolationError):
        classify_boundary(1.0 + 0.1 * (-1.0) ** k)


def test_settings_round_trip():
    s = SolverSettings(tol=1e-11, ladder_kmax=20)
    assert SolverSettings.from_dict(s.to_dict()) == s


def test_smoothed_cdf(bernoulli):
    c = ConvolvedMeasure(bernoulli, bernoulli)
    x = np.linspace(-3, 3, 6001)
    f = smoothed_cdf(c, x, eps=1e-4)
    ref = np.clip(0.5 + np.arcsin(np.clip(x / 2, -1, 1)) / np.pi, 0, 1)
    assert np.all(np.diff(f) >= 0)
    assert np.max(np.abs(f - ref)) < 0.01
    with pytest.raises(DomainError):
        smoothed_cdf(c, x[::-1])
