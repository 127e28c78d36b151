"""Free additive convolution through subordination.

The symmetric Bernoulli law b = (delta_-1 + delta_1)/2 convolved with itself
is the arcsine law on [-2, 2]. On the imaginary axis its subordination
function solves a quadratic, so omega(i) is the golden ratio times i.

Then a law with no closed form, (+-1) [+] (+-1/2), is compared with the
eigenvalues of diag(+-1) + Q diag(+-1/2) Q* for a Haar unitary Q.
"""

import math

import numpy as np

from singlering import AtomicMeasure, ConvolvedMeasure, SymmetricMeasure, solve
from singlering.randmat import free_sum_eigenvalues, rng_stream
from singlering.subordination import boundary_omega, density_at, smoothed_cdf

b = SymmetricMeasure(AtomicMeasure([1.0]))
r = solve(b, b, 1j)
print(f"omega(i)          = {r.omega1:.15f}")
print(f"golden ratio * i  = {1j * (1 + math.sqrt(5)) / 2:.15f}")

c = ConvolvedMeasure(b, b)
for x in (0.0, 1.0, 1.9):
    print(f"density at {x:3.1f}: {density_at(c, x):.10f}   arcsine {1 / (math.pi * math.sqrt(4 - x * x)):.10f}")
print("omega_1(i0+):", boundary_omega(c, 1))

# a second example, checked against matrices
half = SymmetricMeasure(AtomicMeasure([0.5]))
c2 = ConvolvedMeasure(b, half)
x = np.linspace(-2.0, 2.0, 4001)
f = smoothed_cdf(c2, x)
n = 800
ev = np.sort(np.concatenate([
    free_sum_eigenvalues(np.repeat([-1.0, 1.0], n // 2), np.repeat([-0.5, 0.5], n // 2), rng_stream(1, k, "Q"))
    for k in range(5)
]))
emp = np.searchsorted(ev, x, side="right") / ev.size
print(f"sup |F_matrix - F_free| at N={n}, 5 trials: {np.max(np.abs(emp - f)):.4f}")
