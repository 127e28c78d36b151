"""Fixed panel rules for integrals along the positive imaginary axis.

Integrals of the form ``int_0^1 f(eta) d eta`` where ``f`` may vary on every
scale between 1 and 1e-8 are split into geometric panels ``[2^-(k+1), 2^-k]``
and integrated in the log variable with Gauss-Legendre rules. A coarser rule
on the same panels gives the error estimate.

The companion rule for ``int_1^inf g(eta) d eta`` maps ``eta = 1/t`` onto
``t in (0, 1]`` and reuses the same panels.
"""

from dataclasses import dataclass

import numpy as np

#: Smallest panel endpoint; ``2**-27 ~ 7.5e-9`` lies just below 1e-8.
ETA_FLOOR_EXPONENT = 27
FINE_ORDER = 8
COARSE_ORDER = 5


@dataclass(frozen=True)
class PanelRule:
    """Nodes and weights of a composite rule with an embedded error estimate.

    ``nodes`` and ``weights`` concatenate the fine and coarse rules; the first
    ``n_fine`` entries belong to the fine rule. ``panel`` maps each node to its
    panel index so per-panel differences can be formed.
    """

    nodes: np.ndarray
    weights: np.ndarray
    panel: np.ndarray
    n_fine: int
    n_panels: int

    def integrate(self, values):
        """Return ``(integral, error_estimate)`` along the last axis of ``values``."""
        values = np.asarray(values)
        wv = values * self.weights
        fine = wv[..., : self.n_fine]
        coarse = wv[..., self.n_fine:]
        pf = self.panel[: self.n_fine]
        pc = self.panel[self.n_fine:]
        shape = values.shape[:-1] + (self.n_panels,)
        per_fine = np.zeros(shape, dtype=wv.dtype)
        per_coarse = np.zeros(shape, dtype=wv.dtype)
        for p in range(self.n_panels):
            per_fine[..., p] = fine[..., pf == p].sum(axis=-1)
            per_coarse[..., p] = coarse[..., pc == p].sum(axis=-1)
        integral = per_fine.sum(axis=-1)
        error = np.abs(per_fine - per_coarse).sum(axis=-1)
        return integral, error


def _gauss(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def lower_axis_rule(floor_exponent=ETA_FLOOR_EXPONENT):
    """Rule for ``int_{eta_min}^1 f(eta) d eta`` on geometric panels.

    Weights already contain the Jacobian ``d eta = eta ds``.
    """
    nodes, weights, panel = [], [], []
    for order in (FINE_ORDER, COARSE_ORDER):
        for k in range(floor_exponent):
            s, w = _gauss(order, -(k + 1) * np.log(2.0), -k * np.log(2.0))
            eta = np.exp(s)
            nodes.append(eta)
            weights.append(w * eta)
            panel.append(np.full(order, k))
    nodes = np.concatenate(nodes)
    return PanelRule(
        nodes=nodes,
        weights=np.concatenate(weights),
        panel=np.concatenate(panel),
        n_fine=FINE_ORDER * floor_exponent,
        n_panels=floor_exponent,
    )


def upper_axis_rule(floor_exponent=ETA_FLOOR_EXPONENT):
    """Rule for ``int_1^inf g(eta) d eta`` written as ``int_0^1 g(1/t) t^-2 dt``.

    The same geometric panels as :func:`lower_axis_rule` are used in ``t``, so
    integrands peaked at ``t ~ 1/R`` for a large support radius ``R`` are
    resolved. Nodes are returned as ``t`` values; callers evaluate at
    ``eta = 1/t`` and multiply by ``t^-2`` themselves.
    """
    return lower_axis_rule(floor_exponent)


def eta_ladder(kmin=0, kmax=ETA_FLOOR_EXPONENT):
    """Dyadic heights ``2^-k`` for ``k = kmin..kmax``."""
    return 2.0 ** -np.arange(kmin, kmax + 1, dtype=float)
