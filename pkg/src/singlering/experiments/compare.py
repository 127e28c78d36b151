"""Two-sample statistics between an eigenvalue cloud and a predicted field."""

import math

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import DomainError

__all__ = [
    "field_points",
    "sample_field",
    "radial_ks",
    "angular_ks",
    "energy_distance",
    "compare_esd_to_brown",
]

SUBCELLS = 8


def field_points(field, subcells=SUBCELLS):
    """Point masses representing the field: each cell split into ``subcells^2`` parts.

    Negative stencil values are clipped to zero. Detected atoms are appended.
    Returns ``(points, masses)`` with masses summing to one.
    """
    z = field.grid.nodes().ravel()
    m = np.clip(field.density.ravel(), 0.0, None) * field.cell_area
    keep = m > 0.0
    z, m = z[keep], m[keep]
    h = field.grid.spacing
    off = ((np.arange(subcells) + 0.5) / subcells - 0.5) * h
    sub = (off[None, :] + 1j * off[:, None]).ravel()
    pts = (z[:, None] + sub[None, :]).ravel()
    mass = np.repeat(m / sub.size, sub.size)
    if field.atoms:
        ap = np.array([complex(a, b) for a, b in field.atoms])
        am = np.array(list(field.atoms.values()))
        pts = np.concatenate([pts, ap])
        mass = np.concatenate([mass, am])
    total = mass.sum()
    if not total > 0.0:
        raise DomainError("field carries no mass")
    return pts, mass / total


def sample_field(field, n, rng):
    """``n`` points drawn from the field: cell by inverse CDF, then uniform in the cell."""
    z = field.grid.nodes().ravel()
    m = np.clip(field.density.ravel(), 0.0, None) * field.cell_area
    atoms = list(field.atoms.items())
    am = np.array([v for _, v in atoms])
    weights = np.concatenate([m, am])
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, weights.size - 1)
    h = field.grid.spacing
    jitter = (rng.random(n) - 0.5) * h + 1j * (rng.random(n) - 0.5) * h
    out = np.empty(n, dtype=complex)
    cell = idx < z.size
    out[cell] = z[idx[cell]] + jitter[cell]
    if atoms:
        ap = np.array([complex(a, b) for (a, b), _ in atoms])
        out[~cell] = ap[idx[~cell] - z.size]
    return out


def _weighted_ks(sample, points, weights):
    """``sup |F_sample - F_weighted|`` over all jump points."""
    sample = np.sort(np.asarray(sample, dtype=float))
    order = np.argsort(points)
    p = points[order]
    cw = np.cumsum(weights[order])
    grid = np.concatenate([sample, p])
    fs = np.searchsorted(sample, grid, side="right") / sample.size
    fw = np.concatenate([[0.0], cw])[np.searchsorted(p, grid, side="right")]
    # left limits as well, since both are step functions
    fs_l = np.searchsorted(sample, grid, side="left") / sample.size
    fw_l = np.concatenate([[0.0], cw])[np.searchsorted(p, grid, side="left")]
    return float(max(np.max(np.abs(fs - fw)), np.max(np.abs(fs_l - fw_l))))


def radial_ks(eigs, field):
    """KS distance between the moduli of ``eigs`` and the field's radial mass."""
    pts, w = field_points(field)
    return _weighted_ks(np.abs(eigs), np.abs(pts), w)


def angular_ks(eigs, field):
    """KS distance between arguments of ``eigs`` and the field's angular mass."""
    pts, w = field_points(field)
    return _weighted_ks(np.angle(eigs), np.angle(pts), w)


def _mean_dist(x, y, same, chunk=2048):
    x = np.column_stack([x.real, x.imag])
    y = np.column_stack([y.real, y.imag])
    total = 0.0
    for i in range(0, x.shape[0], chunk):
        total += cdist(x[i: i + chunk], y, "euclidean").sum()
    n, m = x.shape[0], y.shape[0]
    return total / (n * (n - 1)) if same else total / (n * m)


def energy_distance(x, y):
    """Energy distance ``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` with U-statistics for the last two.

    Symmetric in its arguments; unbiased, so it may be slightly negative for
    samples from one law.
    """
    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    if x.size < 2 or y.size < 2:
        raise DomainError("energy distance needs at least two points per cloud")
    return float(2.0 * _mean_dist(x, y, False) - _mean_dist(x, x, True) - _mean_dist(y, y, True))


def compare_esd_to_brown(eigs, field, rng=None, n_field=None, check_mass=True):
    """Radial KS, angular KS (rotation-invariant models) and energy distance.

    Parameters
    ----------
    eigs : array of complex
        Eigenvalues pooled over trials.
    field : BrownField
    rng : numpy Generator, optional
        For the field sample of the energy distance.
    n_field : int, optional
        Field sample size; defaults to ``len(eigs)`` capped at 20000.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        raise DomainError("empty spectrum")
    mass = field.total_mass
    if check_mass and not 0.98 <= mass <= 1.02:
        raise DomainError(f"field mass {mass:.6g} outside [0.98, 1.02]")
    rng = np.random.default_rng(0) if rng is None else rng
    n = n_field or min(eigs.size, 20000)
    out = {
        "radial_ks": radial_ks(eigs, field),
        "energy_distance": energy_distance(eigs, sample_field(field, n, rng)),
        "field_mass": mass,
        "n_eigenvalues": int(eigs.size),
    }
    if field.model is not None and field.model.rotation_invariant:
        out["angular_ks"] = angular_ks(eigs, field)
    return out
