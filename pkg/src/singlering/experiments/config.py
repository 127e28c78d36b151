"""Scenario configuration records and their JSON form.

A scenario file looks like::

    {
      "kind": "single_ring",
      "ensemble": {"N": 1000, "trials": 10, "seed": 7,
                   "sigma": {"kind": "explicit", "values": [0.5, 1.0]},
                   "a": {"kind": "zero"}},
      "grid": {"n": 201},
      "thresholds": {"radial_ks": 0.05, "energy_distance": 0.05},
      "params": {}
    }

``model`` may be given explicitly; otherwise it is derived from the ensemble
(the law of the diagonal of ``Sigma`` and the limit law of ``A``).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..brown import GridSpec, OperatorModel
from ..errors import DomainError
from ..measures import AtomicMeasure, levy_distance
from ..randmat import EnsembleSpec, a_matrix, sigma_diagonal
from ..subordination import SolverSettings

__all__ = ["ScenarioConfig", "ConfigError", "model_from_dict", "model_for_ensemble", "KINDS"]

KINDS = (
    "convolve",
    "single_ring",
    "deformed_hermitian",
    "deformed_unitary",
    "jordan",
    "local_law",
    "local_window",
    "lsv_tail",
    "assumption_audit",
)

#: thresholds used when a config gives none
DEFAULT_THRESHOLDS = {
    "single_ring": {"radial_ks": 0.05, "energy_distance": 0.05},
    "deformed_hermitian": {"radial_ks": 0.05, "energy_distance": 0.05},
    "deformed_unitary": {"radial_ks": 0.05, "energy_distance": 0.05},
    "jordan": {"energy_twin": 0.05, "energy_field": 0.07},
    "local_law": {"slope_min": -1.4, "slope_max": -0.6},
    "local_window": {"normalized_deviation": 10.0},
    "lsv_tail": {"floor_slack": 1e-10, "tiny_fraction": 0.0},
    "assumption_audit": {},
    "convolve": {},
}


class ConfigError(DomainError):
    """A scenario file violates an invariant; the message names it."""


def _atoms(pairs, what):
    try:
        a = np.asarray(pairs, dtype=float)
        return AtomicMeasure(a[:, 0], a[:, 1])
    except (DomainError, IndexError, ValueError, TypeError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def model_from_dict(d):
    """``{"sigma_law": [[t, w], ...], "a_kind": ..., "a_atoms": [[x, w], ...]}``."""
    sigma = _atoms(d["sigma_law"], "model.sigma_law")
    kind = d.get("a_kind", "scalar_zero")
    if kind == "hermitian":
        return OperatorModel.hermitian(sigma, _atoms(d["a_atoms"], "model.a_atoms"))
    if kind == "haar_unitary":
        return OperatorModel.haar_unitary(sigma, int(d.get("n_atoms", 4096)))
    if kind in ("normal_from_matrix", "general_from_matrix"):
        m = np.load(d["matrix_path"]) if "matrix_path" in d else np.asarray(d["matrix"], dtype=complex)
        return OperatorModel(sigma, kind, matrix=m)
    return OperatorModel(sigma, kind)


def sigma_law_of(spec):
    s = sigma_diagonal(spec)
    return AtomicMeasure(s)


def model_for_ensemble(spec):
    """Operator model whose laws are those of the ensemble's ``Sigma`` and limit of ``A``."""
    sigma = sigma_law_of(spec)
    kind = spec.a["kind"]
    if kind == "zero":
        return OperatorModel.scalar_zero(sigma)
    if kind == "hermitian_diag":
        vals = np.asarray(spec.a["values"], dtype=float)
        return OperatorModel.hermitian(sigma, AtomicMeasure(vals))
    if kind in ("unitary_perm", "jordan_block", "haar"):
        # the cyclic shift and the Jordan block both have the Haar unitary as limit law
        return OperatorModel.haar_unitary(sigma)
    return OperatorModel.general_from_matrix(sigma, a_matrix(spec))


@dataclass
class ScenarioConfig:
    """Everything one run needs; see the module docstring for the JSON layout."""

    kind: str
    ensemble: EnsembleSpec = None
    model: OperatorModel = None
    grid: GridSpec = None
    thresholds: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    solver: SolverSettings = field(default_factory=SolverSettings)
    out: str = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d, seed=None, out=None):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        kind = d.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
        ens = None
        if "ensemble" in d:
            e = dict(d["ensemble"])
            if seed is not None:
                e["seed"] = int(seed)
            try:
                ens = EnsembleSpec.from_dict(e)
            except (DomainError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"ensemble: {exc}") from exc
        model = None
        if "model" in d:
            try:
                model = model_from_dict(d["model"])
            except (DomainError, KeyError) as exc:
                raise ConfigError(f"model: {exc}") from exc
        elif ens is not None:
            try:
                model = model_for_ensemble(ens)
            except DomainError as exc:
                raise ConfigError(f"model: {exc}") from exc
        if model is not None and ens is not None:
            # the ensemble's Sigma must be drawn from the model's sigma law
            dist = levy_distance(model.sigma_law, sigma_law_of(ens))
            if dist > 1e-6:
                raise ConfigError(
                    f"model.sigma_law differs from the ensemble's Sigma law (Levy distance {dist:.3g})"
                )
        grid = None
        if "grid" in d or model is not None:
            g = d.get("grid", {})
            if "side" in g or "center" in g:
                grid = GridSpec.from_dict(g)
            elif model is not None:
                grid = GridSpec.default_for(model, int(g.get("n", 201)))
        thresholds = dict(DEFAULT_THRESHOLDS.get(kind, {}))
        thresholds.update(d.get("thresholds", {}))
        solver = SolverSettings.from_dict(d.get("solver", {}))
        return cls(
            kind=kind,
            ensemble=ens,
            model=model,
            grid=grid,
            thresholds=thresholds,
            params=dict(d.get("params", {})),
            solver=solver,
            out=out or d.get("out"),
            raw=d,
        )

    @classmethod
    def load(cls, path, seed=None, out=None):
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d, seed=seed, out=out)

    def to_dict(self):
        return {
            "kind": self.kind,
            "ensemble": self.ensemble.to_dict() if self.ensemble else None,
            "model": self.model.to_dict() if self.model else None,
            "grid": self.grid.to_dict() if self.grid else None,
            "thresholds": self.thresholds,
            "params": self.params,
            "solver": self.solver.to_dict(),
        }
