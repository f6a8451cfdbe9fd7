"""Experiment configuration: one JSON document, reference parameters as defaults."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .spectral import ModelParams, build_running_example

DEFAULTS = {
    "model": {"rates": {"tau1": 0.5, "tau2": 5.0, "beta2": 1.0, "beta3": 2.0}},
    "bounds": {"a": 1.0, "A": 6.0},
    "numerics": {"dy": 1e-2, "dt": 1e-3, "T": 10.0, "eps": [0.1, 0.05, 0.01],
                 "delta": 0.1, "seed": 0},
    "outputs": {"dir": "out", "format": "csv"},
}
FORMATS = ("csv", "json")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    ``model`` holds either ``rates`` (``tau1, tau2, beta2, beta3`` of the
    three-compartment example) or raw ``G``, ``F``, ``m``.
    """

    model: dict
    bounds: dict
    numerics: dict
    outputs: dict
    params: ModelParams = field(init=False, repr=False)

    def __post_init__(self):
        self.params = self._build_params()
        n = self.numerics
        for key in ("dy", "dt", "T", "delta"):
            if not (isinstance(n[key], (int, float)) and np.isfinite(n[key]) and n[key] >= 0):
                raise ValidationError(f"numerics.{key} must be a nonnegative number")
        if not (n["dy"] > 0 and n["dt"] > 0 and n["T"] > 0):
            raise ValidationError("dy, dt and T must be positive")
        eps = n["eps"]
        if isinstance(eps, (int, float)):
            eps = [eps]
        if not eps or any(not (isinstance(e, (int, float)) and e > 0) for e in eps):
            raise ValidationError("numerics.eps must be a list of positive numbers")
        n["eps"] = [float(e) for e in eps]
        if not isinstance(n["seed"], int) or n["seed"] < 0:
            raise ValidationError("numerics.seed must be a nonnegative integer")
        if self.outputs["format"] not in FORMATS:
            raise ValidationError(f"outputs.format must be one of {FORMATS}")

    def _build_params(self) -> ModelParams:
        b = self.bounds
        try:
            a, A = float(b["a"]), float(b["A"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad bounds {b}") from exc
        mdl = self.model
        if "G" in mdl or "F" in mdl:
            try:
                G, F = np.array(mdl["G"], dtype=float), np.array(mdl["F"], dtype=float)
                m = np.array(mdl.get("m", [1.0, 2.0, 3.0]), dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"bad model matrices: {exc}") from exc
            return ModelParams(G, F, m, a, A)
        r = mdl.get("rates")
        try:
            return build_running_example(float(r["tau1"]), float(r["tau2"]),
                                         float(r["beta2"]), float(r["beta3"]), a=a, A=A)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad model rates {r}") from exc

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "ExperimentConfig":
        d = _merge(DEFAULTS, d or {})
        if "G" in d["model"] or "F" in d["model"]:
            d["model"].pop("rates", None)
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config sections {sorted(unknown)}")
        return cls(d["model"], d["bounds"], d["numerics"], d["outputs"])

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {"model": self.model, "bounds": self.bounds, "numerics": self.numerics,
                "outputs": self.outputs}
