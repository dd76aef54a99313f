"""Run configuration: JSON documents merged over embedded defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .kernel import ProductSpaceConfig
from .minkowski import DualNormHandle, DualSolverOptions, dual_norm, make_builtin_norm
from .quadrature import QuadratureSpec

__all__ = ["ConfigError", "DEFAULTS", "CHECK_NAMES", "RunConfig", "parse_norm",
           "load_config", "merge"]

CHECK_NAMES = (
    "constants_identity", "duality", "gegenbauer_pipeline", "kernel_mass", "kernel_scaling",
    "pde_residuals", "special_identities", "subordination", "wulff",
)

DEFAULTS = {
    "space": {
        "m": 2, "k": 2, "alpha": 1.0, "p": 2.0,
        "phi": {"kind": "euclidean"},
        "psi": {"kind": "euclidean"},
    },
    "quadrature": {"rel_tol": 1e-12, "abs_tol": 1e-15, "max_panels": 200000,
                   "truncation_safety": 1.0},
    "checks": "all",
    "seed": 0,
    "samples": {"duality_points": 100, "special_trials": 100, "scaling_points": 5,
                "subordination_points": 4, "pde_points": 2},
    "grid": {"r": [0.5, 1.0], "s": [0.0, 0.5], "t": [1.0]},
    "points": None,
    "output": {"path": None, "format": "json"},
    "fault_injection": {"sigma_alpha_p_scale": 1.0},
}


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if key not in base:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("phi", "psi"):
            out[key] = merge(base[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_norm(desc, dim: int) -> DualNormHandle:
    """``{"kind": "quadratic", "matrix": [[...]]}`` and friends -> dual handle."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError(f"norm descriptor must be an object with a 'kind': {desc!r}")
    kind = desc["kind"]
    params = {}
    try:
        if kind == "quadratic":
            params["matrix"] = np.asarray(desc["matrix"], dtype=float)
        elif kind == "pnorm":
            params["p"] = float(desc["p"])
        elif kind == "quartic_perturbation":
            params["epsilon"] = float(desc.get("epsilon", 0.0))
        elif kind != "euclidean":
            raise ConfigError(f"unknown norm kind {kind!r}")
        extra = set(desc) - {"kind", "matrix", "p", "epsilon", "solver"}
        if extra:
            raise ConfigError(f"unexpected norm fields {sorted(extra)}")
        norm = make_builtin_norm(kind, dim, **params)
        opts = DualSolverOptions(**desc["solver"]) if "solver" in desc else None
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} norm descriptor: {exc}") from exc
    return dual_norm(norm, opts)


@dataclass
class RunConfig:
    raw: dict
    space: ProductSpaceConfig
    quadrature: QuadratureSpec
    checks: list[str]
    seed: int
    samples: dict = field(default_factory=dict)
    sigma_scale: float = 1.0

    @classmethod
    def from_dict(cls, doc: dict | None) -> "RunConfig":
        raw = merge(DEFAULTS, doc or {})
        sp = raw["space"]
        try:
            m, k = int(sp["m"]), int(sp["k"])
            if m != sp["m"] or k != sp["k"] or m < 1 or k < 1:
                raise ConfigError("m and k must be integers >= 1")
            space = ProductSpaceConfig(m, k, parse_norm(sp["phi"], m), parse_norm(sp["psi"], k),
                                       float(sp["alpha"]), float(sp["p"]))
            quad = QuadratureSpec(**raw["quadrature"])
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        checks = raw["checks"]
        if checks == "all":
            checks = list(CHECK_NAMES)
        elif isinstance(checks, str):
            checks = [c for c in checks.split(",") if c]
        unknown = sorted(set(checks) - set(CHECK_NAMES))
        if unknown:
            raise ConfigError(f"unknown checks {unknown}")
        scale = float(raw["fault_injection"].get("sigma_alpha_p_scale", 1.0))
        return cls(raw, space, quad, sorted(set(checks)), int(raw["seed"]),
                   dict(raw["samples"]), scale)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(doc)
