"""TOML experiment configuration: parsing, validation, defaults.

Schema (version 1):

    schema_version = 1
    kind = "duality_gap"          # one of the seven experiment kinds
    seed = 42

    [cost]
    kind = "euclidean"            # euclidean | p_norm | one_norm | weighted_p | smoothed
    dim = 2
    p = 2.0
    # exponent / weights / k / [cost.base] for the parametric kinds

    [params]
    # kind-specific knobs; unknown keys are rejected

Every experiment draws all randomness from the explicit seed, so validated
configs describe fully reproducible runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib as tomli  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli

from .norms import CostSpec, NormSpec

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "load_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = (
    "slope_check",
    "duality_gap",
    "potential_estimates",
    "maxpot_convergence",
    "boas_suite",
    "projection_convergence",
    "modulus_probe",
)

_PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "duality_gap": {
        "instances": 100,
        "max_atoms": 50,
        "p_values": [2.0, 2.5, 3.0],
        "gap_tol": 1e-8,
        "feasibility_tol": 1e-8,
        "slackness_tol": 1e-8,
        "fixpoint_tol": 1e-10,
        "box": 2.0,
    },
    "slope_check": {
        "functions": 10,
        "p_values": [2.0, 3.0],
        "atoms": 20,
        "eps": 1e-3,
        "t_schedule": [1e-1, 1e-2, 1e-3, 1e-4],
        "radius_schedule": [0.5, 0.25, 0.1],
        "pairs_per_radius": 12,
        "bracket_width": 0.05,
    },
    "potential_estimates": {
        "instances": 20,
        "radii": [1.0, 2.0],
        "p_values": [2.0, 2.5],
        "sample_pairs": 10000,
        "nu_atoms": 50,
        "mu_atoms": 50,
        "mu_box": 3.0,
        "tol": 1e-9,
    },
    "maxpot_convergence": {
        "grid_size": 40,
        "battery_size": 5,
        "eps": 0.05,
        "sample_n": 2000,
        "nu_atoms": 25,
        "atoms": 12,
        "box": 2.0,
    },
    "boas_suite": {
        "presets": [[2.0, 2.0, 2.0, 2.0], [3.0, 3.0, 1.5, 2.0]],  # (p', r, s, q)
        "trials": 500,
        "meta_atoms": 10,
        "atoms_per_measure": 6,
        "tol": 1e-9,
        "check_qsum": True,
    },
    "projection_convergence": {
        "instances": 5,
        "atoms": 15,
        "tol": 1e-8,
        "box": 1.5,
    },
    "modulus_probe": {
        "t": 2.0,
        "trials": 200,
        "preset": "pce_euclid",  # or "vector_p"
        "meta_atoms": 6,
        "atoms_per_measure": 5,
        "positivity_eps": 0.25,
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit status 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    cost: CostSpec
    params: dict[str, Any] = field(default_factory=dict)
    schema_version: int = 1


def _build_norm(table: dict[str, Any]) -> NormSpec:
    kind = table.get("kind")
    dim = table.get("dim")
    if kind is None or dim is None:
        raise ConfigError("[cost] needs 'kind' and 'dim'")
    try:
        if kind == "euclidean":
            return NormSpec(dim=int(dim), kind="euclidean")
        if kind == "one_norm":
            return NormSpec(dim=int(dim), kind="one_norm")
        if kind == "p_norm":
            exp = table.get("exponent")
            if exp is None:
                raise ConfigError("p_norm requires 'exponent'")
            return NormSpec(
                dim=int(dim),
                kind="p_norm",
                exponent=math.inf if exp in ("inf", "sup") else float(exp),
            )
        if kind == "weighted_p":
            if "weights" not in table or "exponent" not in table:
                raise ConfigError("weighted_p requires 'weights' and 'exponent'")
            return NormSpec(
                dim=int(dim),
                kind="weighted_p",
                exponent=float(table["exponent"]),
                weights=tuple(float(w) for w in table["weights"]),
            )
        if kind == "smoothed":
            if "base" not in table or "k" not in table:
                raise ConfigError("smoothed requires a [cost.base] table and 'k'")
            return NormSpec(
                dim=int(dim),
                kind="smoothed",
                base=_build_norm(table["base"]),
                k=int(table["k"]),
            )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid norm parameters: {exc}") from exc
    raise ConfigError(f"unknown norm kind {kind!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML config; raises ConfigError on any problem."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc

    version = raw.get("schema_version")
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version!r} (expected 1)")
    kind = raw.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment kind {kind!r}; expected one of {', '.join(EXPERIMENT_KINDS)}"
        )
    seed = raw.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' must be an explicit integer")

    cost_table = raw.get("cost")
    if not isinstance(cost_table, dict):
        raise ConfigError("missing [cost] table")
    p = cost_table.get("p")
    if p is None:
        raise ConfigError("[cost] needs the exponent 'p'")
    try:
        cost = CostSpec(norm=_build_norm(cost_table), p=float(p))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid cost: {exc}") from exc

    params = dict(_PARAM_DEFAULTS[kind])
    user_params = raw.get("params", {})
    if not isinstance(user_params, dict):
        raise ConfigError("[params] must be a table")
    unknown = set(user_params) - set(params)
    if unknown:
        raise ConfigError(
            f"unknown [params] keys for {kind}: {', '.join(sorted(unknown))}"
        )
    params.update(user_params)
    _validate_params(kind, params)

    extra_top = set(raw) - {"schema_version", "kind", "seed", "cost", "params"}
    if extra_top:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(extra_top))}")
    return ExperimentConfig(kind=kind, seed=seed, cost=cost, params=params)


def _validate_params(kind: str, params: dict[str, Any]) -> None:
    for key, value in params.items():
        if key.endswith("_tol") or key == "tol":
            if not (isinstance(value, (int, float)) and value > 0):
                raise ConfigError(f"tolerance {key!r} must be positive")
    positive_counts = {
        "instances",
        "functions",
        "atoms",
        "max_atoms",
        "trials",
        "sample_pairs",
        "nu_atoms",
        "mu_atoms",
        "grid_size",
        "battery_size",
        "sample_n",
        "meta_atoms",
        "atoms_per_measure",
        "pairs_per_radius",
    }
    for key in positive_counts & set(params):
        value = params[key]
        if not (isinstance(value, int) and value > 0):
            raise ConfigError(f"{key!r} must be a positive integer")
    if kind == "boas_suite":
        for preset in params["presets"]:
            if len(preset) != 4:
                raise ConfigError("each Boas preset is [p_prime, r, s, q]")
            p_prime, r, s, q = (float(x) for x in preset)
            if min(p_prime, r, s, q) <= 1.0:
                raise ConfigError("Boas preset entries must exceed 1")
            if not (s <= q <= r):
                raise ConfigError(f"preset {preset}: need s <= q <= r")
    if kind == "modulus_probe" and params["preset"] not in ("pce_euclid", "vector_p"):
        raise ConfigError("modulus_probe preset must be 'pce_euclid' or 'vector_p'")
    if kind == "maxpot_convergence" and not (0.0 < float(params["eps"]) < 1.0):
        raise ConfigError("'eps' must lie in (0, 1)")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text)
