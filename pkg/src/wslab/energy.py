"""Pre-Cheeger energy, Sobolev-type functionals, and Boas/Clarkson checks.

The pre-Cheeger energy of a cylinder function F against a finite measure m on
the space of measures is

    pCE_q(F) = sum_atoms mass * differential_norm(F, mu_atom, cost)^q,

and the Sobolev-type functional is (L^q norm^q + pCE_q)^{1/q}. A functional J
satisfies the (r, s)-Boas inequality when

    (J(u+v)^r + J(u-v)^r)^{1/r} <= 2^{1/s'} (J(u)^s + J(v)^s)^{1/s},

the classical Clarkson inequalities being the L^t special cases. The checkers
here evaluate residuals (left side subtracted from right side) on catalogued
or randomly generated cylinder-function pairs; nonnegative residuals confirm
the inequality on the sample.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ._rng import stream
from .cylinder import CylinderFunction, differential_norm, eval_cylinder
from .measures import MetaMeasure
from .norms import CostSpec

__all__ = [
    "BoasParams",
    "EnergyReport",
    "BoasReport",
    "ModulusTable",
    "pre_cheeger",
    "sobolev_functional",
    "boas_residual",
    "boas_qsum_preservation",
    "convexity_modulus_probe",
    "clarkson_params",
    "lq_functional",
    "pce_functional",
    "sobolev_q_functional",
]


@dataclass(frozen=True)
class BoasParams:
    r: float
    s: float

    def __post_init__(self) -> None:
        if not (1.0 < self.r < math.inf) or not (1.0 < self.s < math.inf):
            raise ValueError("r and s must lie in (1, inf)")

    @property
    def s_prime(self) -> float:
        return self.s / (self.s - 1.0)

    @property
    def r_prime(self) -> float:
        return self.r / (self.r - 1.0)

    def check_sobolev_path(self, q: float) -> None:
        """The q-sum theorem path needs r' <= s <= q <= r."""
        if not (self.r_prime <= self.s <= q <= self.r):
            raise ValueError(
                f"need r'={self.r_prime:.4g} <= s={self.s:.4g} <= q={q:.4g} <= r={self.r:.4g}"
            )


def clarkson_params(p_prime: float) -> BoasParams:
    """Classical Clarkson ranges for an L^{p'} fiber norm.

    L^t carries the (max(t, t'), min(t, t'))-inequality, t' the conjugate
    exponent; at t = 2 both collapse to the parallelogram pair (2, 2).
    """
    conj = p_prime / (p_prime - 1.0)
    return BoasParams(r=max(p_prime, conj), s=min(p_prime, conj))


@dataclass(frozen=True)
class EnergyReport:
    q: float
    pce_q: float
    lq_norm_q: float
    sobolev_norm: float
    lq_contributions: np.ndarray
    pce_contributions: np.ndarray


def pre_cheeger(
    func: CylinderFunction, m: MetaMeasure, cost: CostSpec, q: float
) -> float:
    """pCE_q(F) = sum over atoms of mass * differential_norm^q."""
    if not (1.0 < q < math.inf):
        raise ValueError("q must lie in (1, inf)")
    return float(
        sum(mass * differential_norm(func, mu, cost) ** q for mass, mu in m.atoms)
    )


def sobolev_functional(
    func: CylinderFunction, m: MetaMeasure, cost: CostSpec, q: float
) -> EnergyReport:
    """(|F|_{L^q(m)}^q + pCE_q(F))^{1/q} with per-atom contributions.

    Uses the pre-Cheeger energy in place of the relaxed one, so the value is
    an upper surrogate for the relaxed Sobolev norm of F.
    """
    if not (1.0 < q < math.inf):
        raise ValueError("q must lie in (1, inf)")
    lq_contrib = np.array(
        [mass * abs(eval_cylinder(func, mu)) ** q for mass, mu in m.atoms]
    )
    pce_contrib = np.array(
        [mass * differential_norm(func, mu, cost) ** q for mass, mu in m.atoms]
    )
    lq = float(lq_contrib.sum())
    pce = float(pce_contrib.sum())
    return EnergyReport(
        q=q,
        pce_q=pce,
        lq_norm_q=lq,
        sobolev_norm=float((lq + pce) ** (1.0 / q)),
        lq_contributions=lq_contrib,
        pce_contributions=pce_contrib,
    )


def boas_residual(
    j: Callable[[Any], float], u: Any, v: Any, params: BoasParams
) -> float:
    """2^{1/s'} (J(u)^s + J(v)^s)^{1/s} - (J(u+v)^r + J(u-v)^r)^{1/r}."""
    ju, jv = j(u), j(v)
    jp, jm = j(u + v), j(u - v)
    if min(ju, jv, jp, jm) < 0:
        raise ValueError("J must be nonnegative on all four evaluation points")
    lhs = (jp**params.r + jm**params.r) ** (1.0 / params.r)
    rhs = 2.0 ** (1.0 / params.s_prime) * (ju**params.s + jv**params.s) ** (1.0 / params.s)
    return rhs - lhs


@dataclass(frozen=True)
class BoasReport:
    params: BoasParams
    q: float
    trials: int
    residuals: np.ndarray
    min_residual: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["trial", "residual", "r", "s", "q"])
        for i, res in enumerate(self.residuals):
            writer.writerow([i, repr(float(res)), self.params.r, self.params.s, self.q])
        return buf.getvalue()

    def to_json_summary(self) -> dict[str, Any]:
        return {
            "min_residual": self.min_residual,
            "violations": self.violations,
            "params": {"r": self.params.r, "s": self.params.s, "q": self.q},
        }


def boas_qsum_preservation(
    j1: Callable[[Any], float],
    j2: Callable[[Any], float],
    q: float,
    params: BoasParams,
    pair_source: Callable[[np.random.Generator], tuple[Any, Any]],
    trials: int,
    seed: int,
    tol: float = 1e-9,
) -> BoasReport:
    """Residuals of the q-sum functional J = (J1^q + J2^q)^{1/q}.

    If J1 and J2 each satisfy the (r, s)-Boas inequality and s <= q <= r, so
    does J; a residual below -tol therefore flags a violated precondition or
    an implementation bug.
    """
    if not (params.s <= q <= params.r):
        raise ValueError(f"need s={params.s:.4g} <= q={q:.4g} <= r={params.r:.4g}")

    def j(u: Any) -> float:
        return (j1(u) ** q + j2(u) ** q) ** (1.0 / q)

    rng = stream(seed, "boas_qsum", trials)
    residuals = np.empty(trials)
    for i in range(trials):
        u, v = pair_source(rng)
        residuals[i] = boas_residual(j, u, v, params)
    return BoasReport(
        params=params,
        q=q,
        trials=trials,
        residuals=residuals,
        min_residual=float(residuals.min()),
        violations=int(np.sum(residuals < -tol)),
    )


@dataclass(frozen=True)
class ModulusTable:
    """Pairwise separations and midpoint gaps, with their lower envelope."""

    t: float
    separations: np.ndarray  # J(u - v) for pairs normalized to J = 1
    gaps: np.ndarray  # (J(u)^t + J(v)^t)/2 - J((u+v)/2)^t

    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        """g_t at the sampled separations: suffix-minimum over delta >= eps."""
        order = np.argsort(self.separations)
        eps = self.separations[order]
        g = np.minimum.accumulate(self.gaps[order][::-1])[::-1]
        return eps, g

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["separation", "midpoint_gap"])
        for d, g in zip(self.separations, self.gaps):
            writer.writerow([repr(float(d)), repr(float(g))])
        return buf.getvalue()


def convexity_modulus_probe(
    j: Callable[[Any], float],
    sampler: Callable[[np.random.Generator], Any],
    t: float,
    trials: int,
    seed: int,
) -> ModulusTable:
    """Empirical convexity modulus of a positively homogeneous functional.

    Samples pairs, scales each element to J = 1 (checking homogeneity on the
    way), and records J(u - v) against the midpoint gap. The suffix-minimum of
    the gaps over separations >= eps is the empirical modulus envelope; a
    uniformly convex J keeps it strictly positive away from eps = 0.
    """
    if not (1.0 < t < math.inf):
        raise ValueError("t must lie in (1, inf)")
    rng = stream(seed, "convexity_modulus", trials)
    seps = []
    gaps = []
    while len(seps) < trials:
        u = sampler(rng)
        v = sampler(rng)
        ju, jv = j(u), j(v)
        if ju < 1e-9 or jv < 1e-9:
            continue
        if abs(j(2.0 * u) - 2.0 * ju) > 1e-6 * (1.0 + ju):
            raise ValueError("J is not positively homogeneous on a sample")
        u = (1.0 / ju) * u
        v = (1.0 / jv) * v
        seps.append(j(u - v))
        gaps.append(0.5 * j(u) ** t + 0.5 * j(v) ** t - j(0.5 * (u + v)) ** t)
    return ModulusTable(t=t, separations=np.array(seps), gaps=np.array(gaps))


# --------------------------------------------------------------------------
# functional-oracle factories
# --------------------------------------------------------------------------


def lq_functional(m: MetaMeasure, q: float) -> Callable[[CylinderFunction], float]:
    """F -> (sum mass |F(mu_atom)|^q)^{1/q}."""

    def j(func: CylinderFunction) -> float:
        return float(
            sum(mass * abs(eval_cylinder(func, mu)) ** q for mass, mu in m.atoms)
            ** (1.0 / q)
        )

    return j


def pce_functional(
    m: MetaMeasure, cost: CostSpec, q: float
) -> Callable[[CylinderFunction], float]:
    """F -> pCE_q(F)^{1/q}."""

    def j(func: CylinderFunction) -> float:
        return pre_cheeger(func, m, cost, q) ** (1.0 / q)

    return j


def sobolev_q_functional(
    m: MetaMeasure, cost: CostSpec, q: float
) -> Callable[[CylinderFunction], float]:
    """F -> (L^q norm^q + pCE_q)^{1/q}, the q-sum of the two base oracles."""

    def j(func: CylinderFunction) -> float:
        return sobolev_functional(func, m, cost, q).sobolev_norm

    return j
