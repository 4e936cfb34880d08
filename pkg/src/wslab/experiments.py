"""Experiment suites wiring the library modules into reproducible runs.

Each suite consumes a validated ExperimentConfig, derives every random stream
from the config seed, and returns an ExperimentResult holding the canonical
summary dictionary, the report files (details.csv plus plot CSVs), and the
count of invariant violations. Runners never read clocks or ambient state, so
identical configs reproduce identical outputs byte for byte.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ._rng import stream
from .approx import build_dictionary, convergence_report, project_measure
from .config import ExperimentConfig
from .cylinder import (
    ClampedLinear,
    ClampedPolynomial,
    CombinedOuter,
    CylinderFunction,
    GaussianBump,
    IdentityClampOuter,
    PolynomialOuter,
    differential_norm,
    slope_lower_bound,
    slope_upper_probe,
    suggested_clamp,
)
from .energy import (
    BoasParams,
    boas_qsum_preservation,
    boas_residual,
    convexity_modulus_probe,
    lq_functional,
    pce_functional,
)
from .measures import DiscreteMeasure, MetaMeasure, MollifierSpec
from .norms import CostSpec, NormSpec, eval_norm
from .transport import check_potential_estimates, dual_potentials, solve_ot

__all__ = [
    "ExperimentResult",
    "run_experiment",
    "emit_plot_data",
    "summary_to_canonical_json",
    "random_measure",
    "random_meta_measure",
    "concave_cylinder_function",
    "generic_cylinder_function",
]


@dataclass(frozen=True)
class ExperimentResult:
    summary: dict[str, Any]
    files: dict[str, str]
    violations: int


def summary_to_canonical_json(summary: dict[str, Any]) -> str:
    """Canonical byte representation: sorted keys, no whitespace drift."""
    return json.dumps(summary, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def emit_plot_data(result: ExperimentResult) -> dict[str, str]:
    """The columnar plot files of a run (always at least a header row)."""
    return {name: body for name, body in result.files.items() if name.startswith("plot_")}


def _csv(rows: Iterable[Sequence[Any]], header: Sequence[str]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(c) if isinstance(c, float) else str(c) for c in row))
    return "\n".join(lines) + "\n"


def _parallel_map(fn: Callable[[int], Any], count: int, jobs: int) -> list[Any]:
    if jobs <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(count)))


# --------------------------------------------------------------------------
# batteries
# --------------------------------------------------------------------------


def random_measure(
    rng: np.random.Generator, atoms: int, dim: int, box: float
) -> DiscreteMeasure:
    points = rng.uniform(-box, box, size=(atoms, dim))
    weights = rng.uniform(0.2, 1.0, size=atoms)
    return DiscreteMeasure(points=points, weights=weights)


def random_meta_measure(
    rng: np.random.Generator, meta_atoms: int, atoms_per: int, dim: int, box: float
) -> MetaMeasure:
    return MetaMeasure(
        atoms=tuple(
            (float(rng.uniform(0.1, 1.0)), random_measure(rng, atoms_per, dim, box))
            for _ in range(meta_atoms)
        )
    )


def _quadratic_exponents(dim: int) -> list[tuple[int, ...]]:
    exps: list[tuple[int, ...]] = [tuple([0] * dim)]
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        exps.append(tuple(e))
    for i in range(dim):
        e = [0] * dim
        e[i] = 2
        exps.append(tuple(e))
    return exps


def _concave_quadratic(
    rng: np.random.Generator, dim: int, data: np.ndarray
) -> ClampedPolynomial:
    """Field with everywhere nonpositive Hessian (clamp inactive near data)."""
    lam = rng.uniform(0.05, 0.15)
    center = rng.uniform(-1.0, 1.0, size=dim)
    a = rng.normal(0.0, 1.0, size=dim)
    # core: <a, x> - lam |x - center|^2, written in monomials
    exps = _quadratic_exponents(dim)
    coeffs = [float(-lam * center @ center)]
    for i in range(dim):
        coeffs.append(float(a[i] + 2.0 * lam * center[i]))
    for _ in range(dim):
        coeffs.append(float(-lam))
    probe = np.vstack([data, data + 2.5, data - 2.5])
    core = _poly_core_values(exps, coeffs, probe)
    return ClampedPolynomial(
        exponents=tuple(exps), coeffs=tuple(coeffs), clamp=suggested_clamp(core)
    )


def _poly_core_values(
    exps: Sequence[tuple[int, ...]], coeffs: Sequence[float], pts: np.ndarray
) -> np.ndarray:
    return np.prod(pts[:, None, :] ** np.asarray(exps)[None, :, :], axis=2) @ np.asarray(
        coeffs
    )


def concave_cylinder_function(
    rng: np.random.Generator, dim: int, data: np.ndarray
) -> CylinderFunction:
    """Battery member for slope probes: concave along constructed rays.

    Positive combinations of value-clamped concave quadratics under an
    identity clamp keep the push-forward map t -> F(nu_t) concave while the
    clamps stay inactive, so small-t difference quotients approach the slope
    from below.
    """
    n_fields = int(rng.integers(1, 3))
    fields = tuple(_concave_quadratic(rng, dim, data) for _ in range(n_fields))
    level = 5.0 * (1.0 + max(f.clamp for f in fields))
    if n_fields == 1:
        return CylinderFunction(inner=fields, outer=IdentityClampOuter(clamp=level))
    parts = tuple(
        (float(rng.uniform(0.5, 1.5)), IdentityClampOuter(clamp=level)) for _ in fields
    )
    return CylinderFunction(inner=fields, outer=CombinedOuter(parts=parts))


def generic_cylinder_function(
    rng: np.random.Generator, dim: int, data: np.ndarray
) -> CylinderFunction:
    """Catalog sampler mixing field kinds and outer maps (no concavity aim)."""
    n_fields = int(rng.integers(1, 3))
    fields: list[Any] = []
    for _ in range(n_fields):
        pick = rng.integers(0, 3)
        if pick == 0:
            exps = _quadratic_exponents(dim)
            coeffs = rng.normal(0.0, 0.5, size=len(exps))
            probe = np.vstack([data, data + 2.5, data - 2.5])
            core = _poly_core_values(exps, coeffs, probe)
            fields.append(
                ClampedPolynomial(
                    exponents=tuple(exps),
                    coeffs=tuple(float(c) for c in coeffs),
                    clamp=suggested_clamp(core),
                )
            )
        elif pick == 1:
            fields.append(
                GaussianBump(
                    center=tuple(rng.uniform(-1.5, 1.5, size=dim)),
                    width=float(rng.uniform(0.8, 2.0)),
                    amplitude=float(rng.uniform(-1.5, 1.5)),
                )
            )
        else:
            cov = rng.normal(0.0, 1.0, size=dim)
            level = suggested_clamp(
                np.vstack([data, data + 2.5, data - 2.5]) @ cov
            )
            fields.append(ClampedLinear(covector=tuple(float(c) for c in cov), clamp=level))
    if n_fields == 1:
        bound = fields[0].bound
        if rng.uniform() < 0.5:
            return CylinderFunction(
                inner=tuple(fields), outer=IdentityClampOuter(clamp=4.0 * (1.0 + bound))
            )
        # scalar polynomial outer: alpha u + beta u^2
        outer = PolynomialOuter(
            exponents=((1,), (2,)),
            coeffs=(float(rng.uniform(0.5, 1.5)), float(rng.uniform(-0.3, 0.3))),
            clamp=8.0 * (1.0 + bound + bound**2),
        )
        return CylinderFunction(inner=tuple(fields), outer=outer)
    bound = max(f.bound for f in fields)
    # two-variable outer: u + beta v + gamma u v
    outer2 = PolynomialOuter(
        exponents=((1, 0), (0, 1), (1, 1)),
        coeffs=(
            1.0,
            float(rng.uniform(-1.0, 1.0)),
            float(rng.uniform(-0.2, 0.2)),
        ),
        clamp=10.0 * (1.0 + bound) ** 2,
    )
    return CylinderFunction(inner=tuple(fields), outer=outer2)


# --------------------------------------------------------------------------
# suite runners
# --------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    runner = {
        "duality_gap": _run_duality_gap,
        "slope_check": _run_slope_check,
        "potential_estimates": _run_potential_estimates,
        "maxpot_convergence": _run_maxpot_convergence,
        "boas_suite": _run_boas_suite,
        "projection_convergence": _run_projection_convergence,
        "modulus_probe": _run_modulus_probe,
    }[config.kind]
    return runner(config, jobs)


def _base_summary(config: ExperimentConfig, violations: int) -> dict[str, Any]:
    return {
        "kind": config.kind,
        "seed": config.seed,
        "schema_version": config.schema_version,
        "cost": {"p": config.cost.p, "norm_kind": config.cost.norm.kind, "dim": config.cost.norm.dim},
        "violations": violations,
    }


def _run_duality_gap(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    pr = config.params
    p_values = [float(p) for p in pr["p_values"]]

    def one(i: int) -> dict[str, Any]:
        rng = stream(config.seed, "duality_gap", i)
        p = p_values[i % len(p_values)]
        cost = CostSpec(norm=config.cost.norm, p=p)
        n = int(rng.integers(2, pr["max_atoms"] + 1))
        m = int(rng.integers(2, pr["max_atoms"] + 1))
        mu = random_measure(rng, n, cost.norm.dim, pr["box"])
        nu = random_measure(rng, m, cost.norm.dim, pr["box"])
        sol = solve_ot(mu, nu, cost)
        pot = dual_potentials(mu, nu, cost, sol)
        c = cost.pairwise(mu.points, nu.points)
        slack = c - pot.phi[:, None] - pot.psi[None, :]
        feas = float(-min(np.min(slack), 0.0))
        on_support = sol.plan > 1e-12
        cs = float(np.max(np.abs(slack[on_support]))) if np.any(on_support) else 0.0
        fix = max(
            float(np.max(np.abs(pot.phi - np.min(c - pot.psi[None, :], axis=1)))),
            float(np.max(np.abs(pot.psi - np.min(c - pot.phi[:, None], axis=0)))),
        )
        dual_value = float(mu.weights @ pot.phi + nu.weights @ pot.psi)
        gap = abs(dual_value - sol.primal_cost) / max(1.0, abs(sol.primal_cost))
        marg = max(
            float(np.max(np.abs(sol.plan.sum(axis=1) - mu.weights))),
            float(np.max(np.abs(sol.plan.sum(axis=0) - nu.weights))),
        )
        bad = (
            gap > pr["gap_tol"]
            or feas > pr["feasibility_tol"]
            or cs > pr["slackness_tol"]
            or fix > pr["fixpoint_tol"]
            or marg > 1e-10
        )
        return {
            "instance": i,
            "p": p,
            "n": n,
            "m": m,
            "gap": gap,
            "feasibility": feas,
            "slackness": cs,
            "fixpoint": fix,
            "marginal": marg,
            "bad": bad,
        }

    rows = _parallel_map(one, int(pr["instances"]), jobs)
    violations = sum(1 for r in rows if r["bad"])
    details = _csv(
        (
            [r["instance"], r["p"], r["n"], r["m"], r["gap"], r["feasibility"], r["slackness"], r["fixpoint"], r["marginal"]]
            for r in rows
        ),
        ["instance", "p", "n_mu", "n_nu", "gap_rel", "feasibility_max", "slackness_max", "fixpoint_max", "marginal_err"],
    )
    plot = _csv(
        ([r["instance"], r["gap"]] for r in rows), ["instance", "gap_rel"]
    )
    summary = _base_summary(config, violations)
    summary.update(
        {
            "instances": len(rows),
            "max_gap": max(r["gap"] for r in rows),
            "max_feasibility": max(r["feasibility"] for r in rows),
            "max_slackness": max(r["slackness"] for r in rows),
            "max_fixpoint": max(r["fixpoint"] for r in rows),
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_duality_gap.csv": plot},
        violations=violations,
    )


def _run_slope_check(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    pr = config.params
    p_values = [float(p) for p in pr["p_values"]]
    dim = config.cost.norm.dim

    def one(i: int) -> dict[str, Any]:
        rng = stream(config.seed, "slope_check", i)
        p = p_values[i % len(p_values)]
        cost = CostSpec(norm=config.cost.norm, p=p)
        mu = random_measure(rng, int(pr["atoms"]), dim, 1.5)
        func = concave_cylinder_function(rng, dim, mu.points)
        dn = differential_norm(func, mu, cost)
        lower = slope_lower_bound(
            func, mu, cost, eps=float(pr["eps"]), t_schedule=[float(t) for t in pr["t_schedule"]]
        )
        probe = slope_upper_probe(
            func,
            mu,
            cost,
            radius_schedule=[float(r) for r in pr["radius_schedule"]],
            pairs_per_radius=int(pr["pairs_per_radius"]),
            seed=config.seed * 7919 + i,
        )
        upper = probe.ratios[-1]
        width = (upper - lower) / dn if dn > 0 else 0.0
        cap_ok = all(
            q <= b + 1e-6 for q, b in zip(probe.ratios, probe.ball_differential_sup)
        )
        bad = (
            lower > dn + 1e-9
            or (dn > 0 and abs(width) > float(pr["bracket_width"]))
            or (dn > 0 and (dn - lower) / dn > float(pr["bracket_width"]))
            or not cap_ok
        )
        return {
            "function": i,
            "p": p,
            "dn": dn,
            "lower": lower,
            "upper": upper,
            "width": width,
            "probe": probe,
            "bad": bad,
        }

    rows = _parallel_map(one, int(pr["functions"]), jobs)
    violations = sum(1 for r in rows if r["bad"])
    details = _csv(
        (
            [r["function"], r["p"], r["dn"], r["lower"], r["upper"], r["width"]]
            for r in rows
        ),
        ["function", "p", "differential_norm", "slope_lower", "slope_upper_final", "bracket_width"],
    )
    plot_rows = []
    for r in rows:
        for radius, ratio, cap in zip(
            r["probe"].radii, r["probe"].ratios, r["probe"].ball_differential_sup
        ):
            plot_rows.append([r["function"], radius, ratio, cap])
    plot = _csv(plot_rows, ["function", "radius", "max_ratio", "bracket_upper"])
    summary = _base_summary(config, violations)
    summary.update(
        {
            "functions": len(rows),
            "max_bracket_width": max(abs(r["width"]) for r in rows),
            "min_lower_over_dn": min(
                (r["lower"] / r["dn"] for r in rows if r["dn"] > 0), default=1.0
            ),
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_slope.csv": plot},
        violations=violations,
    )


def _run_potential_estimates(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    pr = config.params
    combos = [(float(r), float(p)) for r in pr["radii"] for p in pr["p_values"]]

    def one(i: int) -> dict[str, Any]:
        rng = stream(config.seed, "potential_estimates", i)
        radius, p = combos[i % len(combos)]
        cost = CostSpec(norm=config.cost.norm, p=p)
        dim = cost.norm.dim
        raw = rng.normal(size=(int(pr["nu_atoms"]), dim))
        scale = radius * rng.uniform(0.0, 1.0, size=len(raw)) ** (1.0 / dim)
        nu_pts = raw / eval_norm(cost.norm, raw)[:, None] * scale[:, None]
        nu = DiscreteMeasure(points=nu_pts, weights=rng.uniform(0.2, 1.0, size=len(raw)))
        mu = random_measure(rng, int(pr["mu_atoms"]), dim, float(pr["mu_box"]))
        sol = solve_ot(mu, nu, cost)
        pot = dual_potentials(mu, nu, cost, sol)
        report = check_potential_estimates(
            pot,
            radius,
            cost,
            sample_pairs=int(pr["sample_pairs"]),
            seed=config.seed * 104729 + i,
            tol=float(pr["tol"]),
        )
        return {
            "instance": i,
            "p": p,
            "radius": radius,
            "lip": report.min_lipschitz_residual,
            "growth": report.min_growth_residual,
            "lower": report.min_lower_residual,
            "violations": report.violations,
        }

    rows = _parallel_map(one, int(pr["instances"]), jobs)
    violations = sum(r["violations"] for r in rows)
    details = _csv(
        (
            [r["instance"], r["p"], r["radius"], r["lip"], r["growth"], r["lower"], r["violations"]]
            for r in rows
        ),
        ["instance", "p", "radius", "min_lipschitz_residual", "min_growth_residual", "min_lower_residual", "violations"],
    )
    plot = _csv(
        ([r["instance"], min(r["lip"], r["growth"], r["lower"])] for r in rows),
        ["instance", "min_residual"],
    )
    summary = _base_summary(config, violations)
    summary.update(
        {
            "instances": len(rows),
            "min_lipschitz_residual": min(r["lip"] for r in rows),
            "min_growth_residual": min(r["growth"] for r in rows),
            "min_lower_residual": min(r["lower"] for r in rows),
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_potential_estimates.csv": plot},
        violations=violations,
    )


def _run_maxpot_convergence(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    del jobs  # dictionary construction is sequential; solves dominate anyway
    pr = config.params
    rng = stream(config.seed, "maxpot")
    dim = config.cost.norm.dim
    moll = MollifierSpec(dim=dim, eps=float(pr["eps"]))
    nu = random_measure(rng, int(pr["nu_atoms"]), dim, float(pr["box"]))
    battery = [
        random_measure(rng, int(pr["atoms"]), dim, float(pr["box"]))
        for _ in range(int(pr["battery_size"]))
    ]
    grid = battery + [
        random_measure(rng, int(pr["atoms"]), dim, float(pr["box"]))
        for _ in range(int(pr["grid_size"]) - int(pr["battery_size"]))
    ]
    dictionary = build_dictionary(
        nu, grid, config.cost, moll, sample_n=int(pr["sample_n"]), seed=config.seed
    )
    report = convergence_report(
        dictionary, battery, moll, config.cost, f_seed=config.seed * 31 + 7
    )
    k = len(dictionary)
    exact_bad = 0
    rows = []
    for i, gv in enumerate(report.g_values):
        combined = math.hypot(report.f_stderrs[i], dictionary.entries[i].stderr)
        final_gap = report.f_values[i] - gv[-1]
        ok = final_gap <= 3.0 * combined + 1e-5 * (1.0 + abs(report.f_values[i]))
        exact_bad += 0 if ok else 1
        rows.append(
            [i, report.f_values[i], report.f_stderrs[i], float(gv[-1]), final_gap, int(ok)]
        )
    violations = (
        (0 if report.monotone_ok else 1)
        + (0 if report.gap_ok else 1)
        + (0 if report.lipschitz_ok else 1)
        + exact_bad
    )
    details = _csv(
        rows, ["member", "f_nu_eps", "f_stderr", "g_final", "final_gap", "exactness_ok"]
    )
    plot_rows = []
    for i, gv in enumerate(report.g_values):
        for kk in range(k):
            plot_rows.append(
                [i, kk + 1, float(gv[kk]), report.f_values[i], report.f_stderrs[i]]
            )
    plot = _csv(plot_rows, ["member", "k", "g_k", "f_nu_eps", "stderr"])
    summary = _base_summary(config, violations)
    summary.update(
        {
            "grid_size": k,
            "battery_size": len(battery),
            "monotone_ok": report.monotone_ok,
            "gap_ok": report.gap_ok,
            "lipschitz_ok": report.lipschitz_ok,
            "d_empirical": report.d_empirical,
            "max_final_gap": max(float(r[4]) for r in rows),
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_maxpot.csv": plot},
        violations=violations,
    )


def _run_boas_suite(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    del jobs
    pr = config.params
    dim = config.cost.norm.dim
    rng = stream(config.seed, "boas_meta")
    meta = random_meta_measure(
        rng, int(pr["meta_atoms"]), int(pr["atoms_per_measure"]), dim, 1.5
    )
    cloud = np.vstack([mu.points for _, mu in meta.atoms])
    tol = float(pr["tol"])
    preset_summaries = []
    detail_rows = []
    violations = 0
    for pi, preset in enumerate(pr["presets"]):
        p_prime, r, s, q = (float(x) for x in preset)
        cost = CostSpec(norm=config.cost.norm, p=p_prime / (p_prime - 1.0))
        params = BoasParams(r=r, s=s)
        j = pce_functional(meta, cost, q)
        prng = stream(config.seed, "boas_pairs", pi)
        residuals = []
        for tr in range(int(pr["trials"])):
            u = generic_cylinder_function(prng, dim, cloud)
            v = generic_cylinder_function(prng, dim, cloud)
            res = boas_residual(j, u, v, params)
            residuals.append(res)
            detail_rows.append([pi, p_prime, r, s, q, tr, res])
        min_res = min(residuals)
        bad = sum(1 for x in residuals if x < -tol)
        violations += bad
        entry: dict[str, Any] = {
            "p_prime": p_prime,
            "r": r,
            "s": s,
            "q": q,
            "min_residual": min_res,
            "violations": bad,
        }
        if bool(pr["check_qsum"]) and params.r_prime <= s:
            qs = boas_qsum_preservation(
                lq_functional(meta, q),
                pce_functional(meta, cost, q),
                q,
                params,
                lambda g: (
                    generic_cylinder_function(g, dim, cloud),
                    generic_cylinder_function(g, dim, cloud),
                ),
                trials=int(pr["trials"]) // 2,
                seed=config.seed * 13 + pi,
                tol=tol,
            )
            entry["qsum_min_residual"] = qs.min_residual
            entry["qsum_violations"] = qs.violations
            violations += qs.violations
        preset_summaries.append(entry)
    details = _csv(detail_rows, ["preset", "p_prime", "r", "s", "q", "trial", "residual"])
    plot = _csv(
        ([e["p_prime"], e["r"], e["s"], e["q"], e["min_residual"]] for e in preset_summaries),
        ["p_prime", "r", "s", "q", "min_residual"],
    )
    summary = _base_summary(config, violations)
    summary.update({"presets": preset_summaries, "trials": int(pr["trials"])})
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_boas.csv": plot},
        violations=violations,
    )


def _run_projection_convergence(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    pr = config.params
    dim = config.cost.norm.dim
    if config.cost.norm.kind != "p_norm" or config.cost.norm.exponent != math.inf:
        raise ValueError("projection_convergence needs a sup-norm cost")
    tol = float(pr["tol"])

    def one(i: int) -> dict[str, Any]:
        rng = stream(config.seed, "projection", i)
        mu = random_measure(rng, int(pr["atoms"]), dim, float(pr["box"]))
        nu = random_measure(rng, int(pr["atoms"]), dim, float(pr["box"]))
        w_full = solve_ot(mu, nu, config.cost).wp
        ws = []
        for h in range(1, dim + 1):
            cost_h = CostSpec(
                norm=NormSpec(dim=h, kind="p_norm", exponent=math.inf), p=config.cost.p
            )
            ws.append(solve_ot(project_measure(mu, h), project_measure(nu, h), cost_h).wp)
        mono_bad = any(ws[h] > ws[h + 1] + tol for h in range(dim - 1))
        full_bad = abs(ws[-1] - w_full) > tol
        return {"instance": i, "w_full": w_full, "ws": ws, "bad": mono_bad or full_bad}

    rows = _parallel_map(one, int(pr["instances"]), jobs)
    violations = sum(1 for r in rows if r["bad"])
    detail_rows = []
    for r in rows:
        for h, w in enumerate(r["ws"], start=1):
            detail_rows.append([r["instance"], h, w, r["w_full"]])
    details = _csv(detail_rows, ["instance", "h", "w_projected", "w_full"])
    summary = _base_summary(config, violations)
    summary.update(
        {
            "instances": len(rows),
            "max_final_mismatch": max(abs(r["ws"][-1] - r["w_full"]) for r in rows),
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_projection.csv": details},
        violations=violations,
    )


def _run_modulus_probe(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    del jobs
    pr = config.params
    dim = config.cost.norm.dim
    t = float(pr["t"])
    if pr["preset"] == "pce_euclid":
        rng = stream(config.seed, "modulus_meta")
        meta = random_meta_measure(
            rng, int(pr["meta_atoms"]), int(pr["atoms_per_measure"]), dim, 1.5
        )
        cloud = np.vstack([mu.points for _, mu in meta.atoms])
        j: Callable[[Any], float] = pce_functional(meta, config.cost, t)
        sampler: Callable[[np.random.Generator], Any] = (
            lambda g: generic_cylinder_function(g, dim, cloud)
        )
        uniformly_convex = True
    else:  # vector_p: the cost norm acting on plain vectors
        j = lambda v: float(eval_norm(config.cost.norm, v))
        sampler = lambda g: g.normal(size=dim)
        uniformly_convex = config.cost.norm.kind == "euclidean"
    table = convexity_modulus_probe(j, sampler, t, int(pr["trials"]), config.seed)
    eps_grid, envelope = table.envelope()
    pos_eps = float(pr["positivity_eps"])
    mask = eps_grid >= pos_eps
    min_env = float(np.min(envelope[mask])) if np.any(mask) else math.inf
    violations = 1 if (uniformly_convex and np.any(mask) and min_env <= 0.0) else 0
    details = table.to_csv()
    plot = _csv(
        ([float(e), float(g)] for e, g in zip(eps_grid, envelope)),
        ["eps", "envelope"],
    )
    summary = _base_summary(config, violations)
    summary.update(
        {
            "preset": pr["preset"],
            "t": t,
            "trials": int(pr["trials"]),
            "min_envelope_beyond_eps": None if math.isinf(min_env) else min_env,
            "max_separation": float(np.max(eps_grid)) if len(eps_grid) else 0.0,
        }
    )
    return ExperimentResult(
        summary=summary,
        files={"details.csv": details, "plot_modulus.csv": plot},
        violations=violations,
    )
