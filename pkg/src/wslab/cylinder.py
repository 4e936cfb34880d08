"""Cylinder functions F(mu) = psi(integral of phi_1 dmu, ..., integral of phi_N dmu).

Inner fields are bounded C^1 scalar fields with computable Lipschitz bounds;
polynomials and linear forms are saturated in value through the C^1 squash

    s(t) = t                      for |t| <= C,
    s(t) = sign(t) (C + e/(1+e))  for e = |t| - C > 0,

which has s' = 1 at the joint, slope <= 1 everywhere and range (-C-1, C+1).
With the clamp level chosen above the field's range on the data hull the
saturation is inactive on-data and the field coincides with its smooth core.

The Wasserstein differential of F at mu is the covector field

    DF[mu](x) = sum_n  d_n psi(L(mu)) grad phi_n(x),

and its dual-norm L^{p'} size is the quantity bracketed from below by the
variational slope probe (via approximate duality-map directions) and from
above by exact two-point Lipschitz ratios on sampled Wasserstein balls.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence, Union

import numpy as np

from ._rng import stream
from .measures import DiscreteMeasure
from .norms import (
    CostSpec,
    approx_duality_map,
    direction_dictionary,
    eval_dual_norm,
    eval_norm,
)
from .transport import TransportSolution, solve_ot

__all__ = [
    "ClampedPolynomial",
    "GaussianBump",
    "ClampedLinear",
    "PolynomialOuter",
    "IdentityClampOuter",
    "CombinedOuter",
    "ReindexedOuter",
    "CylinderFunction",
    "SlopeProbeReport",
    "eval_cylinder",
    "differential",
    "differential_norm",
    "geodesic_interpolate",
    "derivative_along_curve",
    "slope_lower_bound",
    "slope_upper_probe",
    "suggested_clamp",
    "field_to_json",
    "field_from_json",
    "cylinder_to_json",
    "cylinder_from_json",
]


def _saturate(t: np.ndarray, clamp: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    e = np.abs(t) - clamp
    over = e > 0
    out = np.array(t, copy=True)
    eo = e[over]
    out[over] = np.sign(t[over]) * (clamp + eo / (1.0 + eo))
    return out


def _saturate_prime(t: np.ndarray, clamp: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    e = np.abs(t) - clamp
    out = np.ones_like(t)
    over = e > 0
    out[over] = 1.0 / (1.0 + e[over]) ** 2
    return out


def _poly_eval(exponents: np.ndarray, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    # x: (m, d); exponents: (K, d); returns (m,)
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2) @ coeffs


def _poly_grad(exponents: np.ndarray, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    m, d = x.shape
    out = np.zeros((m, d))
    for l in range(d):
        e = exponents[:, l]
        active = e > 0
        if not np.any(active):
            continue
        red = exponents[active].copy()
        red[:, l] -= 1
        out[:, l] = np.prod(x[:, None, :] ** red[None, :, :], axis=2) @ (
            coeffs[active] * e[active]
        )
    return out


@dataclass(frozen=True)
class ClampedPolynomial:
    """Value-saturated polynomial: x -> s(P(x)); equals P where |P| <= clamp."""

    exponents: tuple[tuple[int, ...], ...]
    coeffs: tuple[float, ...]
    clamp: float

    def __post_init__(self) -> None:
        if self.clamp <= 0:
            raise ValueError("clamp must be positive")
        if len(self.exponents) != len(self.coeffs):
            raise ValueError("one coefficient per exponent tuple")

    @property
    def dim(self) -> int:
        return len(self.exponents[0])

    def _core(self, x: np.ndarray) -> np.ndarray:
        return _poly_eval(np.asarray(self.exponents), np.asarray(self.coeffs), x)

    def value(self, x: np.ndarray) -> np.ndarray:
        return _saturate(self._core(np.atleast_2d(x)), self.clamp)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        sp = _saturate_prime(self._core(x), self.clamp)
        return sp[:, None] * _poly_grad(np.asarray(self.exponents), np.asarray(self.coeffs), x)

    @property
    def bound(self) -> float:
        return self.clamp + 1.0

    def lipschitz_bound(self, box_radius: float = 10.0) -> float:
        """Dense-sampling estimate of sup |grad|_2 (certified on the box)."""
        grid = np.linspace(-box_radius, box_radius, 101)
        pts = np.stack(np.meshgrid(*([grid] * self.dim), indexing="ij"), axis=-1)
        g = self.gradient(pts.reshape(-1, self.dim))
        return float(np.max(np.sqrt(np.sum(g * g, axis=1))))


@dataclass(frozen=True)
class GaussianBump:
    """x -> amplitude * exp(-|x - center|^2 / (2 width^2)); no clamp needed."""

    center: tuple[float, ...]
    width: float
    amplitude: float

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("width must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        diff = x - np.asarray(self.center)
        return self.amplitude * np.exp(-np.sum(diff * diff, axis=1) / (2.0 * self.width**2))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        diff = x - np.asarray(self.center)
        return self.value(x)[:, None] * (-diff / self.width**2)

    @property
    def bound(self) -> float:
        return abs(self.amplitude)

    def lipschitz_bound(self) -> float:
        # max of |grad| along any ray is at r = width
        return abs(self.amplitude) * math.exp(-0.5) / self.width


@dataclass(frozen=True)
class ClampedLinear:
    """x -> s(<a, x>); equals the linear form where |<a, x>| <= clamp."""

    covector: tuple[float, ...]
    clamp: float

    def __post_init__(self) -> None:
        if self.clamp <= 0:
            raise ValueError("clamp must be positive")

    @property
    def dim(self) -> int:
        return len(self.covector)

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return _saturate(x @ np.asarray(self.covector), self.clamp)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        sp = _saturate_prime(x @ np.asarray(self.covector), self.clamp)
        return sp[:, None] * np.asarray(self.covector)[None, :]

    @property
    def bound(self) -> float:
        return self.clamp + 1.0

    def lipschitz_bound(self) -> float:
        return float(np.sqrt(np.sum(np.asarray(self.covector) ** 2)))


SmoothScalarField = Union[ClampedPolynomial, GaussianBump, ClampedLinear]


def suggested_clamp(core_values: np.ndarray, margin: float = 2.0) -> float:
    """Clamp level strictly above the observed |core| range (margin-padded)."""
    return float(margin * (1.0 + np.max(np.abs(core_values))))


# --------------------------------------------------------------------------
# outer maps psi: R^N -> R
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialOuter:
    """Value-saturated polynomial in N variables."""

    exponents: tuple[tuple[int, ...], ...]
    coeffs: tuple[float, ...]
    clamp: float

    @property
    def arity(self) -> int:
        return len(self.exponents[0])

    def value(self, u: np.ndarray) -> float:
        core = _poly_eval(np.asarray(self.exponents), np.asarray(self.coeffs), u[None, :])
        return float(_saturate(core, self.clamp)[0])

    def gradient(self, u: np.ndarray) -> np.ndarray:
        core = _poly_eval(np.asarray(self.exponents), np.asarray(self.coeffs), u[None, :])
        sp = _saturate_prime(core, self.clamp)[0]
        return sp * _poly_grad(np.asarray(self.exponents), np.asarray(self.coeffs), u[None, :])[0]


@dataclass(frozen=True)
class IdentityClampOuter:
    """u -> s(u) for a single inner field."""

    clamp: float

    @property
    def arity(self) -> int:
        return 1

    def value(self, u: np.ndarray) -> float:
        return float(_saturate(np.asarray(u, dtype=float), self.clamp)[0])

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.atleast_1d(_saturate_prime(np.asarray(u, dtype=float), self.clamp))


@dataclass(frozen=True)
class CombinedOuter:
    """Linear combination sum_k c_k psi_k(u[slice_k]) on concatenated variables."""

    parts: tuple[tuple[float, Any], ...]  # (coefficient, outer)

    @property
    def arity(self) -> int:
        return sum(outer.arity for _, outer in self.parts)

    def value(self, u: np.ndarray) -> float:
        total, pos = 0.0, 0
        for coeff, outer in self.parts:
            total += coeff * outer.value(u[pos : pos + outer.arity])
            pos += outer.arity
        return total

    def gradient(self, u: np.ndarray) -> np.ndarray:
        out, pos = np.zeros(self.arity), 0
        for coeff, outer in self.parts:
            out[pos : pos + outer.arity] = coeff * outer.gradient(u[pos : pos + outer.arity])
            pos += outer.arity
        return out


@dataclass(frozen=True)
class ReindexedOuter:
    """psi'(u) = psi(u[perm]); pairs with a matching reordering of the fields."""

    outer: Any
    perm: tuple[int, ...]

    @property
    def arity(self) -> int:
        return self.outer.arity

    def value(self, u: np.ndarray) -> float:
        return self.outer.value(u[list(self.perm)])

    def gradient(self, u: np.ndarray) -> np.ndarray:
        g = self.outer.gradient(u[list(self.perm)])
        out = np.zeros_like(g)
        out[list(self.perm)] = g
        return out


@dataclass(frozen=True)
class CylinderFunction:
    inner: tuple[SmoothScalarField, ...]
    outer: Any

    def __post_init__(self) -> None:
        if len(self.inner) != self.outer.arity:
            raise ValueError("outer arity must match the number of inner fields")
        dims = {f.dim for f in self.inner}
        if len(dims) != 1:
            raise ValueError("inner fields must share a dimension")

    @property
    def dim(self) -> int:
        return self.inner[0].dim

    def __add__(self, other: "CylinderFunction") -> "CylinderFunction":
        return CylinderFunction(
            inner=self.inner + other.inner,
            outer=CombinedOuter(parts=((1.0, self.outer), (1.0, other.outer))),
        )

    def __sub__(self, other: "CylinderFunction") -> "CylinderFunction":
        return CylinderFunction(
            inner=self.inner + other.inner,
            outer=CombinedOuter(parts=((1.0, self.outer), (-1.0, other.outer))),
        )

    def __neg__(self) -> "CylinderFunction":
        return CylinderFunction(
            inner=self.inner, outer=CombinedOuter(parts=((-1.0, self.outer),))
        )

    def __mul__(self, scalar: float) -> "CylinderFunction":
        return CylinderFunction(
            inner=self.inner, outer=CombinedOuter(parts=((float(scalar), self.outer),))
        )

    __rmul__ = __mul__


def _linear_stats(func: CylinderFunction, mu: DiscreteMeasure) -> np.ndarray:
    """L(mu) = (integral of phi_n dmu)_n."""
    vals = np.stack([f.value(mu.points) for f in func.inner], axis=0)  # (N, n)
    return vals @ mu.weights


def eval_cylinder(func: CylinderFunction, mu: DiscreteMeasure) -> float:
    if func.dim != mu.dim:
        raise ValueError("dimension mismatch")
    return func.outer.value(_linear_stats(func, mu))


def differential(func: CylinderFunction, mu: DiscreteMeasure, x: np.ndarray) -> np.ndarray:
    """DF[mu](x) = sum_n d_n psi(L(mu)) grad phi_n(x); batched over rows of x."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    outer_grad = func.outer.gradient(_linear_stats(func, mu))
    grads = np.stack([f.gradient(pts) for f in func.inner], axis=0)  # (N, m, d)
    out = np.tensordot(outer_grad, grads, axes=(0, 0))  # (m, d)
    return out[0] if single else out


def differential_norm(func: CylinderFunction, mu: DiscreteMeasure, cost: CostSpec) -> float:
    """(sum_i w_i |DF[mu](x_i)|_*^{p'})^{1/p'}."""
    covs = differential(func, mu, mu.points)
    dual = eval_dual_norm(cost.norm, covs)
    pp = cost.p_prime
    return float((mu.weights @ dual**pp) ** (1.0 / pp))


def geodesic_interpolate(sol: TransportSolution, t: float) -> DiscreteMeasure:
    """Pushforward of the plan under (x0, x1) -> (1-t) x0 + t x1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    ii, jj = np.nonzero(sol.plan > 0)
    pts = (1.0 - t) * sol.mu.points[ii] + t * sol.nu.points[jj]
    return DiscreteMeasure(points=pts, weights=sol.plan[ii, jj])


def derivative_along_curve(func: CylinderFunction, sol: TransportSolution, s: float) -> float:
    """d/dt F(mu_t) at t = s along the plan-induced interpolation."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    ii, jj = np.nonzero(sol.plan > 0)
    masses = sol.plan[ii, jj]
    x0 = sol.mu.points[ii]
    x1 = sol.nu.points[jj]
    xs = (1.0 - s) * x0 + s * x1
    mu_s = geodesic_interpolate(sol, s)
    covs = differential(func, mu_s, xs)
    return float(np.sum(masses * np.sum(covs * (x1 - x0), axis=1)))


# --------------------------------------------------------------------------
# slope probes
# --------------------------------------------------------------------------

_DEFAULT_T_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)


def slope_lower_bound(
    func: CylinderFunction,
    mu: DiscreteMeasure,
    cost: CostSpec,
    eps: float = 1e-3,
    t_schedule: Sequence[float] = _DEFAULT_T_SCHEDULE,
    directions: np.ndarray | None = None,
) -> float:
    """Variational lower bound for the metric slope at mu.

    Pushes mu along u_eps = j_{p',eps}(DF) and maximizes the difference
    quotient over the t-schedule, with W_p(mu, nu_t) replaced by its coupling
    upper bound t |u_eps|_{L^p(mu)} (so every quotient is a certified lower
    bound). Converges to differential_norm - O(eps) as t decreases when F is
    concave along the ray.
    """
    if directions is None:
        directions = direction_dictionary(cost.norm)
    covs = differential(func, mu, mu.points)
    u = np.stack([approx_duality_map(cost, c, eps, directions) for c in covs], axis=0)
    norm_u = float((mu.weights @ eval_norm(cost.norm, u) ** cost.p) ** (1.0 / cost.p))
    if norm_u == 0.0:
        return 0.0
    f0 = eval_cylinder(func, mu)
    best = -math.inf
    for t in t_schedule:
        nu_t = DiscreteMeasure(points=mu.points + t * u, weights=mu.weights)
        best = max(best, (eval_cylinder(func, nu_t) - f0) / (t * norm_u))
    return best


@dataclass(frozen=True)
class SlopeProbeReport:
    """Per-radius empirical Lipschitz ratios with their theoretical caps."""

    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    ball_differential_sup: tuple[float, ...]

    def __iter__(self) -> Iterable[float]:
        return iter(self.ratios)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["radius", "max_ratio", "bracket_upper"])
        for r, q, b in zip(self.radii, self.ratios, self.ball_differential_sup):
            writer.writerow([repr(r), repr(q), repr(b)])
        return buf.getvalue()


def slope_upper_probe(
    func: CylinderFunction,
    mu: DiscreteMeasure,
    cost: CostSpec,
    radius_schedule: Sequence[float] = (0.5, 0.25, 0.1),
    pairs_per_radius: int = 20,
    seed: int = 0,
) -> SlopeProbeReport:
    """Empirical Lipschitz ratios of F over shrinking Wasserstein balls.

    Pairs are built from bounded random transport maps id + r v with
    max_i |v(x_i)| <= 1 in the cost norm, which certifies membership in the
    W_p ball of radius r; one designed steep pair per radius follows the
    approximate duality-map direction so the ratios approach the slope from
    above. Each reported entry is capped by the sampled-ball supremum of
    differential_norm (endpoints and nine geodesic interpolants per pair).
    """
    radii = tuple(sorted(radius_schedule, reverse=True))
    rng = stream(seed, "slope_upper_probe")
    dirs = direction_dictionary(cost.norm)
    covs = differential(func, mu, mu.points)
    u = np.stack([approx_duality_map(cost, c, 1e-3, dirs) for c in covs], axis=0)
    u_max = float(np.max(eval_norm(cost.norm, u)))

    def bounded_field() -> np.ndarray:
        raw = rng.standard_normal(mu.points.shape)
        scale = float(np.max(eval_norm(cost.norm, raw)))
        return raw / scale * rng.uniform(0.2, 1.0)

    # (certified radius, measure_a, measure_b) samples; smaller-radius pairs
    # also live in every larger ball, so per-radius maxima nest and the
    # reported sequence is non-increasing by construction
    samples: list[tuple[float, DiscreteMeasure, DiscreteMeasure]] = []
    for r in radii:
        for _ in range(pairs_per_radius):
            va, vb = bounded_field(), bounded_field()
            samples.append(
                (
                    r,
                    DiscreteMeasure(points=mu.points + r * va, weights=mu.weights),
                    DiscreteMeasure(points=mu.points + r * vb, weights=mu.weights),
                )
            )
        if u_max > 0:
            steep = DiscreteMeasure(points=mu.points + (r / u_max) * u, weights=mu.weights)
            samples.append((r, mu, steep))

    ratios_at: dict[float, list[float]] = {r: [] for r in radii}
    sup_at: dict[float, list[float]] = {
        r: [differential_norm(func, mu, cost)] for r in radii
    }
    for r, ma, mb in samples:
        sol = solve_ot(ma, mb, cost)
        if sol.wp < 1e-12:
            continue
        ratio = abs(eval_cylinder(func, ma) - eval_cylinder(func, mb)) / sol.wp
        dn_path = [differential_norm(func, ma, cost), differential_norm(func, mb, cost)]
        for s in np.linspace(0.1, 0.9, 9):
            dn_path.append(differential_norm(func, geodesic_interpolate(sol, s), cost))
        for rr in radii:
            if r <= rr:
                ratios_at[rr].append(ratio)
                sup_at[rr].extend(dn_path)
    return SlopeProbeReport(
        radii=radii,
        ratios=tuple(max(ratios_at[r], default=0.0) for r in radii),
        ball_differential_sup=tuple(max(sup_at[r]) for r in radii),
    )


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

_FIELD_KINDS = {
    "clamped_polynomial": ClampedPolynomial,
    "gaussian_bump": GaussianBump,
    "clamped_linear": ClampedLinear,
}


def field_to_json(field: SmoothScalarField) -> dict[str, Any]:
    if isinstance(field, ClampedPolynomial):
        return {
            "kind": "clamped_polynomial",
            "exponents": [list(e) for e in field.exponents],
            "coeffs": list(field.coeffs),
            "clamp": field.clamp,
        }
    if isinstance(field, GaussianBump):
        return {
            "kind": "gaussian_bump",
            "center": list(field.center),
            "width": field.width,
            "amplitude": field.amplitude,
        }
    if isinstance(field, ClampedLinear):
        return {"kind": "clamped_linear", "covector": list(field.covector), "clamp": field.clamp}
    raise TypeError(f"not a known field: {field!r}")


def field_from_json(obj: dict[str, Any]) -> SmoothScalarField:
    kind = obj["kind"]
    if kind == "clamped_polynomial":
        return ClampedPolynomial(
            exponents=tuple(tuple(int(i) for i in e) for e in obj["exponents"]),
            coeffs=tuple(float(c) for c in obj["coeffs"]),
            clamp=float(obj["clamp"]),
        )
    if kind == "gaussian_bump":
        return GaussianBump(
            center=tuple(float(c) for c in obj["center"]),
            width=float(obj["width"]),
            amplitude=float(obj["amplitude"]),
        )
    if kind == "clamped_linear":
        return ClampedLinear(
            covector=tuple(float(c) for c in obj["covector"]), clamp=float(obj["clamp"])
        )
    raise ValueError(f"unknown field kind {kind!r}")


def _outer_to_json(outer: Any) -> dict[str, Any]:
    if isinstance(outer, PolynomialOuter):
        return {
            "kind": "polynomial",
            "exponents": [list(e) for e in outer.exponents],
            "coeffs": list(outer.coeffs),
            "clamp": outer.clamp,
        }
    if isinstance(outer, IdentityClampOuter):
        return {"kind": "identity_clamp", "clamp": outer.clamp}
    if isinstance(outer, CombinedOuter):
        return {
            "kind": "combined",
            "parts": [[c, _outer_to_json(o)] for c, o in outer.parts],
        }
    if isinstance(outer, ReindexedOuter):
        return {
            "kind": "reindexed",
            "outer": _outer_to_json(outer.outer),
            "perm": list(outer.perm),
        }
    raise TypeError(f"not a known outer map: {outer!r}")


def _outer_from_json(obj: dict[str, Any]) -> Any:
    kind = obj["kind"]
    if kind == "polynomial":
        return PolynomialOuter(
            exponents=tuple(tuple(int(i) for i in e) for e in obj["exponents"]),
            coeffs=tuple(float(c) for c in obj["coeffs"]),
            clamp=float(obj["clamp"]),
        )
    if kind == "identity_clamp":
        return IdentityClampOuter(clamp=float(obj["clamp"]))
    if kind == "combined":
        return CombinedOuter(
            parts=tuple((float(c), _outer_from_json(o)) for c, o in obj["parts"])
        )
    if kind == "reindexed":
        return ReindexedOuter(
            outer=_outer_from_json(obj["outer"]), perm=tuple(int(i) for i in obj["perm"])
        )
    raise ValueError(f"unknown outer kind {kind!r}")


def cylinder_to_json(func: CylinderFunction) -> dict[str, Any]:
    return {
        "inner": [field_to_json(f) for f in func.inner],
        "outer": _outer_to_json(func.outer),
    }


def cylinder_from_json(obj: dict[str, Any]) -> CylinderFunction:
    return CylinderFunction(
        inner=tuple(field_from_json(f) for f in obj["inner"]),
        outer=_outer_from_json(obj["outer"]),
    )
