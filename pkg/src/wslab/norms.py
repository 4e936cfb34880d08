"""Norm algebra on R^d.

Evaluation and dual evaluation for a small family of norms, the Legendre
duality map j_{p'} pairing covectors with vectors, its approximate selection
j_{p',eps} built from a direction dictionary, and a smooth monotone family of
norms obtained by rounding the unit ball of an arbitrary base norm.

The smoothed norm with index k is the gauge (Minkowski functional) of

    C_k = {x : (|x| + |x|_2^2/k) / (1 + eta^2/k) <= 1}  +  B_base(0, 1/k)

where |.| is the base norm, |.|_2 the Euclidean norm and eta the smallest
constant with |x|_2 <= eta |x|. The inner sublevel set A_k has a closed-form
radial parametrisation (a quadratic along every ray), and the support function
of a Minkowski sum is additive, so the implementation evaluates the gauge
through its dual support function on a dense precomputed polar boundary.
Computed values are therefore exactly homogeneous and subadditive (they are the
support function of a fixed finite point set); the distance to the ideal gauge
is ~1e-7 relative at d=2 (table resolution), cross-checked in the test-suite
against an independent bisection/convex-projection oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence

import numpy as np

__all__ = [
    "NormSpec",
    "CostSpec",
    "NonDifferentiableError",
    "NoDirectionError",
    "euclidean",
    "p_norm",
    "one_norm",
    "weighted_p",
    "smoothed",
    "eval_norm",
    "eval_dual_norm",
    "duality_map",
    "approx_duality_map",
    "direction_dictionary",
    "norm_to_json",
    "norm_from_json",
    "cost_to_json",
    "cost_from_json",
]

_KINDS = ("euclidean", "p_norm", "one_norm", "weighted_p", "smoothed")


class NonDifferentiableError(ValueError):
    """Raised when the dual norm has a kink at the requested covector."""


class NoDirectionError(ValueError):
    """Raised when no dictionary direction achieves the eps-near-supremum."""


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^dim.

    kind is one of ``euclidean``, ``p_norm`` (exponent in (1, inf]),
    ``one_norm``, ``weighted_p`` (positive weights, exponent in (1, inf)) or
    ``smoothed`` (base NormSpec + smoothing index k).
    """

    dim: int
    kind: str
    exponent: float | None = None
    weights: tuple[float, ...] | None = None
    base: "NormSpec | None" = None
    k: int | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "p_norm":
            if self.exponent is None or not (self.exponent > 1):
                raise ValueError("p_norm exponent must lie in (1, inf]")
        if self.kind == "weighted_p":
            if self.exponent is None or not (1 < self.exponent < math.inf):
                raise ValueError("weighted_p exponent must lie in (1, inf)")
            if self.weights is None or len(self.weights) != self.dim:
                raise ValueError("weighted_p needs one positive weight per coordinate")
            if any(w <= 0 for w in self.weights):
                raise ValueError("weights must be positive")
        if self.kind == "smoothed":
            if self.base is None or self.k is None or self.k < 1:
                raise ValueError("smoothed norm needs a base NormSpec and k >= 1")
            if self.base.kind == "smoothed":
                raise ValueError("smoothing a smoothed norm is not supported")
            if self.base.dim != self.dim:
                raise ValueError("base norm dimension mismatch")
            if self.dim > 3:
                raise ValueError("smoothed norms are supported for d <= 3")


def euclidean(dim: int) -> NormSpec:
    return NormSpec(dim=dim, kind="euclidean")


def p_norm(dim: int, exponent: float) -> NormSpec:
    return NormSpec(dim=dim, kind="p_norm", exponent=float(exponent))


def one_norm(dim: int) -> NormSpec:
    return NormSpec(dim=dim, kind="one_norm")


def weighted_p(dim: int, weights: Sequence[float], exponent: float) -> NormSpec:
    return NormSpec(
        dim=dim,
        kind="weighted_p",
        exponent=float(exponent),
        weights=tuple(float(w) for w in weights),
    )


def smoothed(base: NormSpec, k: int) -> NormSpec:
    return NormSpec(dim=base.dim, kind="smoothed", base=base, k=int(k))


@dataclass(frozen=True)
class CostSpec:
    """Transport cost c(x, y) = |x - y|^p / p for the attached norm."""

    norm: NormSpec
    p: float

    def __post_init__(self) -> None:
        if not (1 < self.p < math.inf):
            raise ValueError("p must lie in (1, inf)")

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    def pairwise(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Cost matrix c(x_i, y_j) = |x_i - y_j|^p / p."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        diff = x[:, None, :] - y[None, :, :]
        return eval_norm(self.norm, diff) ** self.p / self.p


def _check_dim(spec: NormSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise ValueError(f"expected vectors of length {spec.dim}, got {x.shape[-1]}")
    return x


def _stable_p_sum(a: np.ndarray, p: float) -> np.ndarray:
    # (sum |a|^p)^(1/p) with max-scaling to avoid overflow on skewed inputs
    m = np.max(a, axis=-1)
    safe = np.where(m > 0, m, 1.0)
    out = safe * np.sum((a / safe[..., None]) ** p, axis=-1) ** (1.0 / p)
    return np.where(m > 0, out, 0.0)


def eval_norm(spec: NormSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the norm; accepts stacked inputs of shape (..., dim)."""
    x = _check_dim(spec, x)
    if spec.kind == "euclidean":
        return np.sqrt(np.sum(x * x, axis=-1))
    if spec.kind == "one_norm":
        return np.sum(np.abs(x), axis=-1)
    if spec.kind == "p_norm":
        if spec.exponent == math.inf:
            return np.max(np.abs(x), axis=-1)
        return _stable_p_sum(np.abs(x), spec.exponent)
    if spec.kind == "weighted_p":
        w = np.asarray(spec.weights, dtype=float)
        return _stable_p_sum(w ** (1.0 / spec.exponent) * np.abs(x), spec.exponent)
    return _smoothed_eval(spec, x)


def eval_dual_norm(spec: NormSpec, v: np.ndarray) -> np.ndarray:
    """Dual norm sup{<v, x> : |x| <= 1}; accepts stacked inputs."""
    v = _check_dim(spec, v)
    if spec.kind == "euclidean":
        return np.sqrt(np.sum(v * v, axis=-1))
    if spec.kind == "one_norm":
        return np.max(np.abs(v), axis=-1)
    if spec.kind == "p_norm":
        if spec.exponent == math.inf:
            return np.sum(np.abs(v), axis=-1)
        q = spec.exponent / (spec.exponent - 1.0)
        return _stable_p_sum(np.abs(v), q)
    if spec.kind == "weighted_p":
        q = spec.exponent / (spec.exponent - 1.0)
        w = np.asarray(spec.weights, dtype=float)
        return _stable_p_sum(w ** ((1.0 - q) / q) * np.abs(v), q)
    return _smoothed_dual(spec, v)


# --------------------------------------------------------------------------
# smoothed family: tables for A_k boundary and the polar boundary of C_k
# --------------------------------------------------------------------------

_N_SPHERE = {1: 2, 2: 8192, 3: 32768}
_N_ATABLE = {1: 2, 2: 16384, 3: 32768}
_N_POLAR = {1: 2, 2: 65536, 3: 32768}


def _unit_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic Euclidean-unit directions: angles (d=2) / Fibonacci (d=3)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = np.arange(n) * (2.0 * math.pi / n)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if dim == 3:
        i = np.arange(n) + 0.5
        phi = math.pi * (1.0 + math.sqrt(5.0)) * i
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    raise ValueError("dense unit directions only provided for d <= 3")


@lru_cache(maxsize=32)
def _eta(base: NormSpec) -> float:
    """Smallest eta with |x|_2 <= eta |x|, from a dense sampled unit sphere."""
    u = _unit_directions(base.dim, _N_SPHERE[base.dim])
    return float(np.max(1.0 / eval_norm(base, u)))


def _a_boundary(base: NormSpec, k: int, dirs: np.ndarray) -> np.ndarray:
    """Points of the boundary of A_k = {|y| + |y|_2^2/k <= 1 + eta^2/k}.

    Along a Euclidean-unit ray u the defining equation is the quadratic
    r^2/k + r|u| = c, solved in closed form.
    """
    c = 1.0 + _eta(base) ** 2 / k
    b = eval_norm(base, dirs)
    r = 0.5 * k * (-b + np.sqrt(b * b + 4.0 * c / k))
    return dirs * r[:, None]


def _support_max(flat: np.ndarray, table: np.ndarray) -> np.ndarray:
    """max over table rows t of <flat_i, t>, blocked to bound temp memory."""
    out = np.full(len(flat), -np.inf)
    block = max(1, (1 << 24) // max(1, len(flat)))
    for s in range(0, len(table), block):
        np.maximum(out, np.max(flat @ table[s : s + block].T, axis=1), out=out)
    return out


@lru_cache(maxsize=32)
def _smoothed_tables(spec: NormSpec) -> tuple[np.ndarray, np.ndarray]:
    """(A_k boundary points, polar boundary points of C_k)."""
    base, k, d = spec.base, spec.k, spec.dim
    assert base is not None and k is not None
    ab = _a_boundary(base, k, _unit_directions(d, _N_ATABLE[d]))
    w = _unit_directions(d, _N_POLAR[d])
    # support function of C_k = A_k + (1/k) B_base: additive in the summands
    h = _support_max(w, ab) + eval_dual_norm(base, w) / k
    polar = w / h[:, None]
    return ab, polar


def _smoothed_eval(spec: NormSpec, x: np.ndarray) -> np.ndarray:
    _, polar = _smoothed_tables(spec)
    flat = x.reshape(-1, spec.dim)
    vals = _support_max(flat, polar)
    return vals.reshape(x.shape[:-1])


def _smoothed_dual(spec: NormSpec, v: np.ndarray) -> np.ndarray:
    ab, _ = _smoothed_tables(spec)
    assert spec.base is not None and spec.k is not None
    flat = v.reshape(-1, spec.dim)
    vals = _support_max(flat, ab) + eval_dual_norm(spec.base, flat) / spec.k
    return vals.reshape(v.shape[:-1])


# --------------------------------------------------------------------------
# duality maps
# --------------------------------------------------------------------------


def _grad_dual_norm(spec: NormSpec, v: np.ndarray) -> np.ndarray:
    """Gradient of the dual norm at v != 0 (raises at kinks)."""
    if spec.kind == "euclidean":
        return v / np.sqrt(np.sum(v * v))
    if spec.kind == "one_norm":
        a = np.abs(v)
        top = float(np.max(a))
        ties = np.nonzero(a >= top * (1.0 - 1e-12))[0]
        if len(ties) > 1:
            raise NonDifferentiableError(
                "dual max-norm is not differentiable at a tied covector"
            )
        g = np.zeros_like(v)
        g[ties[0]] = np.sign(v[ties[0]])
        return g
    if spec.kind == "p_norm":
        if spec.exponent == math.inf:
            if np.min(np.abs(v)) <= 1e-12 * np.max(np.abs(v)):
                raise NonDifferentiableError(
                    "dual one-norm is not differentiable where a coordinate vanishes"
                )
            return np.sign(v)
        q = spec.exponent / (spec.exponent - 1.0)
        nv = eval_dual_norm(spec, v)
        return np.sign(v) * (np.abs(v) / nv) ** (q - 1.0)
    if spec.kind == "weighted_p":
        q = spec.exponent / (spec.exponent - 1.0)
        w = np.asarray(spec.weights, dtype=float)
        nv = eval_dual_norm(spec, v)
        return w ** (1.0 - q) * np.sign(v) * np.abs(v) ** (q - 1.0) / nv ** (q - 1.0)
    raise NotImplementedError  # smoothed handled by finite differences


def duality_map(cost: CostSpec, v: np.ndarray) -> np.ndarray:
    """j_{p'}(v) = grad of v -> |v|_*^{p'}/p'.

    Satisfies <j(v), v> = |v|_*^{p'} = |j(v)|^p; j(0) = 0 by continuity.
    For the smoothed kind the gradient is a central finite difference of
    v -> |v|_*^{p'}/p' with step 1e-6 (1 + |v|_*), accuracy O(step^2).
    """
    spec = cost.norm
    v = _check_dim(spec, np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError("duality_map expects a single covector")
    pp = cost.p_prime
    if not np.any(v):
        return np.zeros_like(v)
    if spec.kind == "smoothed":
        nv = float(eval_dual_norm(spec, v))
        h = 1e-6 * (1.0 + nv)
        out = np.empty_like(v)
        for i in range(spec.dim):
            e = np.zeros_like(v)
            e[i] = h
            fp = float(eval_dual_norm(spec, v + e)) ** pp / pp
            fm = float(eval_dual_norm(spec, v - e)) ** pp / pp
            out[i] = (fp - fm) / (2.0 * h)
        return out
    nv = float(eval_dual_norm(spec, v))
    return nv ** (pp - 1.0) * _grad_dual_norm(spec, v)


def approx_duality_map(
    cost: CostSpec,
    v: np.ndarray,
    eps: float,
    directions: np.ndarray | None = None,
) -> np.ndarray:
    """Approximate selection j_{p',eps}(v) = |v|_*^{p'/p} x_N.

    N is the first dictionary index with <v, x_N> >= |v|_* - eps. Directions
    default to the norm's deterministic dictionary and are renormalised to
    the cost norm's unit sphere, which makes |j_{p',eps}(v)|^p = |v|_*^{p'}
    hold by construction and <j_{p',eps}(v), v> >= |v|_*^{p'} - eps |v|_*^{p'/p}.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    spec = cost.norm
    v = _check_dim(spec, np.asarray(v, dtype=float))
    if directions is None:
        directions = direction_dictionary(spec)
    dirs = np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != spec.dim:
        raise ValueError("directions must be an (n, dim) array")
    dirs = dirs / eval_norm(spec, dirs)[:, None]
    nv = float(eval_dual_norm(spec, v))
    hits = np.nonzero(dirs @ v >= nv - eps)[0]
    if len(hits) == 0:
        raise NoDirectionError(
            f"no dictionary direction achieves <v, x> >= {nv} - {eps}"
        )
    return nv ** (cost.p_prime / cost.p) * dirs[hits[0]]


_DICTIONARY_SIZE = {1: 2, 2: 4096, 3: 65536, 4: 262144}


def direction_dictionary(spec: NormSpec, count: int | None = None) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors on the norm's unit sphere.

    Sized so the eps-near-supremum of approx_duality_map is achievable for
    eps >= 1e-3 at d <= 4 for covectors of moderate dual norm.
    """
    d = spec.dim
    if d > 4:
        raise ValueError("direction dictionaries provided for d <= 4")
    n = count if count is not None else _DICTIONARY_SIZE[d]
    if d <= 3:
        u = _unit_directions(d, n)
    else:
        # generalised Fibonacci / Kronecker lattice on [0,1)^4 -> Gaussian map
        from scipy.special import ndtri

        i = np.arange(1, n + 1)
        alphas = np.array([0.8191725133961645, 0.6710436067037893, 0.5497004779019703, 0.4503623627633903])
        frac = (i[:, None] * alphas[None, :]) % 1.0
        g = ndtri(np.clip(frac, 1e-12, 1.0 - 1e-12))
        norms = np.sqrt(np.sum(g * g, axis=1))
        norms[norms == 0] = 1.0
        u = g / norms[:, None]
    return u / eval_norm(spec, u)[:, None]


# --------------------------------------------------------------------------
# JSON round-trip: {dim, kind, params}
# --------------------------------------------------------------------------


def norm_to_json(spec: NormSpec) -> dict[str, Any]:
    params: dict[str, Any] = {}
    if spec.kind == "p_norm":
        params["exponent"] = spec.exponent if spec.exponent != math.inf else "inf"
    elif spec.kind == "weighted_p":
        params["exponent"] = spec.exponent
        params["weights"] = list(spec.weights or ())
    elif spec.kind == "smoothed":
        assert spec.base is not None
        params["k"] = spec.k
        params["base"] = norm_to_json(spec.base)
    return {"dim": spec.dim, "kind": spec.kind, "params": params}


def norm_from_json(obj: dict[str, Any]) -> NormSpec:
    kind = obj["kind"]
    dim = int(obj["dim"])
    params = obj.get("params", {})
    if kind == "euclidean":
        return euclidean(dim)
    if kind == "one_norm":
        return one_norm(dim)
    if kind == "p_norm":
        exp = params["exponent"]
        return p_norm(dim, math.inf if exp == "inf" else float(exp))
    if kind == "weighted_p":
        return weighted_p(dim, params["weights"], params["exponent"])
    if kind == "smoothed":
        return smoothed(norm_from_json(params["base"]), int(params["k"]))
    raise ValueError(f"unknown norm kind {kind!r}")


def cost_to_json(cost: CostSpec) -> dict[str, Any]:
    return {"norm": norm_to_json(cost.norm), "p": cost.p}


def cost_from_json(obj: dict[str, Any]) -> CostSpec:
    return CostSpec(norm=norm_from_json(obj["norm"]), p=float(obj["p"]))
