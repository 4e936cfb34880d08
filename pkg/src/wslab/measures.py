"""Discrete measures, moments, and mollification.

A DiscreteMeasure is a finitely supported probability measure on R^d.
Mollification convolves with the canonical bump kernel

    kappa(z) = N_d exp(-1/(1 - |z|_2^2))   on |z|_2 < 1,   0 outside,

scaled to support eps: kappa_eps(z) = eps^{-d} kappa(z/eps). Expectations
against a mollified measure are computed by tensorized Gauss-Legendre
quadrature with adaptive refinement; sampling uses rejection against the
uniform envelope on [-1,1]^d.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np
import scipy.special

from ._rng import stream
from .norms import CostSpec, eval_norm

__all__ = [
    "DiscreteMeasure",
    "MetaMeasure",
    "MollifierSpec",
    "QuadratureError",
    "moment_p",
    "mollified_expectation",
    "kernel_moment",
    "sample_mollified",
    "measure_to_json",
    "measure_from_json",
    "measure_to_csv",
    "measure_from_csv",
    "meta_to_json",
    "meta_from_json",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure: points (n, d), weights (n,).

    Construction merges exact duplicate points (summing their weights) and
    renormalizes the weights to total mass 1. Arrays are marked read-only.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights must have matching length")
        if pts.shape[0] == 0:
            raise ValueError("a measure needs at least one atom")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        uniq, first, inverse = np.unique(
            pts, axis=0, return_index=True, return_inverse=True
        )
        if uniq.shape[0] != pts.shape[0]:
            merged_w = np.bincount(inverse, weights=w)
            order = np.argsort(first, kind="stable")
            pts = uniq[order]
            w = merged_w[order]
        total = w.sum()
        if abs(total - 1.0) > 1e-13:  # idempotent: re-wrapping keeps bits
            w = w / total
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def dirac(cls, x: Sequence[float]) -> "DiscreteMeasure":
        return cls(points=np.atleast_2d(np.asarray(x, dtype=float)), weights=np.ones(1))

    @classmethod
    def uniform(cls, points: np.ndarray) -> "DiscreteMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points=points, weights=np.full(points.shape[0], 1.0 / points.shape[0]))


@dataclass(frozen=True)
class MetaMeasure:
    """Positive finite measure with finitely many DiscreteMeasure atoms."""

    atoms: tuple[tuple[float, DiscreteMeasure], ...]

    def __post_init__(self) -> None:
        atoms = tuple((float(m), mu) for m, mu in self.atoms)
        if len(atoms) == 0:
            raise ValueError("MetaMeasure needs at least one atom")
        if any(m <= 0 or not math.isfinite(m) for m, _ in atoms):
            raise ValueError("masses must be positive and finite")
        object.__setattr__(self, "atoms", atoms)

    @property
    def total_mass(self) -> float:
        return sum(m for m, _ in self.atoms)


@dataclass(frozen=True)
class MollifierSpec:
    """The canonical bump kernel on the Euclidean unit ball, scaled to eps."""

    dim: int
    eps: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.dim < 1 or self.dim > 3:
            raise ValueError("mollification is supported for 1 <= d <= 3")

    def unnormalized(self, z: np.ndarray) -> np.ndarray:
        """exp(-1/(1-|z|^2)) on |z| < 1, extended by 0 (shape (..., dim))."""
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    @property
    def normalization(self) -> float:
        """N_dim with integral of N_dim * exp(-1/(1-|z|^2)) equal to 1."""
        return _bump_normalization(self.dim)

    def kernel(self, x: np.ndarray) -> np.ndarray:
        """kappa_eps(x) = eps^-d N_d exp(-1/(1-|x/eps|^2))."""
        x = np.asarray(x, dtype=float)
        return self.normalization * self.unnormalized(x / self.eps) / self.eps**self.dim


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

_MAX_NODES = {1: 4096, 2: 512, 3: 128}


def _tensor_gl(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensorized Gauss-Legendre nodes/weights on [-1, 1]^dim."""
    x, w = np.polynomial.legendre.leggauss(n)
    if dim == 1:
        return x[:, None], w
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def _adaptive_bump_integral(
    dim: int,
    integrand: Callable[[np.ndarray, np.ndarray], float],
    rel_tol: float,
    max_nodes: int | None = None,
) -> float:
    """Refine tensor-GL until two successive levels agree to rel_tol.

    ``integrand(nodes, bump_values)`` returns the estimate for one node set;
    bump_values are the unnormalized kernel values at the nodes.
    """
    cap = _MAX_NODES[dim] if max_nodes is None else max_nodes
    moll_probe = MollifierSpec(dim=dim, eps=0.5)  # only for unnormalized()
    prev = None
    n = 8
    while n <= cap:
        nodes, weights = _tensor_gl(dim, n)
        bump = moll_probe.unnormalized(nodes) * weights
        val = integrand(nodes, bump)
        if prev is not None:
            scale = max(abs(val), abs(prev), 1e-300)
            if abs(val - prev) <= rel_tol * scale:
                return val
        prev = val
        n *= 2
    raise QuadratureError(
        f"quadrature did not converge to rel_tol={rel_tol} within {cap} nodes/axis"
    )


# Euclidean unit-sphere surface measures for d = 1, 2, 3
_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


@lru_cache(maxsize=8)
def _bump_normalization(dim: int) -> float:
    # radial factorization: int_B exp(-1/(1-|z|^2)) dz = |S^{d-1}| R(d-1)
    raw = _SPHERE_AREA[dim] * _radial_bump_moment(dim - 1.0)
    return 1.0 / raw


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def moment_p(mu: DiscreteMeasure, cost: CostSpec) -> float:
    """p-th moment about the origin in the cost norm: sum_i w_i |x_i|^p."""
    return float(mu.weights @ eval_norm(cost.norm, mu.points) ** cost.p)


def mollified_expectation(
    mu: DiscreteMeasure,
    moll: MollifierSpec,
    f: Callable[[np.ndarray], np.ndarray],
    rel_tol: float = 1e-8,
) -> float:
    """Integral of f against mu * kappa_eps.

    f must accept an (m, d) array of evaluation points and return (m,) values.
    Computed as sum_i w_i (f * kappa_eps)(x_i) with the inner convolution by
    adaptive tensor Gauss-Legendre over the kernel support.
    """
    if mu.dim != moll.dim:
        raise ValueError("measure and mollifier dimension mismatch")
    norm_const = moll.normalization
    pts = mu.points
    w = mu.weights

    def estimate(nodes: np.ndarray, bump: np.ndarray) -> float:
        total = 0.0
        chunk = max(1, int(2_000_000 / max(len(nodes), 1)))
        for start in range(0, len(pts), chunk):
            block = pts[start : start + chunk]
            shifted = block[:, None, :] + moll.eps * nodes[None, :, :]
            vals = f(shifted.reshape(-1, moll.dim)).reshape(len(block), -1)
            total += float(w[start : start + chunk] @ (vals @ bump))
        return norm_const * total

    return _adaptive_bump_integral(moll.dim, estimate, rel_tol)


def _radial_bump_moment(beta: float) -> float:
    """integral_0^1 exp(-1/(1-r^2)) r^beta dr by Gauss-Jacobi.

    The algebraic factor r^beta is the Jacobi weight (exact), leaving only the
    smooth bump profile to the polynomial part, so this converges fast even
    for fractional beta where plain Gauss-Legendre crawls.
    """
    x, w = scipy.special.roots_jacobi(80, 0.0, beta)
    r = 0.5 * (x + 1.0)
    vals = np.exp(-1.0 / (1.0 - r * r))
    return float(0.5 ** (beta + 1.0) * (vals @ w))


def _angular_norm_moment(norm_key: Any, p: float) -> float:
    """integral over the Euclidean unit sphere of |u|_N^p (unnormalized)."""
    dim = norm_key.dim
    if dim == 1:
        pts = np.array([[1.0], [-1.0]])
        return float(np.sum(eval_norm(norm_key, pts) ** p))
    if dim == 2:
        n = 1 << 16
        th = (np.arange(n) + 0.5) * (2.0 * math.pi / n)
        u = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return float(np.mean(eval_norm(norm_key, u) ** p) * 2.0 * math.pi)
    # dim == 3: Gauss-Legendre in cos(theta) x midpoint in phi
    nz, nphi = 512, 1024
    z, wz = np.polynomial.legendre.leggauss(nz)
    phi = (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    u = np.empty((nz, nphi, 3))
    u[..., 0] = rho[:, None] * np.cos(phi)[None, :]
    u[..., 1] = rho[:, None] * np.sin(phi)[None, :]
    u[..., 2] = z[:, None]
    vals = eval_norm(norm_key, u.reshape(-1, 3)).reshape(nz, nphi) ** p
    return float((vals.mean(axis=1) * 2.0 * math.pi) @ wz)


@lru_cache(maxsize=64)
def _unit_kernel_moment(norm_key: Any, p: float) -> float:
    # norm_key is a NormSpec (hashable, frozen); kept generic to avoid an
    # import cycle in the annotation. In polar coordinates the moment
    # factorizes: int kappa(|z|) |z|_N^p dz = R(p+d-1) * A(N, p).
    dim = norm_key.dim
    radial = _radial_bump_moment(p + dim - 1.0)
    return _bump_normalization(dim) * radial * _angular_norm_moment(norm_key, p)


def kernel_moment(moll: MollifierSpec, cost: CostSpec) -> float:
    """C_eps = integral of |x|^p kappa_eps(x) dx = eps^p * C_1."""
    if cost.norm.dim != moll.dim:
        raise ValueError("cost and mollifier dimension mismatch")
    return moll.eps**cost.p * _unit_kernel_moment(cost.norm, cost.p)


def sample_mollified(
    mu: DiscreteMeasure, moll: MollifierSpec, n: int, seed: int
) -> DiscreteMeasure:
    """Empirical measure of n i.i.d. draws X + eps*U with X ~ mu, U ~ kappa.

    U is drawn by rejection: proposals uniform on [-1,1]^d are accepted with
    probability kappa(z)/kappa(0). Deterministic given the seed.
    """
    if mu.dim != moll.dim:
        raise ValueError("measure and mollifier dimension mismatch")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream(seed, "sample_mollified", n)
    idx = rng.choice(len(mu), size=n, p=mu.weights)
    peak = math.exp(-1.0)  # kernel value at the origin, unnormalized
    draws = np.empty((n, moll.dim))
    have = 0
    while have < n:
        m = max(256, 3 * (n - have) * 2**moll.dim)
        z = rng.uniform(-1.0, 1.0, size=(m, moll.dim))
        accept = rng.uniform(0.0, peak, size=m) < moll.unnormalized(z)
        z = z[accept]
        take = min(len(z), n - have)
        draws[have : have + take] = z[:take]
        have += take
    return DiscreteMeasure(
        points=mu.points[idx] + moll.eps * draws,
        weights=np.full(n, 1.0 / n),
    )


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def measure_to_json(mu: DiscreteMeasure) -> dict[str, Any]:
    return {"points": mu.points.tolist(), "weights": mu.weights.tolist()}


def measure_from_json(obj: dict[str, Any]) -> DiscreteMeasure:
    return DiscreteMeasure(
        points=np.asarray(obj["points"], dtype=float),
        weights=np.asarray(obj["weights"], dtype=float),
    )


def measure_to_csv(mu: DiscreteMeasure) -> str:
    """One row per atom: weight, x1, ..., xd (with header)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["weight"] + [f"x{i + 1}" for i in range(mu.dim)])
    for wi, xi in zip(mu.weights, mu.points):
        writer.writerow([repr(float(wi))] + [repr(float(c)) for c in xi])
    return buf.getvalue()


def measure_from_csv(text: str) -> DiscreteMeasure:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "weight":
        raise ValueError("expected a header row starting with 'weight'")
    data = np.array([[float(c) for c in row] for row in rows[1:] if row])
    return DiscreteMeasure(points=data[:, 1:], weights=data[:, 0])


def meta_to_json(m: MetaMeasure) -> list[dict[str, Any]]:
    return [{"mass": mass, "measure": measure_to_json(mu)} for mass, mu in m.atoms]


def meta_from_json(obj: list[dict[str, Any]]) -> MetaMeasure:
    return MetaMeasure(
        atoms=tuple((float(a["mass"]), measure_from_json(a["measure"])) for a in obj)
    )
