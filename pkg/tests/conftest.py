import numpy as np
import pytest

from wslab._rng import stream
from wslab.measures import DiscreteMeasure
from wslab.norms import CostSpec


def make_rng(*labels):
    return stream(20240001, *labels)


def box_measure(rng, atoms, dim, box=1.5):
    return DiscreteMeasure(
        points=rng.uniform(-box, box, size=(atoms, dim)),
        weights=rng.uniform(0.2, 1.0, size=atoms),
    )


def ball_measure(rng, atoms, cost: CostSpec, radius: float):
    from wslab.norms import eval_norm

    raw = rng.normal(size=(atoms, cost.norm.dim))
    scale = radius * rng.uniform(0.0, 1.0, size=atoms) ** (1.0 / cost.norm.dim)
    pts = raw / eval_norm(cost.norm, raw)[:, None] * scale[:, None]
    return DiscreteMeasure(points=pts, weights=rng.uniform(0.2, 1.0, size=atoms))


def oracle_ot_primal(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec) -> float:
    """Independent interior-point LP value for (1/p) W_p^p."""
    import cvxpy as cp

    c = cost.pairwise(mu.points, nu.points)
    g = cp.Variable(c.shape, nonneg=True)
    prob = cp.Problem(
        cp.Minimize(cp.sum(cp.multiply(c, g))),
        [cp.sum(g, axis=1) == mu.weights, cp.sum(g, axis=0) == nu.weights],
    )
    prob.solve(solver="CLARABEL")
    assert prob.status == "optimal"
    return float(prob.value)


@pytest.fixture
def rng():
    return make_rng("fixture")
