"""HTTP service exposing the library over JSON.

The FastAPI app wraps the core modules behind coarse request/response
endpoints; the CLI drives the same app in-process through an ASGI transport,
so every run goes through one code path whether or not a server is up.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigError, parse_config
from .experiments import run_experiment
from .norms import (
    cost_from_json,
    duality_map,
    eval_dual_norm,
    eval_norm,
    norm_from_json,
)
from .transport import (
    DualityGapError,
    TransportSolverError,
    dual_potentials,
    instance_from_json,
    solve_ot,
)

__all__ = ["create_app"]


class HealthResponse(BaseModel):
    status: str
    version: str


class NormEvalRequest(BaseModel):
    norm: dict[str, Any]
    points: list[list[float]]
    dual: bool = False


class NormEvalResponse(BaseModel):
    values: list[float]


class DualityMapRequest(BaseModel):
    cost: dict[str, Any]
    covectors: list[list[float]]


class DualityMapResponse(BaseModel):
    vectors: list[list[float]]


class TransportRequest(BaseModel):
    instance: dict[str, Any]
    potentials: bool = True


class TransportResponse(BaseModel):
    wp: float
    primal_cost: float
    plan: list[list[float]]
    phi: list[float] | None = None
    psi: list[float] | None = None


class ValidateRequest(BaseModel):
    config_toml: str


class ValidateResponse(BaseModel):
    valid: bool
    kind: str
    seed: int


class RunRequest(BaseModel):
    config_toml: str
    jobs: int = Field(default=1, ge=1)


class RunResponse(BaseModel):
    summary: dict[str, Any]
    files: dict[str, str]
    violations: int


def create_app() -> FastAPI:
    app = FastAPI(title="wslab", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/norms/eval", response_model=NormEvalResponse)
    def norms_eval(req: NormEvalRequest) -> NormEvalResponse:
        try:
            spec = norm_from_json(req.norm)
            pts = np.asarray(req.points, dtype=float)
            vals = eval_dual_norm(spec, pts) if req.dual else eval_norm(spec, pts)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return NormEvalResponse(values=[float(v) for v in np.atleast_1d(vals)])

    @app.post("/norms/duality_map", response_model=DualityMapResponse)
    def norms_duality_map(req: DualityMapRequest) -> DualityMapResponse:
        try:
            cost = cost_from_json(req.cost)
            out = [
                [float(c) for c in duality_map(cost, np.asarray(v, dtype=float))]
                for v in req.covectors
            ]
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return DualityMapResponse(vectors=out)

    @app.post("/transport/solve", response_model=TransportResponse)
    def transport_solve(req: TransportRequest) -> TransportResponse:
        try:
            mu, nu, cost = instance_from_json(req.instance)
            sol = solve_ot(mu, nu, cost)
            phi = psi = None
            if req.potentials:
                pot = dual_potentials(mu, nu, cost, sol)
                phi = [float(x) for x in pot.phi]
                psi = [float(x) for x in pot.psi]
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except (TransportSolverError, DualityGapError) as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return TransportResponse(
            wp=sol.wp,
            primal_cost=sol.primal_cost,
            plan=[[float(v) for v in row] for row in sol.plan],
            phi=phi,
            psi=psi,
        )

    @app.post("/experiments/validate", response_model=ValidateResponse)
    def experiments_validate(req: ValidateRequest) -> ValidateResponse:
        try:
            config = parse_config(req.config_toml)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ValidateResponse(valid=True, kind=config.kind, seed=config.seed)

    @app.post("/experiments/run", response_model=RunResponse)
    def experiments_run(req: RunRequest) -> RunResponse:
        try:
            config = parse_config(req.config_toml)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        result = run_experiment(config, jobs=req.jobs)
        return RunResponse(
            summary=result.summary, files=result.files, violations=result.violations
        )

    return app
