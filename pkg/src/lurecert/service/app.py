"""FastAPI service exposing the certification pipelines.

Run it with

    uvicorn lurecert.service.app:app

Every endpoint takes a full system document plus knobs and returns the
pipeline's report, CSV artifacts, summary, and an exit code mirroring the
CLI convention (0 certified/valid, 1 not certified). Malformed documents
map to HTTP 400.
"""

from fastapi import FastAPI, HTTPException

from .. import pipelines
from ..errors import DimensionError, SystemFormatError
from .schemas import (CertifyRequest, CheckRequest, CompareRequest, LyapRequest,
                      RunResponse, SectorRequest, SimulateRequest)

app = FastAPI(title="lurecert", version="0.1.0")


def _run(command, fn, doc, **kwargs):
    try:
        result = fn(doc, **kwargs)
    except (SystemFormatError, DimensionError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    return RunResponse(command=command, exit_code=result.exit_code,
                       summary=result.summary, report=result.report,
                       csvs=result.csvs)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/check", response_model=RunResponse)
def check(req: CheckRequest):
    return _run("check", pipelines.run_check, req.system.to_doc(),
                metzler_tol=req.metzler_tol, hurwitz_margin=req.hurwitz_margin)


@app.post("/sector", response_model=RunResponse)
def sector(req: SectorRequest):
    return _run("sector", pipelines.run_sector, req.system.to_doc(),
                y_values=req.y_values, y_max=req.y_max, count=req.count,
                grid=req.grid)


@app.post("/certify", response_model=RunResponse)
def certify(req: CertifyRequest):
    return _run("certify", pipelines.run_certify, req.system.to_doc(),
                y_probe_max=req.y_probe_max, tol=req.tol,
                hurwitz_margin=req.hurwitz_margin)


@app.post("/lyap", response_model=RunResponse)
def lyap(req: LyapRequest):
    return _run("lyap", pipelines.run_lyap, req.system.to_doc(),
                seed=req.seed, samples_per_level=req.samples_per_level,
                rho_start=req.rho_start, rho_factor=req.rho_factor,
                rho_cap=req.rho_cap, grid=req.grid,
                y_probe_max=req.y_probe_max, tol=req.tol)


@app.post("/simulate", response_model=RunResponse)
def simulate(req: SimulateRequest):
    return _run("simulate", pipelines.run_simulate, req.system.to_doc(),
                region=req.region, region_scale=req.region_scale,
                samples=req.samples, seed=req.seed, horizon=req.horizon,
                step=req.step, y_probe_max=req.y_probe_max, tol=req.tol,
                samples_per_level=req.samples_per_level)


@app.post("/compare", response_model=RunResponse)
def compare(req: CompareRequest):
    return _run("compare", pipelines.run_compare, req.system.to_doc(),
                seed=req.seed, samples_per_level=req.samples_per_level,
                y_probe_max=req.y_probe_max, tol=req.tol)
