"""FastAPI service exposing the design calculators and stored simulation runs."""

from __future__ import annotations

import logging
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from mimo_ura._capacity import DesignPoint, design_report
from mimo_ura._config import (
    ConfigError,
    SystemConfig,
    Violation,
    config_from_dict,
    config_to_dict,
    load_config,
)
from mimo_ura._results import new_run, sweep_csv_text
from mimo_ura._results_factory import create_result_store
from mimo_ura._settings import get_config_path
from mimo_ura._simulation import SweepAxis, SweepResult, monte_carlo_sweep, run_point

logger = logging.getLogger(__name__)

app = FastAPI()
store = create_result_store()

_MAX_TRIALS = 10_000


@app.get("/health")
async def health() -> JSONResponse:
    """Health check endpoint for container orchestrators."""
    return JSONResponse(content={"status": "ok"})


def _problem_response(status: int, title: str, detail: str, pointer: str = "/body") -> JSONResponse:
    """Return an ``application/problem+json`` error response."""
    return JSONResponse(
        status_code=status,
        content={
            "type": f"urn:mimo-ura:problem:{title.lower().replace(' ', '-')}",
            "title": title,
            "errors": [{"detail": detail, "pointer": pointer}],
        },
        media_type="application/problem+json",
    )


def _config_problem(exc: ConfigError) -> JSONResponse:
    pointer = f"/config/{exc.field_name}" if exc.field_name else "/config"
    return _problem_response(400, "Bad Request", f"{exc.violation.value}: {exc.detail}", pointer=pointer)


async def _json_body(request: Request) -> dict[str, Any] | JSONResponse:
    try:
        body = await request.json()
    except ValueError:
        return _problem_response(400, "Bad Request", "Body must be a JSON object")
    if not isinstance(body, dict):
        return _problem_response(400, "Bad Request", "Body must be a JSON object")
    return body


def _base_config(body: dict[str, Any]) -> SystemConfig:
    raw = body.get("config")
    if raw is not None:
        return config_from_dict(raw)
    path = get_config_path()
    if path is None:
        raise ConfigError(Violation.INVALID_FIELD, "no config given and MIMO_URA_CONFIG is unset")
    return load_config(path)


# ---------------------------------------------------------------------------
# Design route
# ---------------------------------------------------------------------------


@app.post("/design")
async def design(request: Request) -> Response:
    """Evaluate every capacity calculator at a design point."""
    body = await _json_body(request)
    if isinstance(body, JSONResponse):
        return body
    try:
        point = DesignPoint(**body)
        report = design_report(point)
    except TypeError as exc:
        return _problem_response(400, "Bad Request", str(exc))
    except ValueError as exc:
        return _problem_response(400, "Bad Request", str(exc))
    return JSONResponse(content=report)


# ---------------------------------------------------------------------------
# Run routes
# ---------------------------------------------------------------------------


@app.post("/runs")
async def create_run(request: Request) -> Response:
    """Run a trial batch or a sweep synchronously and store it."""
    body = await _json_body(request)
    if isinstance(body, JSONResponse):
        return body
    trials = body.get("trials", 20)
    if not isinstance(trials, int) or not 1 <= trials <= _MAX_TRIALS:
        return _problem_response(400, "Bad Request", f"trials must be an integer in [1, {_MAX_TRIALS}]", "/trials")
    seed = body.get("seed")
    if seed is not None and (not isinstance(seed, int) or not 0 <= seed < 1 << 64):
        return _problem_response(400, "Bad Request", "seed must be an unsigned 64-bit integer", "/seed")
    axis = body.get("axis")
    values = body.get("values")
    if (axis is None) != (values is None):
        return _problem_response(400, "Bad Request", "axis and values go together", "/axis")

    try:
        cfg = _base_config(body)
        if axis is None:
            point, _ = run_point(cfg, trials, seed, axis_value=cfg.active_users)
            master = cfg.seeds.trial_seed if seed is None else seed
            sweep = SweepResult(axis=SweepAxis.ACTIVE_USERS, master_seed=master, trials=trials, points=[point])
            kind = "trial"
        else:
            if not isinstance(values, list) or not values:
                return _problem_response(400, "Bad Request", "values must be a non-empty list", "/values")
            try:
                axis = SweepAxis(axis)
            except ValueError:
                return _problem_response(400, "Bad Request", f"unknown axis {axis!r}", "/axis")
            sweep = monte_carlo_sweep(cfg, axis, [float(v) for v in values], trials, master_seed=seed)
            kind = "sweep"
    except ConfigError as exc:
        return _config_problem(exc)
    except (TypeError, ValueError, AttributeError) as exc:
        return _problem_response(400, "Bad Request", str(exc), "/config")

    run_uuid, run = new_run(kind, config_to_dict(cfg), sweep.to_dict())
    store.put_run(run_uuid, run)
    store.put_artifact(run_uuid, "sweep.csv", sweep_csv_text(sweep).encode())
    logger.info("stored %s run %s", kind, run.run_id)
    return JSONResponse(status_code=201, content=run.summary(), headers={"location": f"/runs/{run_uuid}"})


@app.get("/runs")
async def list_runs(kind: str | None = None) -> Response:
    """List stored runs, oldest first."""
    return JSONResponse(content=[r.summary() for r in store.list_runs(kind)])


@app.get("/runs/{run_uuid}")
async def get_run(run_uuid: str) -> Response:
    run = store.get_run(run_uuid)
    if run is None:
        return _problem_response(404, "Not Found", f"Run {run_uuid!r} not found", pointer="/run")
    return JSONResponse(content={**run.summary(), "config": run.config, "result": run.result})


@app.get("/runs/{run_uuid}/sweep.csv")
async def get_run_csv(run_uuid: str) -> Response:
    content = store.get_artifact(run_uuid, "sweep.csv")
    if content is None:
        return _problem_response(404, "Not Found", f"Run {run_uuid!r} has no sweep.csv", pointer="/run")
    return Response(content=content, media_type="text/csv")


@app.delete("/runs/{run_uuid}")
async def delete_run(run_uuid: str) -> Response:
    """Delete a run; deleting a missing run also succeeds."""
    store.delete_run(run_uuid)
    return Response(status_code=204)

