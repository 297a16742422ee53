"""HTTP service wrapping the scenario harness.

Endpoints cover the operator workflow: validate a scenario, run it and
fetch the report, and re-render an exported delivery transcript. Scenario
validation failures come back as 400 with the problem list.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from edgeti import __version__
from edgeti.errors import ParameterError, ScenarioError
from edgeti.harness import (
    render_report,
    render_transcript_text,
    report_to_dict,
    run_scenario_artifacts,
    scenario_from_dict,
)
from edgeti.service.schemas import (
    HealthResponse,
    ReplayRequest,
    ReplayResponse,
    SimulationRequest,
    SimulationResponse,
    ValidateRequest,
    ValidateResponse,
)
from edgeti.transport import parse_transcript, transcript_to_jsonl


def create_app() -> FastAPI:
    app = FastAPI(
        title="edgeti",
        version=__version__,
        description="Deterministic edge threat-intelligence scenario service",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/scenarios/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        try:
            scenario_from_dict(request.scenario)
        except ScenarioError as exc:
            return ValidateResponse(valid=False, errors=list(exc.problems))
        return ValidateResponse(valid=True, errors=[])

    @app.post("/simulations/run", response_model=SimulationResponse)
    def run(request: SimulationRequest) -> SimulationResponse:
        doc = dict(request.scenario)
        if request.seed is not None:
            doc["seed"] = request.seed
        try:
            spec = scenario_from_dict(doc)
        except ScenarioError as exc:
            raise HTTPException(status_code=400, detail=list(exc.problems)) from None
        artifacts = run_scenario_artifacts(spec)
        report = artifacts.report
        return SimulationResponse(
            report=report_to_dict(report),
            text=render_report(report, "text") if request.include_text else None,
            transcript=(
                transcript_to_jsonl(artifacts.transcript)
                if request.include_transcript
                else None
            ),
        )

    @app.post("/replay/render", response_model=ReplayResponse)
    def replay(request: ReplayRequest) -> ReplayResponse:
        try:
            entries = parse_transcript(request.transcript)
        except ParameterError as exc:
            raise HTTPException(status_code=400, detail=[str(exc)]) from None
        return ReplayResponse(
            text=render_transcript_text(entries), deliveries=len(entries)
        )

    return app


app = create_app()
