"""FastAPI application wrapping the run commands.

The CLI talks to this app either in-process or over the network; both paths
exercise the same request/response models.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import ExperimentConfig
from ..runner import (
    RunnerError,
    run_diagnose,
    run_evaluate,
    run_preprocess,
    run_score,
    run_synth,
    run_train,
)
from .schemas import (
    ConfigResponse,
    DiagnoseRequest,
    DiagnoseResponse,
    EvaluateResponse,
    HealthResponse,
    PreprocessResponse,
    RunRequest,
    ScoreResponse,
    SynthResponse,
    TrainResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="latad", version=__version__)

    @app.exception_handler(FileNotFoundError)
    async def _missing(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(RunnerError)
    async def _runner_error(request: Request, exc: RunnerError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config/default", response_model=ConfigResponse)
    def default_config() -> ConfigResponse:
        return ConfigResponse(config=ExperimentConfig())

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: RunRequest) -> SynthResponse:
        return SynthResponse(**run_synth(req.config, req.run_dir))

    @app.post("/preprocess", response_model=PreprocessResponse)
    def preprocess(req: RunRequest) -> PreprocessResponse:
        return PreprocessResponse(**run_preprocess(req.config, req.run_dir))

    @app.post("/train", response_model=TrainResponse)
    def train(req: RunRequest) -> TrainResponse:
        return TrainResponse(**run_train(req.config, req.run_dir))

    @app.post("/score", response_model=ScoreResponse)
    def score(req: RunRequest) -> ScoreResponse:
        return ScoreResponse(**run_score(req.config, req.run_dir))

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: RunRequest) -> EvaluateResponse:
        return EvaluateResponse(**run_evaluate(req.config, req.run_dir))

    @app.post("/diagnose", response_model=DiagnoseResponse)
    def diagnose(req: DiagnoseRequest) -> DiagnoseResponse:
        return DiagnoseResponse(**run_diagnose(req.config, req.run_dir, req.window))

    return app
