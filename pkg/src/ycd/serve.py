"""HTTP classification service.

One immutable model bundle shared across requests; handlers never mutate it,
so concurrent identical requests are guaranteed identical answers. Every
error body has the shape {"error": {"code": ..., "message": ...}}.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import data as data_mod
from . import model as model_mod
from .model import ModelBundle

MIN_BODY_LIMIT = 64 * 1024
DEFAULT_BODY_LIMIT = 8 * 1024 * 1024
ACCEPTED_CONTENT_TYPES = ("image/jpeg", "image/png")


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    model_path: str | None = None
    top_k: int | None = None  # None: return the full distribution
    max_body_bytes: int = DEFAULT_BODY_LIMIT
    allowed_origins: tuple[str, ...] = ()

    def __post_init__(self):
        if self.top_k is not None and self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.max_body_bytes < MIN_BODY_LIMIT:
            raise ValueError(
                f"max_body_bytes must be >= {MIN_BODY_LIMIT}, got {self.max_body_bytes}"
            )


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


def create_app(config: ServiceConfig | None = None,
               bundle: ModelBundle | None = None) -> FastAPI:
    """Build the service application.

    The bundle may be passed directly (tests) or loaded from
    config.model_path; with neither, data endpoints answer 503 until a
    model exists.
    """
    config = config or ServiceConfig()
    if bundle is None and config.model_path:
        bundle = model_mod.load_bundle(config.model_path)

    app = FastAPI(title="ycd", openapi_url=None, docs_url=None, redoc_url=None)
    if config.allowed_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.allowed_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )
    app.state.bundle = bundle
    app.state.config = config
    app.state.requests_served = 0
    app.state.counter_lock = threading.Lock()

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(
            exc.status_code, "http_error"
        )
        return _error_response(exc.status_code, code, str(exc.detail))

    def _require_bundle() -> ModelBundle:
        loaded = app.state.bundle
        if loaded is None:
            raise ServiceError(503, "model_not_loaded", "no model bundle is loaded")
        return loaded

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "ready": app.state.bundle is not None}

    @app.get("/v1/labels")
    def labels():
        return {"labels": list(_require_bundle().labels)}

    @app.get("/v1/model/info")
    def model_info():
        loaded = _require_bundle()
        report = loaded.cost_report()
        return {
            "params": report.total_params,
            "macs": report.total_macs,
            "input_resolution": loaded.arch.effective_resolution,
            "format_version": loaded.format_version,
        }

    @app.post("/v1/classify")
    async def classify(request: Request):
        loaded = _require_bundle()
        content_type = request.headers.get("content-type", "")
        media = content_type.split(";", 1)[0].strip().lower()
        if media not in ACCEPTED_CONTENT_TYPES:
            raise ServiceError(
                415, "unsupported_media_type",
                f"content-type must be one of {', '.join(ACCEPTED_CONTENT_TYPES)}",
            )
        body = await request.body()
        if len(body) > config.max_body_bytes:
            raise ServiceError(
                400, "body_too_large",
                f"request body exceeds {config.max_body_bytes} bytes",
            )
        started = time.perf_counter()
        try:
            record = data_mod.decode_image_bytes(body)
        except data_mod.DataError as exc:
            raise ServiceError(400, "undecodable_image", str(exc))
        image = data_mod.preprocess_record(record, loaded.arch.effective_resolution)
        _, probs = model_mod.forward(loaded, image)
        latency_ms = (time.perf_counter() - started) * 1000.0
        order = np.argsort(-probs, kind="stable")
        if config.top_k is not None:
            order = order[: config.top_k]
        predictions = [
            {"label": loaded.labels[i], "probability": float(probs[i])}
            for i in order
        ]
        with app.state.counter_lock:
            app.state.requests_served += 1
        return {"predictions": predictions, "latency_ms": latency_ms}

    return app


def run(config: ServiceConfig, bundle: ModelBundle | None = None) -> None:
    """Serve until interrupted."""
    import uvicorn

    app = create_app(config, bundle)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
