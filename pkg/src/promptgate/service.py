"""HTTP gateway: the pipeline, review queue, metrics, and health as a
sidecar JSON API for MCP hosts and the review console.
"""

from __future__ import annotations

import logging
import threading
import uuid
from collections import Counter
from contextlib import asynccontextmanager
from typing import Any

from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import GatewayConfig
from .errors import AlreadyResolved, NotFound
from .pipeline import Decision, Pipeline
from .review_queue import ReviewStatus

logger = logging.getLogger("promptgate.service")


class CheckRequest(BaseModel):
    text: str = Field(min_length=0)


class ResolveRequest(BaseModel):
    verdict: str
    operator: str = "anonymous"


class _Metrics:
    """Running decision counters, by action and by blocking layer."""

    def __init__(self):
        self._lock = threading.Lock()
        self.actions: Counter = Counter()
        self.blocks_by_layer: Counter = Counter()

    def record(self, decision: Decision) -> None:
        with self._lock:
            self.actions[decision.action.value] += 1
            if decision.action.value == "BLOCK":
                self.blocks_by_layer[decision.layer.value] += 1

    def snapshot(self) -> dict[str, Any]:
        with self._lock:
            return {
                "decisions": {k: self.actions.get(k, 0) for k in ("ALLOW", "REVIEW", "BLOCK")},
                "blocks_by_layer": dict(self.blocks_by_layer),
                "total": sum(self.actions.values()),
            }


def create_app(config: GatewayConfig | None = None, pipeline: Pipeline | None = None) -> FastAPI:
    cfg = config or GatewayConfig()
    state = {"ready": False, "pipeline": pipeline}
    metrics = _Metrics()

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if state["pipeline"] is None:
            state["pipeline"] = Pipeline.from_config(cfg)
        state["ready"] = True
        yield

    app = FastAPI(title="promptgate", version="0.1.0", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"request_id": uuid.uuid4().hex, "detail": exc.errors()},
        )

    def _pipeline() -> Pipeline:
        pipe = state["pipeline"]
        if pipe is None or not state["ready"]:
            raise HTTPException(status_code=503, detail="gateway is starting")
        return pipe

    def _auth(request: Request) -> None:
        if not cfg.api_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {cfg.api_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.middleware("http")
    async def _request_id(request: Request, call_next):
        response: Response = await call_next(request)
        response.headers.setdefault("X-Request-Id", uuid.uuid4().hex)
        return response

    def _decision_body(decision: Decision) -> dict[str, Any]:
        metrics.record(decision)
        body = decision.to_dict()
        logger.info(
            "decision ts=%s request_id=%s action=%s layer=%s",
            decision.timestamp, decision.request_id, decision.action.value,
            decision.layer.value,
        )
        return body

    @app.post("/v1/check/input", dependencies=[Depends(_auth)])
    def check_input(body: CheckRequest) -> dict[str, Any]:
        return _decision_body(_pipeline().check_input(body.text))

    @app.post("/v1/check/output", dependencies=[Depends(_auth)])
    def check_output(body: CheckRequest) -> dict[str, Any]:
        return _decision_body(_pipeline().check_output(body.text))

    @app.get("/v1/review/queue", dependencies=[Depends(_auth)])
    def review_queue(status: str = "pending") -> dict[str, Any]:
        queue = _pipeline().review_queue
        if status == "all":
            items = queue.list()
        else:
            try:
                items = queue.list(ReviewStatus(status))
            except ValueError:
                raise HTTPException(status_code=400, detail=f"unknown status {status!r}")
        return {
            "request_id": uuid.uuid4().hex,
            "items": [item.to_dict() for item in items],
        }

    @app.post("/v1/review/{item_id}/resolve", dependencies=[Depends(_auth)])
    def resolve(item_id: str, body: ResolveRequest) -> dict[str, Any]:
        if body.verdict not in ("allow", "block"):
            raise HTTPException(status_code=400, detail="verdict must be allow or block")
        queue = _pipeline().review_queue
        try:
            item = queue.resolve(item_id, body.verdict, body.operator)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"unknown review item {item_id}")
        except AlreadyResolved:
            raise HTTPException(status_code=409, detail=f"review item {item_id} already resolved")
        return {"request_id": uuid.uuid4().hex, "item": item.to_dict()}

    @app.get("/v1/metrics", dependencies=[Depends(_auth)])
    def get_metrics() -> dict[str, Any]:
        return {"request_id": uuid.uuid4().hex, **metrics.snapshot()}

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        if not state["ready"] or state["pipeline"] is None:
            raise HTTPException(status_code=503, detail="starting")
        deps = dict(state["pipeline"].dependencies)
        degraded = any(v == "unreachable" for v in deps.values())
        return {
            "request_id": uuid.uuid4().hex,
            "status": "degraded" if degraded else "ok",
            "dependencies": deps,
        }

    return app
