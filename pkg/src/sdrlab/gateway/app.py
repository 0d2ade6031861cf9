"""HTTP face of the orchestrator.

Every endpoint delegates to exactly one orchestrator call, so API and
CLI behavior cannot drift apart.  Domain errors pass through by name:
the response body is {"error": "<ClassName>", "detail": "<message>"}
with the status class fixed per error family (bad input 400, missing
id 404, wrong state 409, resource exhaustion 422, wrong role 403).

Auth is a static bearer-token table mapping token -> (user, role).
Admin tokens may do everything a User can plus review decisions and
inventory reload.

GET /v1/events is a server-sent-event stream of node status changes.
Clients resume with the standard Last-Event-ID header (or ?last_id=);
buffered events replay first, then live ones as they happen.  Because
the browser EventSource API cannot set request headers, this one
endpoint also accepts the token as ?access_token=.
"""

from __future__ import annotations

import json
import queue
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from ..errors import (
    AllocationError,
    CapacityError,
    ConflictError,
    DomainError,
    LicenseError,
    NoFitError,
    NotFoundError,
    OrderError,
    ParseError,
    PlacementError,
    RateError,
    ScenarioError,
    SealedError,
    ShiftError,
    SlotError,
    SpecError,
    StateError,
    ValidationError,
    ZeroReferenceError,
)
from ..inventory import load_inventory
from ..service import NodeStatusEvent, Orchestrator


class Role(str, Enum):
    USER = "User"
    ADMIN = "Admin"


@dataclass(frozen=True)
class ApiSession:
    token: str
    user: str
    role: Role


class AuthError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status


# Order matters: subclasses must precede their parents (NotFoundError
# is a StateError but maps to 404, not 409).
_STATUS_BY_ERROR: tuple[tuple[type, int], ...] = (
    (NotFoundError, 404),
    (ParseError, 400),
    (ValidationError, 400),
    (SpecError, 400),
    (LicenseError, 400),
    (ShiftError, 400),
    (RateError, 400),
    (SlotError, 400),
    (ScenarioError, 400),
    (ZeroReferenceError, 400),
    (SealedError, 409),
    (OrderError, 409),
    (ConflictError, 409),
    (StateError, 409),
    (CapacityError, 422),
    (NoFitError, 422),
    (AllocationError, 422),
    (PlacementError, 422),
)


def status_for(exc: DomainError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 500


def canonical(payload: Any, status: int = 200) -> Response:
    """Key-sorted compact JSON so identical state yields identical bytes."""
    return Response(
        content=json.dumps(payload, sort_keys=True, separators=(",", ":")),
        status_code=status,
        media_type="application/json",
    )


def error_body(name: str, detail: str, status: int) -> Response:
    return canonical({"error": name, "detail": detail}, status)


def create_app(orch: Orchestrator, tokens: dict[str, tuple[str, Role]]) -> FastAPI:
    app = FastAPI(title="sdrlab", docs_url=None, redoc_url=None)
    app.state.orch = orch
    # The web portal is served as static files from whatever origin is
    # handy; auth is bearer tokens, not cookies, so a wildcard is safe.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(DomainError)
    async def on_domain_error(request: Request, exc: DomainError):
        return error_body(type(exc).__name__, str(exc), status_for(exc))

    def session_for(authorization: Optional[str]) -> ApiSession:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthError(401, "missing bearer token")
        token = authorization[len("Bearer ") :]
        if token not in tokens:
            raise AuthError(401, "unknown token")
        user, role = tokens[token]
        return ApiSession(token=token, user=user, role=role)

    def require_user(
        authorization: Optional[str] = Header(default=None),
    ) -> ApiSession:
        return session_for(authorization)

    def require_admin(
        authorization: Optional[str] = Header(default=None),
    ) -> ApiSession:
        session = session_for(authorization)
        if session.role is not Role.ADMIN:
            raise AuthError(403, f"{session.user} lacks the Admin role")
        return session

    @app.exception_handler(AuthError)
    async def on_auth_error(request: Request, exc: AuthError):
        return error_body("AuthError", str(exc), exc.status)

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        return error_body("ValidationError", str(exc.errors()), 400)

    async def body_of(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except ValueError as exc:
            raise ParseError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError("request body must be a JSON object")
        return doc

    # ------------------------------------------------------------- inventory

    @app.get("/v1/inventory")
    def get_inventory(session: ApiSession = Depends(require_user)):
        return canonical(orch.inventory_dict())

    @app.get("/v1/capacity")
    def get_capacity(session: ApiSession = Depends(require_user)):
        return canonical(orch.capacity_dict())

    @app.post("/v1/inventory/reload")
    async def reload_inventory(
        request: Request, session: ApiSession = Depends(require_admin)
    ):
        body = await body_of(request)
        if "path" in body:
            try:
                text = open(body["path"]).read()
            except OSError as exc:
                raise SpecError("path", f"unreadable inventory file: {exc}") from exc
        elif "yaml" in body:
            text = body["yaml"]
        else:
            raise SpecError("body", "expected 'path' or 'yaml'")
        inv = load_inventory(text)
        return canonical(orch.reload_inventory(inv, text))

    # ----------------------------------------------------------- reservations

    @app.post("/v1/reservations")
    async def post_reservation(
        request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        return canonical(orch.request(session.user, body), 201)

    @app.get("/v1/reservations/{res_id}")
    def get_reservation(res_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.reservation(res_id))

    @app.get("/v1/schedule")
    def get_schedule(
        from_utc: Optional[float] = Query(default=None, alias="from"),
        to_utc: Optional[float] = Query(default=None, alias="to"),
        session: ApiSession = Depends(require_user),
    ):
        return canonical(orch.schedule(from_utc, to_utc))

    @app.post("/v1/reservations/{res_id}/evaluate")
    def post_evaluate(res_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.evaluate(res_id))

    @app.post("/v1/reservations/{res_id}/review")
    async def post_review(
        res_id: str, request: Request, session: ApiSession = Depends(require_admin)
    ):
        body = await body_of(request)
        if "approve" not in body:
            raise SpecError("approve", "review body requires an approve flag")
        return canonical(orch.review(res_id, session.user, bool(body["approve"])))

    @app.post("/v1/reservations/{res_id}/activate")
    def post_activate(res_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.activate(res_id))

    @app.post("/v1/reservations/{res_id}/complete")
    def post_complete(res_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.complete(res_id))

    @app.post("/v1/reservations/{res_id}/cancel")
    def post_cancel(res_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.cancel(res_id, session.user))

    @app.post("/v1/reservations/{res_id}/survey")
    async def post_survey(
        res_id: str, request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        if "responses" not in body or not isinstance(body["responses"], list):
            raise SpecError("responses", "survey body requires a responses list")
        return canonical(orch.survey(res_id, [str(r) for r in body["responses"]]))

    @app.get("/v1/utilization")
    def get_utilization(
        from_utc: float = Query(alias="from"),
        to_utc: float = Query(alias="to"),
        bucket_s: float = Query(alias="bucket"),
        session: ApiSession = Depends(require_user),
    ):
        return canonical(orch.utilization(from_utc, to_utc, bucket_s))

    # -------------------------------------------------------------- scenario

    @app.put("/v1/scenario")
    async def put_scenario(
        request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        if "yaml" not in body:
            raise SpecError("yaml", "scenario body requires a yaml field")
        return canonical(orch.set_scenario(body["yaml"]))

    @app.get("/v1/scenario")
    def get_scenario(session: ApiSession = Depends(require_user)):
        return canonical(orch.get_scenario())

    @app.post("/v1/emulation/run")
    async def post_emulation(
        request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        return canonical(orch.run_emulation(body))

    # ------------------------------------------------------------ experiments

    @app.post("/v1/experiments")
    async def post_experiment(
        request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        if "reservation_id" not in body:
            raise SpecError("reservation_id", "experiment body requires reservation_id")
        return canonical(orch.open_experiment(body["reservation_id"]), 201)

    @app.post("/v1/experiments/{exp_id}/records")
    async def post_records(
        exp_id: str, request: Request, session: ApiSession = Depends(require_user)
    ):
        body = await body_of(request)
        return canonical(orch.append_records(exp_id, body))

    @app.get("/v1/experiments/{exp_id}/records")
    def get_records(
        exp_id: str,
        t_min: Optional[float] = None,
        t_max: Optional[float] = None,
        node_id: Optional[str] = None,
        freq_min: Optional[float] = None,
        freq_max: Optional[float] = None,
        az_min: Optional[float] = None,
        az_max: Optional[float] = None,
        session: ApiSession = Depends(require_user),
    ):
        return canonical(
            orch.query_records(
                exp_id,
                t_min=t_min,
                t_max=t_max,
                node_id=node_id,
                freq_min=freq_min,
                freq_max=freq_max,
                az_min=az_min,
                az_max=az_max,
            )
        )

    @app.post("/v1/experiments/{exp_id}/seal")
    def post_seal(exp_id: str, session: ApiSession = Depends(require_user)):
        return canonical(orch.seal_experiment(exp_id))

    # ---------------------------------------------------------------- events

    @app.get("/v1/events")
    def get_events(
        request: Request,
        last_id: int = Query(default=0),
        max_events: Optional[int] = Query(default=None),
        timeout_s: Optional[float] = Query(default=None),
        access_token: Optional[str] = Query(default=None),
        last_event_id: Optional[str] = Header(default=None),
        authorization: Optional[str] = Header(default=None),
    ):
        # EventSource cannot set headers, so the token may arrive as a
        # query parameter instead.
        if authorization is None and access_token is not None:
            authorization = "Bearer " + access_token
        session_for(authorization)
        if last_event_id is not None:
            try:
                last_id = int(last_event_id)
            except ValueError:
                pass

        def frame(ev: NodeStatusEvent) -> str:
            data = json.dumps(ev.to_dict(), sort_keys=True, separators=(",", ":"))
            return f"id: {ev.event_id}\ndata: {data}\n\n"

        def stream():
            q: queue.Queue = queue.Queue()
            with orch.lock:
                backlog = orch.events_since(last_id)
                orch.subscribers.append(q.put)
            sent = 0
            try:
                for ev in backlog:
                    yield frame(ev)
                    sent += 1
                    if max_events is not None and sent >= max_events:
                        return
                while True:
                    try:
                        ev = q.get(timeout=timeout_s if timeout_s is not None else 15.0)
                    except queue.Empty:
                        if timeout_s is not None:
                            return
                        yield ": keepalive\n\n"
                        continue
                    if ev.event_id <= last_id:
                        continue
                    yield frame(ev)
                    sent += 1
                    if max_events is not None and sent >= max_events:
                        return
            finally:
                with orch.lock:
                    if q.put in orch.subscribers:
                        orch.subscribers.remove(q.put)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache"},
        )

    return app
