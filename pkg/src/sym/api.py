"""HTTP surface: thin JSON routing over SymService.

Request bodies are parsed by hand so every rejection uses the one error
shape ({code, message, detail?}) and the one status mapping, no matter
which layer raised it.
"""

from typing import Optional

from fastapi import Body, FastAPI, Header, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from sym import config as config_mod
from sym.errors import SymError, ValidationError
from sym.lexicon import UpdateParams
from sym.model import AssignmentPolicy, Phase, SpotKind
from sym.service import SymService

STATUS_BY_CODE = {
    "VALIDATION": 400,
    "UNAUTHORIZED": 401,
    "NOT_FOUND": 404,
    "PROTOCOL": 409,
    "CONFLICT": 409,
    "BUSY": 409,
}


class UnauthorizedError(SymError):
    code = "UNAUTHORIZED"


def _field(payload: dict, name: str, required: bool = True, default=None):
    value = payload.get(name)
    if value is None:
        if required:
            raise ValidationError(f"missing field {name!r}")
        return default
    return value


def _parse_policy(raw) -> Optional[AssignmentPolicy]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ValidationError("assignment_policy must be an object")
    try:
        return AssignmentPolicy.from_dict(raw)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad assignment_policy: {exc}")


def _parse_enum(enum_cls, value, field: str):
    if value is None:
        return None
    try:
        return enum_cls(value)
    except ValueError:
        raise ValidationError(
            f"{field} must be one of {[m.value for m in enum_cls]}, got {value!r}"
        )


def create_app(service: SymService, admin_token: Optional[str] = None) -> FastAPI:
    """Build the application; admin_token=None leaves /v1/admin open."""
    app = FastAPI(title="sym", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(SymError)
    async def sym_error_handler(request: Request, exc: SymError):
        return JSONResponse(
            status_code=STATUS_BY_CODE.get(exc.code, 500), content=exc.to_dict()
        )

    @app.exception_handler(RequestValidationError)
    async def request_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "code": "VALIDATION",
                "message": "malformed request",
                "detail": [str(e.get("msg")) for e in exc.errors()],
            },
        )

    def check_admin(header_token: Optional[str]) -> None:
        if admin_token is not None and header_token != admin_token:
            raise UnauthorizedError("missing or wrong admin token")

    # -- experiments --------------------------------------------------------

    @app.post("/v1/experiments", status_code=201)
    async def create_experiment(
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return service.create_experiment(
            name=_field(payload, "name"),
            dictionary_id=_field(payload, "dictionary_id"),
            during_kind=_field(payload, "during_kind", required=False, default="BOTH"),
            assignment_policy=_parse_policy(payload.get("assignment_policy")),
            k_suggestions=_field(payload, "k_suggestions", required=False),
            suggestion_phases=_field(payload, "suggestion_phases", required=False),
            idempotency_key=idempotency_key,
        )

    @app.get("/v1/experiments/{experiment_id}/cloud")
    async def cloud(
        experiment_id: str, phase: Optional[str] = None, kind: Optional[str] = None
    ):
        return {
            "experiment_id": experiment_id,
            "points": service.cloud(
                experiment_id,
                phase=_parse_enum(Phase, phase, "phase"),
                kind=_parse_enum(SpotKind, kind, "kind"),
            ),
        }

    @app.get("/v1/experiments/{experiment_id}/export.csv")
    async def export(experiment_id: str):
        data = service.export(experiment_id=experiment_id)
        return Response(
            content=data,
            media_type="text/csv; charset=utf-8",
            headers={
                "Content-Disposition": f'attachment; filename="{experiment_id}.csv"'
            },
        )

    # -- sessions and spots ---------------------------------------------------

    @app.post("/v1/sessions", status_code=201)
    async def create_session(
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return service.create_session(
            experiment_id=_field(payload, "experiment_id"),
            participant_pseudonym=_field(payload, "participant_pseudonym"),
            idempotency_key=idempotency_key,
        )

    @app.get("/v1/sessions/{session_id}")
    async def get_session(session_id: str):
        return service.session_detail(session_id)

    @app.post("/v1/sessions/{session_id}/spots", status_code=201)
    async def submit_spot(
        session_id: str,
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        if "x" not in payload or "y" not in payload:
            raise ValidationError("spot needs x and y coordinates")
        return service.submit_spot(
            session_id=session_id,
            phase=_field(payload, "phase"),
            kind=_field(payload, "kind"),
            x=payload["x"],
            y=payload["y"],
            t_ms=_field(payload, "t_ms"),
            stimulus_id=_field(payload, "stimulus_id", required=False),
            idempotency_key=idempotency_key,
        )

    @app.post("/v1/spots/{spot_id}/decision")
    async def decide(
        spot_id: str,
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return service.decide_suggestion(
            spot_id=spot_id,
            decision=_field(payload, "decision"),
            term_id=_field(payload, "term_id", required=False),
            idempotency_key=idempotency_key,
        )

    # -- markers ---------------------------------------------------------------

    @app.post("/v1/markers", status_code=201)
    async def ingest_marker(
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
    ):
        return service.ingest_marker(
            label=_field(payload, "label"),
            t_ms=_field(payload, "t_ms"),
            session_id=_field(payload, "session_id", required=False),
            experiment_id=_field(payload, "experiment_id", required=False),
            idempotency_key=idempotency_key,
        )

    # -- dictionaries ------------------------------------------------------------

    @app.get("/v1/dictionaries/{dictionary_id}/versions/{version}")
    async def get_dictionary_version(dictionary_id: str, version: int):
        return service.get_dictionary(dictionary_id, version=version).to_dict()

    @app.post("/v1/admin/dictionaries", status_code=201)
    async def publish_dictionary(
        payload: dict = Body(...),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
        x_admin_token: Optional[str] = Header(None, alias="X-Admin-Token"),
    ):
        check_admin(x_admin_token)
        return service.publish_dictionary(payload, idempotency_key=idempotency_key)

    @app.post("/v1/admin/dictionaries/{dictionary_id}/update")
    async def run_update(
        dictionary_id: str,
        payload: Optional[dict] = Body(None),
        idempotency_key: Optional[str] = Header(None, alias="Idempotency-Key"),
        x_admin_token: Optional[str] = Header(None, alias="X-Admin-Token"),
    ):
        check_admin(x_admin_token)
        params = None
        if payload:
            base = service.update_params
            params = UpdateParams(
                alpha=payload.get("alpha", base.alpha),
                min_samples=payload.get("min_samples", base.min_samples),
            )
        return service.run_update(
            dictionary_id, params=params, idempotency_key=idempotency_key
        )

    return app


def build_default_app() -> FastAPI:
    """App factory used by `sym serve`: config and token from the environment."""
    cfg = config_mod.load_config()
    service = SymService(
        data_dir=cfg.data_dir,
        default_k=cfg.default_k,
        update_params=cfg.update_params,
    )
    return create_app(service, admin_token=config_mod.admin_token())
