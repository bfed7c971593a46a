"""HTTP control plane for one engine instance.

Many readers, one logical writer. Every mutating request takes a slot in
a bounded queue and then the single writer lock, so commands apply in
arrival order and the audit seq numbering is the application order. When
the queue is full the request bounces straight off with a 429. Reads go
lockless against the current immutable snapshot.

The wire format is plain JSON with field names matching the domain
types. Tokens travel in request bodies. The naive strategy is not
reachable through this surface at all, regardless of engine config.
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager, contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import Engine
from .errors import (
    AlreadyResolved,
    EngineError,
    NotActive,
    QueueFull,
    Unauthorized,
    UnknownFragment,
    UnknownPending,
    UnknownSector,
)
from .injection import InjectionRequest, Strategy, effective_blueprint
from .manifold import (
    Assertion,
    BeliefFragment,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    FragmentStatus,
    Polarity,
    SectorRegistry,
)
from .safety import AssertionMatch, Decision, FilterMode, FilterRule, PendingEntry

MAX_WAIT_MS = 2000
DEFAULT_QUEUE_DEPTH = 16

_STATUS_BY_ERROR: tuple[tuple[type[EngineError], int], ...] = (
    (Unauthorized, 401),
    (QueueFull, 429),
    (UnknownPending, 409),
    (AlreadyResolved, 409),
    (NotActive, 409),
    (UnknownFragment, 409),
    (UnknownSector, 409),
)


# ---------------------------------------------------------------------------
# Configuration

@dataclass
class SourceSpec:
    source_id: str
    token: str
    max_priority: float = 1.0
    strategies: tuple[str, ...] = ("direct",)
    review: bool = False


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8600
    tick_interval_ms: int | None = None
    queue_depth: int = DEFAULT_QUEUE_DEPTH
    engine: dict[str, str] = field(default_factory=dict)
    sectors: tuple[str, ...] = ()
    sources: tuple[SourceSpec, ...] = ()
    whitelist: tuple[dict, ...] = ()
    blacklist: tuple[dict, ...] = ()


def load_service_config(path: str) -> ServiceConfig:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("service config must be a JSON object")
    cfg = ServiceConfig()
    if "bind" in raw:
        host, sep, port = str(raw["bind"]).rpartition(":")
        if not sep:
            raise ValueError(f"bind must be host:port, got {raw['bind']!r}")
        cfg.host, cfg.port = host, int(port)
    mode = raw.get("tick_mode", "manual")
    if mode == "manual":
        cfg.tick_interval_ms = None
    elif isinstance(mode, dict) and "interval_ms" in mode:
        interval = int(mode["interval_ms"])
        if interval < 1:
            raise ValueError("interval_ms must be >= 1")
        cfg.tick_interval_ms = interval
    else:
        raise ValueError(f"tick_mode must be 'manual' or {{'interval_ms': n}}: {mode!r}")
    cfg.queue_depth = int(raw.get("queue_depth", DEFAULT_QUEUE_DEPTH))
    cfg.engine = {k: str(v) for k, v in raw.get("engine", {}).items()}
    cfg.sectors = tuple(raw.get("sectors", ()))
    cfg.sources = tuple(
        SourceSpec(
            source_id=s["id"],
            token=s["token"],
            max_priority=float(s.get("max_priority", 1.0)),
            strategies=tuple(s.get("strategies", ("direct",))),
            review=bool(s.get("review", False)),
        )
        for s in raw.get("sources", ())
    )
    cfg.whitelist = tuple(raw.get("whitelist", ()))
    cfg.blacklist = tuple(raw.get("blacklist", ()))
    return cfg


def _polarity(value: str) -> Polarity:
    if value in ("+", "-"):
        return Polarity.from_token(value)
    return Polarity(value)


def _rule_from_spec(spec: dict) -> FilterRule:
    rule_id = spec["rule_id"]
    if "topic" in spec:
        return FilterRule(rule_id=rule_id, topic_exact=spec["topic"])
    if "text" in spec:
        return FilterRule(rule_id=rule_id, text_glob=spec["text"])
    if "assertion" in spec:
        a = spec["assertion"]
        return FilterRule(
            rule_id=rule_id,
            assertion_match=AssertionMatch(
                a["topic"], a["predicate"], _polarity(a["polarity"]).value
            ),
        )
    raise ValueError(f"rule {rule_id!r} needs topic, text, or assertion")


def build_engine(cfg: ServiceConfig) -> Engine:
    engine_config = EngineConfig().updated(cfg.engine)
    engine = Engine(engine_config, sectors=SectorRegistry(cfg.sectors))
    for spec in cfg.sources:
        engine.register_source(
            spec.source_id,
            token=spec.token,
            max_priority=spec.max_priority,
            strategies=tuple(Strategy(s) for s in spec.strategies),
            can_review=spec.review,
        )
    for raw in cfg.whitelist:
        engine.add_rule(FilterMode.WHITELIST, _rule_from_spec(raw))
    for raw in cfg.blacklist:
        engine.add_rule(FilterMode.BLACKLIST, _rule_from_spec(raw))
    return engine


# ---------------------------------------------------------------------------
# Request bodies

class AssertionBody(BaseModel):
    topic: str
    predicate: str
    polarity: str


class CoordBody(BaseModel):
    sector: str
    k: int


class FragmentBody(BaseModel):
    text: str
    kind: str
    sector: str
    k: int = 0
    anchor: float = 0.5
    assertion: AssertionBody | None = None
    pinned: bool = False
    ttl: int | None = None
    fast_decay: bool = False


class InjectBody(BaseModel):
    strategy: str
    source: str
    token: str
    priority: float
    fragment: FragmentBody
    ttl: int | None = None
    target: CoordBody | None = None


class TickBody(BaseModel):
    count: int = 1


class ActorBody(BaseModel):
    actor: str
    token: str


def _blueprint(body: FragmentBody) -> FragmentBlueprint:
    assertion = None
    if body.assertion is not None:
        assertion = Assertion(
            body.assertion.topic,
            body.assertion.predicate,
            _polarity(body.assertion.polarity),
        )
    return FragmentBlueprint(
        text=body.text,
        kind=FragmentKind(body.kind),
        coord=Coord(body.sector, body.k),
        assertion=assertion,
        anchor=body.anchor,
        pinned=body.pinned,
        ttl=body.ttl,
        fast_decay=body.fast_decay,
    )


# ---------------------------------------------------------------------------
# Serialization

def fragment_json(f: BeliefFragment) -> dict:
    return {
        "id": f.id,
        "text": f.text,
        "kind": f.kind.value,
        "coord": {"sector": f.coord.sector, "k": f.coord.k},
        "assertion": None
        if f.assertion is None
        else {
            "topic": f.assertion.topic,
            "predicate": f.assertion.predicate,
            "polarity": f.assertion.polarity.value,
        },
        "anchor": round(f.anchor, 6),
        "pinned": f.pinned,
        "ttl": f.ttl,
        "fast_decay": f.fast_decay,
        "provenance": f.provenance.token(),
        "born_tick": f.born_tick,
        "status": f.status.value,
    }


def pending_json(entry: PendingEntry) -> dict:
    blueprint = effective_blueprint(entry.request)
    return {
        "pending_id": entry.pending_id,
        "created_tick": entry.created_tick,
        "reasons": list(entry.reasons),
        "request": {
            "source": entry.request.source,
            "strategy": entry.request.strategy.value,
            "priority": entry.request.priority,
            "coord": blueprint.coord.token(),
            "kind": blueprint.kind.value,
            "topic": blueprint.assertion.topic if blueprint.assertion else "-",
            "text": blueprint.text,
        },
    }


# ---------------------------------------------------------------------------
# Application

class ServiceState:
    """Engine plus the concurrency gates the HTTP layer needs."""

    def __init__(self, engine: Engine, queue_depth: int = DEFAULT_QUEUE_DEPTH):
        self.engine = engine
        self._slots = threading.BoundedSemaphore(queue_depth)
        self._write_lock = threading.Lock()
        self._audit_cond = threading.Condition()

    @contextmanager
    def write(self):
        if not self._slots.acquire(blocking=False):
            raise QueueFull("command queue is full, retry later")
        try:
            with self._write_lock:
                yield self.engine
        finally:
            self._slots.release()
            with self._audit_cond:
                self._audit_cond.notify_all()

    def wait_for_audit(self, since: int, wait_ms: int) -> None:
        timeout = min(max(wait_ms, 0), MAX_WAIT_MS) / 1000.0
        if timeout <= 0:
            return
        with self._audit_cond:
            self._audit_cond.wait_for(
                lambda: self.engine.audit.last_seq() > since, timeout=timeout
            )


def _newest_pending_id(engine: Engine) -> int | None:
    entries = engine.pending.open_entries()
    return max((e.pending_id for e in entries), default=None)


def build_app(
    config: ServiceConfig | None = None, engine: Engine | None = None
) -> FastAPI:
    config = config or ServiceConfig()
    service = ServiceState(
        engine if engine is not None else build_engine(config),
        queue_depth=config.queue_depth,
    )
    tick_stop = threading.Event()

    def tick_loop(interval_s: float) -> None:
        while not tick_stop.wait(interval_s):
            try:
                with service.write() as target:
                    target.tick(1)
            except QueueFull:
                continue

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        ticker = None
        if config.tick_interval_ms is not None:
            ticker = threading.Thread(
                target=tick_loop, args=(config.tick_interval_ms / 1000.0,), daemon=True
            )
            ticker.start()
        try:
            yield
        finally:
            if ticker is not None:
                tick_stop.set()
                ticker.join(timeout=2)

    app = FastAPI(
        title="epistemic-engine control service",
        docs_url=None,
        redoc_url=None,
        lifespan=lifespan,
    )
    app.state.service = service
    app.state.config = config

    def engine_error_handler(request: Request, err: Exception) -> JSONResponse:
        assert isinstance(err, EngineError)
        status = next(
            (code for klass, code in _STATUS_BY_ERROR if isinstance(err, klass)), 400
        )
        return JSONResponse(
            status_code=status, content={"error": err.code, "detail": str(err)}
        )

    def value_error_handler(request: Request, err: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": "malformed", "detail": str(err)}
        )

    def validation_handler(request: Request, err: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": "malformed", "detail": str(err)}
        )

    app.add_exception_handler(EngineError, engine_error_handler)
    app.add_exception_handler(ValueError, value_error_handler)
    app.add_exception_handler(RequestValidationError, validation_handler)

    def _metrics() -> dict:
        m = service.engine.metrics()
        return {
            "tick": m["tick"],
            "kappa": round(m["kappa"], 6),
            "lambda": round(m["lambda"], 6),
            "active": m["active"],
            "pending": m["pending"],
        }

    @app.get("/v1/state")
    def get_state(sector: str | None = None, k: int | None = None, status: str = "active"):
        engine = service.engine
        state = engine.state
        if status == "all":
            fragments = list(state.all_fragments())
        else:
            wanted = FragmentStatus(status)
            fragments = [f for f in state.all_fragments() if f.status is wanted]
        if sector is not None:
            fragments = [f for f in fragments if f.coord.sector == sector]
        if k is not None:
            fragments = [f for f in fragments if f.coord.k == k]
        return {
            "tick": state.tick,
            "hash": engine.hash(),
            "k_max": engine.config.k_max,
            "sectors": list(engine.sectors.names()),
            "fragments": [fragment_json(f) for f in sorted(fragments, key=lambda f: f.id)],
        }

    @app.get("/v1/metrics")
    def get_metrics():
        return _metrics()

    @app.get("/v1/audit")
    def get_audit(since: int = 0, wait: int = 0):
        engine = service.engine
        if not engine.audit.since(since) and wait > 0:
            service.wait_for_audit(since, wait)
        records = engine.audit.since(since)
        return {
            "last_seq": engine.audit.last_seq(),
            "records": [r.to_json_obj() for r in records],
        }

    @app.get("/v1/pending")
    def get_pending():
        entries = service.engine.pending.open_entries()
        return {"entries": [pending_json(e) for e in entries]}

    @app.post("/v1/inject")
    def post_inject(body: InjectBody):
        strategy = Strategy(body.strategy)
        if strategy is Strategy.NAIVE:
            return JSONResponse(
                status_code=400,
                content={
                    "error": "naive_disabled",
                    "detail": "the naive strategy is not exposed over this service",
                },
            )
        request = InjectionRequest(
            strategy=strategy,
            source=body.source,
            priority=body.priority,
            fragment=_blueprint(body.fragment),
            ttl=body.ttl,
            target=Coord(body.target.sector, body.target.k) if body.target else None,
        )
        with service.write() as engine:
            record = engine.submit(request, body.token)
            pending_id = (
                _newest_pending_id(engine)
                if record.decision is Decision.FLAGGED_FOR_REVIEW
                else None
            )
            response = {
                "record": record.to_json_obj(),
                "pending_id": pending_id,
                "metrics": _metrics(),
            }
        return response

    @app.post("/v1/tick")
    def post_tick(body: TickBody):
        with service.write() as engine:
            reports = engine.tick(body.count)
            response = {
                "reports": [
                    {
                        "tick": r.tick,
                        "expired_ids": list(r.expired_ids),
                        "nullified_ids": list(r.nullified_ids),
                        "decayed": len(r.decayed),
                        "kappa": round(r.kappa, 6),
                        "lambda": round(r.load, 6),
                    }
                    for r in reports
                ],
                "metrics": _metrics(),
            }
        return response

    @app.post("/v1/pending/{pending_id}/approve")
    def post_approve(pending_id: int, body: ActorBody):
        with service.write() as engine:
            record = engine.resolve_pending(pending_id, "approve", body.actor, body.token)
            return {"record": record.to_json_obj(), "metrics": _metrics()}

    @app.post("/v1/pending/{pending_id}/reject")
    def post_reject(pending_id: int, body: ActorBody):
        with service.write() as engine:
            record = engine.resolve_pending(pending_id, "reject", body.actor, body.token)
            return {"record": record.to_json_obj(), "metrics": _metrics()}

    @app.post("/v1/beliefs/{fragment_id}/retire")
    def post_retire(fragment_id: int, body: ActorBody):
        with service.write() as engine:
            record = engine.retire(fragment_id, body.actor, body.token)
            return {"record": record.to_json_obj(), "metrics": _metrics()}

    @app.post("/v1/sectors/{name}/annihilate")
    def post_annihilate(name: str, body: ActorBody):
        with service.write() as engine:
            record = engine.annihilate(name, body.actor, body.token)
            return {"record": record.to_json_obj(), "metrics": _metrics()}

    @app.post("/v1/reflect")
    def post_reflect():
        with service.write() as engine:
            result = engine.reflect()
            return {
                "report_id": result.report_id,
                "admitted": result.outcome.admitted,
                "metrics": _metrics(),
            }

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
