"""Deterministic scenario harness: parse, run, replay-check.

Scripts are line-oriented text. A prologue declares sectors, config
overrides, sources, and filter rules; the body is a stream of `@tick`
events applied in file order. Identical (script, config, build) always
produces byte-identical audit and metrics documents, which is the whole
point: the audit file carries its own final state hash so a replay can
verify both the decision stream and the resulting state.

Grammar:
    sector <name>
    config <key>=<value>
    source <id> token=<tok> [max_priority=<p>] [strategies=<a,b,..>] [review]
    whitelist <rule_id> <matchspec>
    blacklist <rule_id> <matchspec>
    @<tick> <event> [key=value ...] ["text"]
    @<tick> expect <metric> <cmp> <value>

where <matchspec> is one of topic=<ident>, text=<glob>,
assertion=<topic>:<predicate>:<+|->. Blank lines and lines starting with
`#` are ignored. The only time-advancing event is `tick`; every event's
@tick must equal the engine clock at the moment it applies, which is
checked statically at parse time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

from .engine import Engine
from .errors import ScenarioParseError, UnknownSector
from .injection import InjectionRequest, Strategy
from .manifold import (
    Assertion,
    BUILTIN_SECTORS,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    Polarity,
    SectorRegistry,
)
from .safety import AssertionMatch, FilterMode, FilterRule

METRICS_HEADER = "epistemic-metrics v1"
FINAL_HASH_PREFIX = "# final-hash "

CORPUS_NAMES = (
    "bootstrap",
    "realtime_adjustment",
    "ethics_guardrails",
    "impasse_breaking",
    "loop_breaking",
)
WITNESS_NAMES = ("witness_naive", "witness_direct")


def load_corpus(name: str) -> str:
    from importlib.resources import files

    return (files(__package__) / "scenarios" / f"{name}.scn").read_text()

EVENT_KINDS = (
    "perceive",
    "inject",
    "tick",
    "reinforce",
    "retire",
    "annihilate",
    "reflect",
    "expect",
    "set_env",
)

EXPECT_METRICS = ("kappa", "lambda", "active_count", "pending_count")
EXPECT_CMPS = ("<=", ">=", "==")


@dataclass
class SourceDecl:
    source_id: str
    token: str
    max_priority: float = 1.0
    strategies: tuple[str, ...] = ()
    review: bool = False


@dataclass
class ScenarioEvent:
    at_tick: int
    kind: str
    payload: dict
    line_no: int


@dataclass
class Scenario:
    sectors: list[str] = field(default_factory=list)
    config_overrides: dict[str, str] = field(default_factory=dict)
    sources: list[SourceDecl] = field(default_factory=list)
    filter_rules: list[tuple[FilterMode, FilterRule]] = field(default_factory=list)
    events: list[ScenarioEvent] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Parsing

def _split_event_line(rest: str, line_no: int) -> tuple[list[str], str | None]:
    """Whitespace-separated tokens plus an optional trailing quoted text."""
    tokens: list[str] = []
    text: str | None = None
    i = 0
    n = len(rest)
    while i < n:
        if rest[i].isspace():
            i += 1
            continue
        if rest[i] == '"':
            chars = []
            i += 1
            while i < n and rest[i] != '"':
                if rest[i] == "\\" and i + 1 < n and rest[i + 1] in ('"', "\\"):
                    chars.append(rest[i + 1])
                    i += 2
                else:
                    chars.append(rest[i])
                    i += 1
            if i >= n:
                raise ScenarioParseError("unterminated quoted text", line_no)
            i += 1
            if rest[i:].strip():
                raise ScenarioParseError("quoted text must end the line", line_no)
            text = "".join(chars)
            break
        start = i
        while i < n and not rest[i].isspace():
            i += 1
        tokens.append(rest[start:i])
    return tokens, text


def _kv(tokens: list[str], line_no: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for token in tokens:
        key, eq, value = token.partition("=")
        if not eq or not key:
            raise ScenarioParseError(f"expected key=value, got {token!r}", line_no)
        if key in out:
            raise ScenarioParseError(f"duplicate key {key}", line_no)
        out[key] = value
    return out


def _parse_bool(value: str, key: str, line_no: int) -> bool:
    if value in ("true", "1"):
        return True
    if value in ("false", "0"):
        return False
    raise ScenarioParseError(f"bad boolean for {key}: {value!r}", line_no)


def _parse_float(value: str, key: str, line_no: int, lo=0.0, hi=1.0) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ScenarioParseError(f"bad number for {key}: {value!r}", line_no) from None
    if not lo <= out <= hi:
        raise ScenarioParseError(f"{key} out of [{lo}, {hi}]: {value}", line_no)
    return out


def _parse_int(value: str, key: str, line_no: int, lo: int = 0) -> int:
    try:
        out = int(value)
    except ValueError:
        raise ScenarioParseError(f"bad integer for {key}: {value!r}", line_no) from None
    if out < lo:
        raise ScenarioParseError(f"{key} must be >= {lo}: {value}", line_no)
    return out


def _parse_assertion(value: str, line_no: int) -> Assertion:
    parts = value.split(":")
    if len(parts) != 3:
        raise ScenarioParseError(
            f"assertion must be topic:predicate:(+|-): {value!r}", line_no
        )
    topic, predicate, pol = parts
    try:
        return Assertion(topic, predicate, Polarity.from_token(pol))
    except ValueError as err:
        raise ScenarioParseError(str(err), line_no) from None


def _parse_coord(value: str, line_no: int) -> Coord:
    sector, _, k = value.partition("/")
    if not k:
        raise ScenarioParseError(f"coord must be sector/k: {value!r}", line_no)
    return Coord(sector, _parse_int(k, "k", line_no))


def _parse_matchspec(spec: str, rule_id: str, line_no: int) -> FilterRule:
    key, eq, value = spec.partition("=")
    if not eq:
        raise ScenarioParseError(f"bad matchspec: {spec!r}", line_no)
    try:
        if key == "topic":
            return FilterRule(rule_id=rule_id, topic_exact=value)
        if key == "text":
            return FilterRule(rule_id=rule_id, text_glob=value)
        if key == "assertion":
            a = _parse_assertion(value, line_no)
            return FilterRule(
                rule_id=rule_id,
                assertion_match=AssertionMatch(a.topic, a.predicate, a.polarity.value),
            )
    except ValueError as err:
        raise ScenarioParseError(str(err), line_no) from None
    raise ScenarioParseError(f"unknown matchspec key: {key!r}", line_no)


_FRAGMENT_KEYS = {
    "kind", "sector", "k", "anchor", "assertion", "pinned", "ttl", "fast_decay"
}


def _parse_fragment_payload(kv: dict[str, str], text: str | None, line_no: int) -> dict:
    if text is None:
        raise ScenarioParseError('fragment events need a trailing "text"', line_no)
    if "kind" not in kv or "sector" not in kv:
        raise ScenarioParseError("fragment events need kind= and sector=", line_no)
    try:
        kind = FragmentKind(kv["kind"])
    except ValueError:
        raise ScenarioParseError(f"unknown kind: {kv['kind']!r}", line_no) from None
    payload = {
        "text": text,
        "kind": kind,
        "sector": kv["sector"],
        "k": _parse_int(kv.get("k", "0"), "k", line_no),
        "anchor": _parse_float(kv.get("anchor", "0.5"), "anchor", line_no),
        "pinned": _parse_bool(kv.get("pinned", "false"), "pinned", line_no),
        "fast_decay": _parse_bool(kv.get("fast_decay", "false"), "fast_decay", line_no),
        "ttl": _parse_int(kv["ttl"], "ttl", line_no, lo=1) if "ttl" in kv else None,
        "assertion": _parse_assertion(kv["assertion"], line_no) if "assertion" in kv else None,
    }
    return payload


def _require_keys(kv: dict, allowed: set[str], line_no: int) -> None:
    unknown = set(kv) - allowed
    if unknown:
        raise ScenarioParseError(f"unknown keys: {', '.join(sorted(unknown))}", line_no)


def parse_scenario(script_text: str) -> Scenario:
    scenario = Scenario()
    in_prologue = True
    clock = 0
    for line_no, raw in enumerate(script_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        if not line.startswith("@"):
            if not in_prologue:
                raise ScenarioParseError("prologue line after first event", line_no)
            _parse_prologue_line(line, line_no, scenario)
            continue

        in_prologue = False
        head, _, rest = line.partition(" ")
        at_tick = _parse_int(head[1:], "tick marker", line_no)
        kind, _, rest = rest.strip().partition(" ")
        if kind not in EVENT_KINDS:
            raise ScenarioParseError(f"unknown event kind: {kind!r}", line_no)

        if at_tick != clock:
            raise ScenarioParseError(
                f"event at @{at_tick} but the clock reads {clock}", line_no
            )

        event = _parse_event(kind, rest, at_tick, line_no, scenario)
        scenario.events.append(event)
        if kind == "tick":
            clock += event.payload["count"]

    _validate_sector_references(scenario)
    return scenario


def _parse_prologue_line(line: str, line_no: int, scenario: Scenario) -> None:
    head, _, rest = line.partition(" ")
    rest = rest.strip()
    if head == "sector":
        if not rest or " " in rest:
            raise ScenarioParseError("sector takes exactly one name", line_no)
        scenario.sectors.append(rest)
    elif head == "config":
        key, eq, value = rest.partition("=")
        if not eq:
            raise ScenarioParseError("config takes key=value", line_no)
        scenario.config_overrides[key] = value
    elif head == "source":
        tokens = rest.split()
        if not tokens:
            raise ScenarioParseError("source needs an id", line_no)
        source_id, *opts = tokens
        decl = SourceDecl(source_id=source_id, token="")
        for opt in opts:
            if opt == "review":
                decl.review = True
                continue
            key, eq, value = opt.partition("=")
            if not eq:
                raise ScenarioParseError(f"bad source option: {opt!r}", line_no)
            if key == "token":
                decl.token = value
            elif key == "max_priority":
                decl.max_priority = _parse_float(value, key, line_no)
            elif key == "strategies":
                decl.strategies = tuple(value.split(","))
            else:
                raise ScenarioParseError(f"unknown source option: {key!r}", line_no)
        if not decl.token:
            raise ScenarioParseError("source needs token=", line_no)
        if not decl.strategies:
            raise ScenarioParseError("source needs strategies=", line_no)
        for name in decl.strategies:
            try:
                Strategy(name)
            except ValueError:
                raise ScenarioParseError(f"unknown strategy: {name!r}", line_no) from None
        scenario.sources.append(decl)
    elif head in ("whitelist", "blacklist"):
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise ScenarioParseError(f"{head} takes rule_id and matchspec", line_no)
        rule = _parse_matchspec(parts[1].strip(), parts[0], line_no)
        mode = FilterMode.WHITELIST if head == "whitelist" else FilterMode.BLACKLIST
        scenario.filter_rules.append((mode, rule))
    else:
        raise ScenarioParseError(f"unknown prologue directive: {head!r}", line_no)


def _parse_event(
    kind: str, rest: str, at_tick: int, line_no: int, scenario: Scenario
) -> ScenarioEvent:
    if kind == "expect":
        parts = rest.split()
        if len(parts) != 3:
            raise ScenarioParseError("expect takes: <metric> <cmp> <value>", line_no)
        metric, cmp, value = parts
        if metric not in EXPECT_METRICS:
            raise ScenarioParseError(f"unknown metric: {metric!r}", line_no)
        if cmp not in EXPECT_CMPS:
            raise ScenarioParseError(f"unknown comparator: {cmp!r}", line_no)
        try:
            expected = Decimal(value)
        except ArithmeticError:
            raise ScenarioParseError(f"bad decimal: {value!r}", line_no) from None
        payload = {"metric": metric, "cmp": cmp, "value": expected, "raw": rest.strip()}
        return ScenarioEvent(at_tick, kind, payload, line_no)

    tokens, text = _split_event_line(rest, line_no)
    kv = _kv(tokens, line_no)

    if kind == "perceive":
        _require_keys(kv, _FRAGMENT_KEYS | {"authority"}, line_no)
        payload = _parse_fragment_payload(kv, text, line_no)
        payload["authority"] = (
            _parse_float(kv["authority"], "authority", line_no) if "authority" in kv else None
        )
    elif kind == "inject":
        _require_keys(
            kv, _FRAGMENT_KEYS | {"strategy", "source", "priority", "target", "token"}, line_no
        )
        for required in ("strategy", "source", "priority"):
            if required not in kv:
                raise ScenarioParseError(f"inject needs {required}=", line_no)
        try:
            strategy = Strategy(kv["strategy"])
        except ValueError:
            raise ScenarioParseError(f"unknown strategy: {kv['strategy']!r}", line_no) from None
        payload = _parse_fragment_payload(kv, text, line_no)
        payload["strategy"] = strategy
        payload["source"] = kv["source"]
        payload["priority"] = _parse_float(kv["priority"], "priority", line_no)
        payload["target"] = _parse_coord(kv["target"], line_no) if "target" in kv else None
        payload["token"] = kv.get("token")
        # The request-level ttl override belongs to the temporal strategy.
        if strategy is Strategy.TEMPORAL and payload["ttl"] is None:
            raise ScenarioParseError("temporal inject needs ttl=", line_no)
    elif kind == "tick":
        _require_keys(kv, {"count"}, line_no)
        payload = {"count": _parse_int(kv.get("count", "1"), "count", line_no, lo=1)}
    elif kind == "reinforce":
        _require_keys(kv, {"id"}, line_no)
        payload = {"id": _parse_int(kv.get("id", ""), "id", line_no, lo=1)}
    elif kind == "retire":
        _require_keys(kv, {"id", "actor", "token"}, line_no)
        if "id" not in kv or "actor" not in kv:
            raise ScenarioParseError("retire needs id= and actor=", line_no)
        payload = {
            "id": _parse_int(kv["id"], "id", line_no, lo=1),
            "actor": kv["actor"],
            "token": kv.get("token"),
        }
    elif kind == "annihilate":
        _require_keys(kv, {"sector", "actor", "token"}, line_no)
        if "sector" not in kv or "actor" not in kv:
            raise ScenarioParseError("annihilate needs sector= and actor=", line_no)
        payload = {"sector": kv["sector"], "actor": kv["actor"], "token": kv.get("token")}
    elif kind == "reflect":
        _require_keys(kv, set(), line_no)
        payload = {}
    elif kind == "set_env":
        _require_keys(kv, {"key", "value"}, line_no)
        if "key" not in kv or "value" not in kv:
            raise ScenarioParseError("set_env needs key= and value=", line_no)
        payload = {"key": kv["key"], "value": kv["value"]}
    else:  # pragma: no cover - exhaustively matched above
        raise ScenarioParseError(f"unhandled event kind {kind}", line_no)

    if text is not None and kind not in ("perceive", "inject"):
        raise ScenarioParseError(f"{kind} takes no quoted text", line_no)
    return ScenarioEvent(at_tick, kind, payload, line_no)


def _validate_sector_references(scenario: Scenario) -> None:
    known = set(BUILTIN_SECTORS) | set(scenario.sectors)
    for event in scenario.events:
        refs = []
        if "sector" in event.payload and event.payload["sector"]:
            refs.append(event.payload["sector"])
        target = event.payload.get("target")
        if target is not None:
            refs.append(target.sector)
        for name in refs:
            if name not in known:
                raise UnknownSector(
                    f"line {event.line_no}: sector {name!r} not in the prologue"
                )


# ---------------------------------------------------------------------------
# Running

@dataclass
class RunResult:
    final_hash: str
    audit_document: str
    metrics_document: str
    expect_failures: list[str]
    engine: Engine

    @property
    def ok(self) -> bool:
        return not self.expect_failures


def build_engine(scenario: Scenario, base_config: EngineConfig | None = None) -> tuple[Engine, dict[str, str]]:
    """Engine per the prologue; returns it plus the source token table."""
    config = (base_config or EngineConfig()).updated(scenario.config_overrides)
    registry = SectorRegistry(tuple(scenario.sectors))
    engine = Engine(config, sectors=registry)
    tokens: dict[str, str] = {}
    for decl in scenario.sources:
        engine.register_source(
            decl.source_id,
            token=decl.token,
            max_priority=decl.max_priority,
            strategies=tuple(Strategy(s) for s in decl.strategies),
            can_review=decl.review,
        )
        tokens[decl.source_id] = decl.token
    for mode, rule in scenario.filter_rules:
        engine.add_rule(mode, rule)
    return engine, tokens


def _metric_value(engine: Engine, metric: str) -> Decimal:
    m = engine.metrics()
    if metric == "kappa":
        return Decimal(f"{m['kappa']:.6f}")
    if metric == "lambda":
        return Decimal(f"{m['lambda']:.6f}")
    if metric == "active_count":
        return Decimal(m["active"])
    return Decimal(m["pending"])


def _metrics_line(engine: Engine) -> str:
    m = engine.metrics()
    return f"{m['tick']} {m['kappa']:.6f} {m['lambda']:.6f} {m['active']} {m['pending']}"


def _blueprint_from_payload(payload: dict) -> FragmentBlueprint:
    return FragmentBlueprint(
        text=payload["text"],
        kind=payload["kind"],
        coord=Coord(payload["sector"], payload["k"]),
        assertion=payload["assertion"],
        anchor=payload["anchor"],
        pinned=payload["pinned"],
        ttl=payload["ttl"],
        fast_decay=payload["fast_decay"],
    )


def run_scenario(script_text: str, config: EngineConfig | None = None) -> RunResult:
    scenario = parse_scenario(script_text)
    engine, tokens = build_engine(scenario, config)
    failures: list[str] = []
    metrics_lines: list[str] = []

    for event in scenario.events:
        p = event.payload
        if event.kind == "tick":
            for _ in range(p["count"]):
                metrics_lines.append(_metrics_line(engine))
                engine.tick(1)
        elif event.kind == "perceive":
            engine.perceive(_blueprint_from_payload(p), authority=p["authority"])
        elif event.kind == "inject":
            request = InjectionRequest(
                strategy=p["strategy"],
                source=p["source"],
                priority=p["priority"],
                fragment=_blueprint_from_payload(p),
                ttl=p["ttl"] if p["strategy"] is Strategy.TEMPORAL else None,
                target=p["target"],
            )
            token = p["token"] if p["token"] is not None else tokens.get(p["source"], "")
            engine.submit(request, token)
        elif event.kind == "reinforce":
            engine.reinforce(p["id"])
        elif event.kind == "retire":
            token = p["token"] if p["token"] is not None else tokens.get(p["actor"], "")
            engine.retire(p["id"], p["actor"], token)
        elif event.kind == "annihilate":
            token = p["token"] if p["token"] is not None else tokens.get(p["actor"], "")
            engine.annihilate(p["sector"], p["actor"], token)
        elif event.kind == "reflect":
            engine.reflect()
        elif event.kind == "set_env":
            engine.set_env(p["key"], p["value"])
        elif event.kind == "expect":
            actual = _metric_value(engine, p["metric"])
            expected = p["value"]
            ok = (
                actual <= expected
                if p["cmp"] == "<="
                else actual >= expected
                if p["cmp"] == ">="
                else actual == expected
            )
            if not ok:
                failures.append(
                    f"line {event.line_no}: expect {p['raw']} failed (actual {actual})"
                )

    metrics_lines.append(_metrics_line(engine))
    final_hash = engine.hash()
    audit_document = engine.audit.document() + f"{FINAL_HASH_PREFIX}{final_hash}\n"
    metrics_document = METRICS_HEADER + "\n" + "\n".join(metrics_lines) + "\n"
    return RunResult(
        final_hash=final_hash,
        audit_document=audit_document,
        metrics_document=metrics_document,
        expect_failures=failures,
        engine=engine,
    )


def replay_check(
    audit_text: str, script_text: str, config: EngineConfig | None = None
) -> bool:
    """True iff re-running the script reproduces the audit document exactly."""
    result = run_scenario(script_text, config)
    return result.audit_document == audit_text
