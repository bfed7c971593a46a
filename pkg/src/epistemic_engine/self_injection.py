"""Self-injection demo: the engine correcting its own belief state.

Each tick the loop reflects, reads kappa out of the fresh meta report,
and if coherence sits below the configured floor it formulates a
correction against the weakest side of one conflicting pair and submits
it through the full safety pipeline under the reserved source `self`.
Nothing here has private write access: every attempted repair is an
ordinary vetted injection and lands in the audit log like any other.

Three canned seeds show the envelope. `conflict` carries one resolvable
contradiction and heals in a single attempt. `pinned` carries a
contradiction between two pinned fragments, so every attempt dies at the
guardrail until the per-run cap stops the loop. `healthy` never trips
the floor and produces zero attempts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import Engine
from .injection import InjectionRequest, Strategy
from .lifecycle import parse_meta_report
from .manifold import (
    Assertion,
    BeliefFragment,
    BeliefState,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    Polarity,
    Provenance,
    conflicting_pairs,
)
from .safety import Decision
from .scenario import FINAL_HASH_PREFIX, METRICS_HEADER

SELF_SOURCE = "self"
SELF_TOKEN = "self-corrective-loop"
MAX_ATTEMPTS_PER_TICK = 1
MAX_ATTEMPTS_PER_RUN = 10
DEFAULT_TICKS = 12

SEED_NAMES = ("conflict", "pinned", "healthy")


def _fragment(fid, text, kind, coord, assertion, anchor, *, pinned=False):
    return BeliefFragment(
        id=fid,
        text=text,
        kind=kind,
        coord=coord,
        assertion=assertion,
        anchor=1.0 if pinned else anchor,
        pinned=pinned,
        ttl=None,
        fast_decay=False,
        provenance=Provenance.perceived(),
        born_tick=0,
    )


def seed_state(name: str) -> BeliefState:
    """A pre-built belief state the loop starts from; conflicts are seeded
    directly because assimilation would never admit them."""
    if name == "conflict":
        fragments = (
            _fragment(
                1, "route a reads clear", FragmentKind.OBSERVATION,
                Coord("perc", 0), Assertion("route_a", "clear", Polarity.POSITIVE), 0.4,
            ),
            _fragment(
                2, "route a reads blocked", FragmentKind.OBSERVATION,
                Coord("perc", 0), Assertion("route_a", "clear", Polarity.NEGATIVE), 0.7,
            ),
            _fragment(
                3, "reach depot by dusk", FragmentKind.GOAL,
                Coord("plan", 1), Assertion("depot", "reached", Polarity.POSITIVE), 0.8,
            ),
        )
    elif name == "pinned":
        fragments = (
            _fragment(
                1, "doctrine: engage", FragmentKind.CONSTRAINT,
                Coord("ethics", 2), Assertion("engage", "permitted", Polarity.POSITIVE),
                1.0, pinned=True,
            ),
            _fragment(
                2, "doctrine: hold", FragmentKind.CONSTRAINT,
                Coord("ethics", 2), Assertion("engage", "permitted", Polarity.NEGATIVE),
                1.0, pinned=True,
            ),
        )
    elif name == "healthy":
        fragments = (
            _fragment(
                1, "sensor grid nominal", FragmentKind.OBSERVATION,
                Coord("perc", 0), Assertion("sensors", "nominal", Polarity.POSITIVE), 0.9,
            ),
            _fragment(
                2, "hold current course", FragmentKind.GOAL,
                Coord("plan", 1), Assertion("course", "held", Polarity.POSITIVE), 0.8,
            ),
        )
    else:
        raise ValueError(f"unknown seed: {name!r}")
    state = BeliefState.vacuum()
    return state.with_fragments(fragments)


@dataclass
class Attempt:
    tick: int
    target_id: int
    priority: float
    decision: str
    reasons: tuple[str, ...]


@dataclass
class SelfInjectionResult:
    seed: str
    attempts: list[Attempt] = field(default_factory=list)
    final_kappa: float = 1.0
    final_hash: str = ""
    audit_document: str = ""
    metrics_document: str = ""
    engine: Engine | None = None

    @property
    def admitted_count(self) -> int:
        return sum(1 for a in self.attempts if a.decision == Decision.ADMITTED.value)

    @property
    def rejected_count(self) -> int:
        return sum(1 for a in self.attempts if a.decision != Decision.ADMITTED.value)


def _weakest_conflicted(state: BeliefState) -> BeliefFragment | None:
    conflicted: dict[int, BeliefFragment] = {}
    for left, right in conflicting_pairs(state):
        conflicted[left.id] = left
        conflicted[right.id] = right
    if not conflicted:
        return None
    return min(conflicted.values(), key=lambda f: (f.anchor, f.id))


def _correction_for(loser: BeliefFragment, config: EngineConfig) -> InjectionRequest:
    assertion = loser.assertion
    assert assertion is not None
    counter = Assertion(
        assertion.topic,
        assertion.predicate,
        Polarity.NEGATIVE if assertion.polarity is Polarity.POSITIVE else Polarity.POSITIVE,
    )
    priority = min(1.0, loser.anchor + config.authority_epsilon + 0.05)
    blueprint = FragmentBlueprint(
        text=f"correction: {assertion.topic} {assertion.predicate} "
        f"is {counter.polarity.value}",
        kind=FragmentKind.CORRECTION,
        coord=loser.coord,
        assertion=counter,
        anchor=priority,
    )
    return InjectionRequest(
        strategy=Strategy.DIRECT,
        source=SELF_SOURCE,
        priority=priority,
        fragment=blueprint,
    )


def _metrics_line(engine: Engine) -> str:
    m = engine.metrics()
    return f"{m['tick']} {m['kappa']:.6f} {m['lambda']:.6f} {m['active']} {m['pending']}"


def run_self_injection(
    seed: str, config: EngineConfig | None = None, ticks: int = DEFAULT_TICKS
) -> SelfInjectionResult:
    config = config or EngineConfig()
    engine = Engine(config)
    engine.register_source(
        SELF_SOURCE,
        token=SELF_TOKEN,
        max_priority=1.0,
        strategies=(Strategy.DIRECT,),
        can_review=False,
    )
    engine.state = seed_state(seed)
    result = SelfInjectionResult(seed=seed, engine=engine)
    metrics_lines: list[str] = []

    for _ in range(ticks):
        reflection = engine.reflect()
        kappa = None
        if reflection.report_id is not None:
            report = engine.state.get(reflection.report_id)
            kappa = float(parse_meta_report(report.text)["kappa"])
        if (
            kappa is not None
            and kappa < config.kappa_floor
            and len(result.attempts) < MAX_ATTEMPTS_PER_RUN
        ):
            loser = _weakest_conflicted(engine.state)
            if loser is not None:
                request = _correction_for(loser, config)
                record = engine.submit(request, SELF_TOKEN)
                result.attempts.append(
                    Attempt(
                        tick=engine.state.tick,
                        target_id=loser.id,
                        priority=request.priority,
                        decision=record.decision.value,
                        reasons=record.reason_codes,
                    )
                )
        metrics_lines.append(_metrics_line(engine))
        engine.tick(1)

    metrics_lines.append(_metrics_line(engine))
    result.final_kappa = engine.metrics()["kappa"]
    result.final_hash = engine.hash()
    result.audit_document = engine.audit.document() + f"{FINAL_HASH_PREFIX}{result.final_hash}\n"
    result.metrics_document = METRICS_HEADER + "\n" + "\n".join(metrics_lines) + "\n"
    return result


def render_summary(result: SelfInjectionResult) -> str:
    lines = [
        f"seed={result.seed} attempts={len(result.attempts)} "
        f"admitted={result.admitted_count} rejected={result.rejected_count} "
        f"final_kappa={result.final_kappa:.6f}",
    ]
    for attempt in result.attempts:
        reasons = ",".join(attempt.reasons) or "-"
        lines.append(
            f"  tick={attempt.tick} target={attempt.target_id} "
            f"priority={attempt.priority:.2f} decision={attempt.decision} "
            f"reasons={reasons}"
        )
    lines.append(f"final_hash={result.final_hash}")
    return "\n".join(lines) + "\n"
