"""Injection strategies: how external content is offered to a belief state.

Every strategy except naive funnels through assimilation, so admission
control is identical across them; strategies differ only in coordinate
forcing, context gating, and side effects. Naive is the documented unsafe
baseline: a literal union with no vetting, available only behind a config
flag and never exposed over the control service.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Protocol, Sequence

from . import lifecycle
from .assimilation import AssimilationOutcome, ElaborationRule, assimilate
from .errors import MissingTarget, MissingTtl, NaiveDisabled, WrongKind
from .manifold import (
    BeliefFragment,
    BeliefState,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    Provenance,
    SectorRegistry,
    coherence,
    load,
)


class Strategy(Enum):
    NAIVE = "naive"
    DIRECT = "direct"
    CONTEXT_AWARE = "context_aware"
    GOAL_ORIENTED = "goal_oriented"
    REFLECTIVE = "reflective"
    TEMPORAL = "temporal"
    SECTOR_TARGETED = "sector_targeted"


# Kinds that are always relevant regardless of goal topics.
ALWAYS_RELEVANT_KINDS = frozenset(
    {FragmentKind.CONSTRAINT, FragmentKind.CORRECTION, FragmentKind.REFLECTIVE_PROMPT}
)

BLOCK_IRRELEVANT = "irrelevant"
BLOCK_OVER_CAPACITY = "over_capacity"
BLOCK_CONFLICTS_WITH_ANCHORED = "conflicts_with_anchored"
BLOCK_BAD_TARGET = "bad_target"

NOTE_GOAL_REFINED = "goal_refined"


@dataclass(frozen=True)
class InjectionRequest:
    strategy: Strategy
    source: str
    priority: float
    fragment: FragmentBlueprint
    ttl: int | None = None          # temporal only
    target: Coord | None = None     # sector_targeted only

    def __post_init__(self) -> None:
        if not 0.0 <= self.priority <= 1.0:
            raise ValueError(f"priority out of [0, 1]: {self.priority}")
        if self.ttl is not None and self.ttl < 1:
            raise ValueError(f"ttl must be >= 1: {self.ttl}")
        if not self.source:
            raise ValueError("source must be non-empty")


@dataclass(frozen=True)
class ContextSnapshot:
    """What the gating predicate is allowed to see about the moment."""

    active_goal_topics: frozenset[str]
    load: float
    kappa: float
    env: tuple[tuple[str, str], ...] = ()

    @classmethod
    def from_state(cls, state: BeliefState, env: dict[str, str] | None = None) -> "ContextSnapshot":
        topics = frozenset(
            f.assertion.topic
            for f in state.iter_active()
            if f.kind is FragmentKind.GOAL and f.assertion is not None
        )
        return cls(
            active_goal_topics=topics,
            load=load(state),
            kappa=coherence(state),
            env=tuple(sorted((env or {}).items())),
        )


@dataclass(frozen=True)
class AppropriateResult:
    ok: bool
    blocked: tuple[str, ...] = ()


@dataclass
class InjectionResult:
    """What a strategy did: an assimilation outcome, or a deferral."""

    state: BeliefState
    outcome: AssimilationOutcome | None = None
    deferred: bool = False
    reasons: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def admitted(self) -> bool:
        return self.outcome is not None and self.outcome.admitted


class PolicyDecision(Enum):
    PROCEED = "proceed"
    DEFER = "defer"
    DROP = "drop"


class InjectionPolicy(Protocol):
    """Pluggable gate consulted before the safety pipeline; default proceeds.

    Implementations decide per request; learning-based policies plug in here
    without any engine change.
    """

    def decide(
        self, state: BeliefState, ctx: ContextSnapshot, request: InjectionRequest
    ) -> PolicyDecision: ...


def effective_blueprint(request: InjectionRequest) -> FragmentBlueprint:
    """Blueprint after strategy coordinate forcing and provenance stamping."""
    bp = request.fragment
    if request.strategy is Strategy.GOAL_ORIENTED:
        bp = replace(bp, coord=Coord("plan", bp.coord.k))
    elif request.strategy is Strategy.REFLECTIVE:
        bp = replace(bp, coord=Coord("refl", bp.coord.k))
    elif request.strategy is Strategy.SECTOR_TARGETED and request.target is not None:
        bp = replace(bp, coord=request.target)
    if request.strategy is Strategy.TEMPORAL and request.ttl is not None:
        bp = replace(bp, ttl=request.ttl)
    return replace(bp, provenance=Provenance.injected(request.source))


def appropriate(
    state: BeliefState,
    ctx: ContextSnapshot,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
) -> AppropriateResult:
    """Four-clause gate for context-aware injection; collects every failure."""
    bp = effective_blueprint(request)
    blocked: list[str] = []

    relevant = bp.kind in ALWAYS_RELEVANT_KINDS or (
        bp.assertion is not None and bp.assertion.topic in ctx.active_goal_topics
    )
    if not relevant:
        blocked.append(BLOCK_IRRELEVANT)

    if ctx.load + 1 > config.capacity:
        blocked.append(BLOCK_OVER_CAPACITY)

    if request.priority < 1.0 and bp.assertion is not None:
        # Full-priority requests may challenge anchored beliefs; others defer.
        clash = any(
            f.assertion is not None
            and f.assertion.opposes(bp.assertion)
            and f.anchor >= config.high_anchor_band
            for f in state.iter_active()
        )
        if clash:
            blocked.append(BLOCK_CONFLICTS_WITH_ANCHORED)

    if bp.coord.sector not in sectors or not 0 <= bp.coord.k <= config.k_max:
        blocked.append(BLOCK_BAD_TARGET)

    return AppropriateResult(ok=not blocked, blocked=tuple(blocked))


def inject_naive(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
) -> tuple[BeliefState, int]:
    """Unsafe union: no conflict scan, no capacity check, no elaboration."""
    if not config.allow_naive:
        raise NaiveDisabled("naive injection requires allow_naive=true")
    bp = effective_blueprint(request)
    sectors.check_coord(bp.coord, config.k_max)
    fragment = BeliefFragment(
        id=state.next_id,
        text=bp.text,
        kind=bp.kind,
        coord=bp.coord,
        assertion=bp.assertion,
        anchor=bp.anchor,
        pinned=bp.pinned,
        ttl=bp.ttl,
        fast_decay=bp.fast_decay,
        provenance=bp.provenance or Provenance.injected(request.source),
        born_tick=state.tick,
    )
    return state.with_fragment(fragment), fragment.id


def inject_direct(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    bp = effective_blueprint(request)
    outcome = assimilate(
        state, bp, request.priority, config=config, sectors=sectors, rules=rules
    )
    return InjectionResult(state=outcome.state, outcome=outcome)


def inject_context_aware(
    state: BeliefState,
    ctx: ContextSnapshot,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    gate = appropriate(state, ctx, request, config=config, sectors=sectors)
    if not gate.ok:
        return InjectionResult(state=state, deferred=True, reasons=list(gate.blocked))
    return inject_direct(state, request, config=config, sectors=sectors, rules=rules)


def inject_goal_oriented(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    if request.fragment.kind not in (FragmentKind.GOAL, FragmentKind.CONSTRAINT):
        raise WrongKind("goal_oriented accepts only goal or constraint fragments")
    bp = effective_blueprint(request)

    notes: list[str] = []
    if bp.kind is FragmentKind.GOAL and bp.assertion is not None and not bp.pinned:
        kin = [
            f.anchor
            for f in state.iter_active()
            if f.kind is FragmentKind.GOAL
            and f.assertion is not None
            and f.assertion.topic == bp.assertion.topic
        ]
        if kin:
            elevated = min(1.0, max(bp.anchor, max(kin) + config.reinforce_step))
            bp = replace(bp, anchor=elevated)
            notes.append(NOTE_GOAL_REFINED)

    outcome = assimilate(
        state, bp, request.priority, config=config, sectors=sectors, rules=rules
    )
    return InjectionResult(
        state=outcome.state,
        outcome=outcome,
        notes=notes if outcome.admitted else [],
    )


def inject_reflective(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    if request.fragment.kind is not FragmentKind.REFLECTIVE_PROMPT:
        raise WrongKind("reflective accepts only reflective_prompt fragments")
    bp = effective_blueprint(request)
    outcome = assimilate(
        state, bp, request.priority, config=config, sectors=sectors, rules=rules
    )
    if not outcome.admitted:
        return InjectionResult(state=outcome.state, outcome=outcome)

    # The prompt lands, then the engine takes stock: a reflection pass writes
    # its report one abstraction level above the prompt.
    report_layer = min(bp.coord.k + 1, config.k_max)
    reflected = lifecycle.reflect(
        outcome.state, config=config, sectors=sectors, layer=report_layer
    )
    if reflected.report_id is not None:
        outcome.state = reflected.state
        outcome.elaborated_ids.append(reflected.report_id)
        outcome.admitted_ids.append(reflected.report_id)
        outcome.kappa = coherence(reflected.state)
        outcome.load = load(reflected.state)
    return InjectionResult(state=outcome.state, outcome=outcome)


def inject_temporal(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    if request.ttl is None and request.fragment.ttl is None:
        raise MissingTtl("temporal injection requires a ttl")
    return inject_direct(state, request, config=config, sectors=sectors, rules=rules)


def inject_sector_targeted(
    state: BeliefState,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    if request.target is None:
        raise MissingTarget("sector_targeted injection requires a target coord")
    return inject_direct(state, request, config=config, sectors=sectors, rules=rules)


def dispatch(
    state: BeliefState,
    ctx: ContextSnapshot,
    request: InjectionRequest,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> InjectionResult:
    """Route a request to its strategy. Naive is handled upstream, never here."""
    if request.strategy is Strategy.DIRECT:
        return inject_direct(state, request, config=config, sectors=sectors, rules=rules)
    if request.strategy is Strategy.CONTEXT_AWARE:
        return inject_context_aware(
            state, ctx, request, config=config, sectors=sectors, rules=rules
        )
    if request.strategy is Strategy.GOAL_ORIENTED:
        return inject_goal_oriented(
            state, request, config=config, sectors=sectors, rules=rules
        )
    if request.strategy is Strategy.REFLECTIVE:
        return inject_reflective(
            state, request, config=config, sectors=sectors, rules=rules
        )
    if request.strategy is Strategy.TEMPORAL:
        return inject_temporal(
            state, request, config=config, sectors=sectors, rules=rules
        )
    if request.strategy is Strategy.SECTOR_TARGETED:
        return inject_sector_targeted(
            state, request, config=config, sectors=sectors, rules=rules
        )
    raise NaiveDisabled("naive injection never reaches strategy dispatch")
