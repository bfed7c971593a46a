"""Assimilation: the only path by which fragments enter a belief state.

Admission runs a fixed sequence: conflict scan, corrective resolution,
capacity check, admit, then elaboration rules. Resolution is all-or-nothing;
a rejected candidate leaves the state untouched, including any retractions
it would have caused. Shadow assimilation reuses the same code path and
reports what would happen without publishing the new state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import LayerOutOfRange
from .manifold import (
    BeliefFragment,
    BeliefState,
    EngineConfig,
    FragmentBlueprint,
    FragmentStatus,
    Provenance,
    SectorRegistry,
    coherence,
    load,
)

REASON_CONFLICT_WITH_PINNED = "conflict_with_pinned"
REASON_AUTHORITY_TOO_LOW = "authority_too_low"
REASON_CAPACITY_EXCEEDED = "capacity_exceeded"


@dataclass(frozen=True)
class ElaborationRule:
    """Derives higher-abstraction fragments from a newly admitted one.

    Products must stay in the parent's sector at strictly greater k. They are
    admitted with the parent's authority and never trigger further rules.
    """

    name: str
    match: Callable[[BeliefFragment, BeliefState], bool]
    produce: Callable[[BeliefFragment], Sequence[FragmentBlueprint]]


@dataclass
class AssimilationOutcome:
    admitted: bool
    state: BeliefState
    fragment_id: int | None = None
    admitted_ids: list[int] = field(default_factory=list)
    elaborated_ids: list[int] = field(default_factory=list)
    retracted_ids: list[int] = field(default_factory=list)
    reason: str | None = None
    kappa: float = 1.0
    load: float = 0.0


@dataclass(frozen=True)
class ShadowReport:
    would_admit: bool
    reason: str | None
    predicted_kappa: float
    predicted_load: float
    retracted_ids: tuple[int, ...]


def _rejected(state: BeliefState, reason: str) -> AssimilationOutcome:
    return AssimilationOutcome(
        admitted=False,
        state=state,
        reason=reason,
        kappa=coherence(state),
        load=load(state),
    )


def _admit_one(
    state: BeliefState,
    blueprint: FragmentBlueprint,
    authority: float,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
) -> AssimilationOutcome:
    """Single-fragment admission: scan, resolve, capacity, admit."""
    sectors.check_coord(blueprint.coord, config.k_max)
    if not 0.0 <= authority <= 1.0:
        raise ValueError(f"authority out of [0, 1]: {authority}")

    conflicting: list[BeliefFragment] = []
    if blueprint.assertion is not None:
        conflicting = [
            f for f in state.iter_active()
            if f.assertion is not None and f.assertion.opposes(blueprint.assertion)
        ]

    if any(f.pinned for f in conflicting):
        return _rejected(state, REASON_CONFLICT_WITH_PINNED)
    eps = config.authority_epsilon
    if any(authority <= f.anchor + eps for f in conflicting):
        # Ties within epsilon are rejected along with plainly weaker authority.
        return _rejected(state, REASON_AUTHORITY_TOO_LOW)

    active_after = sum(1 for _ in state.iter_active()) - len(conflicting)
    if active_after + 1 > config.capacity:
        return _rejected(state, REASON_CAPACITY_EXCEEDED)

    retracted = [f.with_status(FragmentStatus.RETRACTED) for f in conflicting]
    fragment = BeliefFragment(
        id=state.next_id,
        text=blueprint.text,
        kind=blueprint.kind,
        coord=blueprint.coord,
        assertion=blueprint.assertion,
        anchor=blueprint.anchor,
        pinned=blueprint.pinned,
        ttl=blueprint.ttl,
        fast_decay=blueprint.fast_decay,
        provenance=blueprint.provenance or Provenance.perceived(),
        born_tick=state.tick,
    )
    new_state = state.with_fragments(retracted + [fragment])
    return AssimilationOutcome(
        admitted=True,
        state=new_state,
        fragment_id=fragment.id,
        admitted_ids=[fragment.id],
        retracted_ids=sorted(f.id for f in retracted),
        kappa=coherence(new_state),
        load=load(new_state),
    )


def assimilate(
    state: BeliefState,
    blueprint: FragmentBlueprint,
    authority: float,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> AssimilationOutcome:
    """Admit `blueprint` with `authority`, then run elaboration rules once.

    Raises UnknownSector / LayerOutOfRange for structurally invalid coords.
    Semantic refusals (pinned conflict, weak authority, capacity) come back
    as a rejected outcome with the state unchanged.
    """
    outcome = _admit_one(state, blueprint, authority, config=config, sectors=sectors)
    if not outcome.admitted:
        return outcome

    current = outcome.state
    primary = current.fragments[outcome.fragment_id]  # type: ignore[index]
    for rule in rules:
        if not rule.match(primary, current):
            continue
        for product in rule.produce(primary):
            if product.coord.sector != primary.coord.sector:
                raise ValueError(
                    f"elaboration rule {rule.name} changed sector: "
                    f"{primary.coord.sector} -> {product.coord.sector}"
                )
            if product.coord.k <= primary.coord.k:
                raise ValueError(
                    f"elaboration rule {rule.name} must raise abstraction: "
                    f"k={product.coord.k} <= parent k={primary.coord.k}"
                )
            if product.coord.k > config.k_max:
                raise LayerOutOfRange(
                    f"elaboration product k={product.coord.k} exceeds k_max={config.k_max}"
                )
            stamped = FragmentBlueprint(
                text=product.text,
                kind=product.kind,
                coord=product.coord,
                assertion=product.assertion,
                anchor=product.anchor,
                pinned=product.pinned,
                ttl=product.ttl,
                fast_decay=product.fast_decay,
                provenance=Provenance.elaborated(primary.id),
            )
            sub = _admit_one(current, stamped, authority, config=config, sectors=sectors)
            if sub.admitted:
                # Products that fail admission are dropped without complaint.
                current = sub.state
                outcome.elaborated_ids.extend(sub.admitted_ids)
                outcome.admitted_ids.extend(sub.admitted_ids)
                outcome.retracted_ids.extend(sub.retracted_ids)

    outcome.state = current
    outcome.retracted_ids = sorted(set(outcome.retracted_ids))
    outcome.kappa = coherence(current)
    outcome.load = load(current)
    return outcome


def shadow_assimilate(
    state: BeliefState,
    blueprint: FragmentBlueprint,
    authority: float,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    rules: Sequence[ElaborationRule] = (),
) -> ShadowReport:
    """Predict the outcome of assimilation without publishing it.

    States are immutable, so running the real thing and discarding the
    result state is both safe and guaranteed to agree with a later admit.
    """
    outcome = assimilate(
        state, blueprint, authority, config=config, sectors=sectors, rules=rules
    )
    return ShadowReport(
        would_admit=outcome.admitted,
        reason=outcome.reason,
        predicted_kappa=outcome.kappa,
        predicted_load=outcome.load,
        retracted_ids=tuple(outcome.retracted_ids),
    )
