"""Belief lifecycle: tick progression and operator-driven state surgery.

A tick advances the clock and applies, in order: TTL expiry, anchor decay,
nullification. Expiry runs first so a fragment never decays on the tick it
leaves; nullification compares the freshly decayed anchor against the
threshold. Within each phase fragments are visited in id order, which is
what makes runs reproducible.

Reflection is the engine taking stock of itself: it measures the current
state and assimilates a meta report describing those measurements. The
report carries no assertion so that reflection never perturbs coherence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assimilation import AssimilationOutcome, assimilate
from .errors import NotActive, UnknownFragment
from .manifold import (
    BeliefFragment,
    BeliefState,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    FragmentStatus,
    Provenance,
    SectorRegistry,
    coherence,
    load,
)

META_REPORT_ANCHOR = 0.5


@dataclass
class TickReport:
    tick: int
    expired_ids: list[int] = field(default_factory=list)
    decayed: list[tuple[int, float, float]] = field(default_factory=list)
    nullified_ids: list[int] = field(default_factory=list)
    kappa: float = 1.0
    load: float = 0.0


def tick(state: BeliefState, *, config: EngineConfig) -> tuple[BeliefState, TickReport]:
    new_tick = state.tick + 1
    report = TickReport(tick=new_tick)
    updated = []

    survivors = []
    for f in state.iter_active():
        if f.ttl is not None and new_tick - f.born_tick > f.ttl:
            updated.append(f.with_status(FragmentStatus.EXPIRED))
            report.expired_ids.append(f.id)
        else:
            survivors.append(f)

    for f in survivors:
        if f.pinned:
            continue
        rate = config.fast_decay if f.fast_decay else config.decay_rate
        new_anchor = f.anchor * rate
        report.decayed.append((f.id, f.anchor, new_anchor))
        f = f.with_anchor(new_anchor)
        if new_anchor < config.null_threshold:
            f = f.with_status(FragmentStatus.NULLIFIED)
            report.nullified_ids.append(f.id)
        updated.append(f)

    new_state = state.with_fragments(updated).at_tick(new_tick)
    report.kappa = coherence(new_state)
    report.load = load(new_state)
    return new_state, report


def reinforce(state: BeliefState, fragment_id: int, *, config: EngineConfig) -> BeliefState:
    f = state.get(fragment_id)
    if f is None:
        raise UnknownFragment(f"no fragment with id {fragment_id}")
    if not f.active:
        raise NotActive(f"fragment {fragment_id} is {f.status.value}")
    return state.with_fragment(f.with_anchor(min(1.0, f.anchor + config.reinforce_step)))


def retire(state: BeliefState, fragment_id: int) -> tuple[BeliefState, BeliefFragment]:
    f = state.get(fragment_id)
    if f is None:
        raise UnknownFragment(f"no fragment with id {fragment_id}")
    if not f.active:
        raise NotActive(f"fragment {fragment_id} is {f.status.value}")
    retired = f.with_status(FragmentStatus.RETRACTED)
    return state.with_fragment(retired), retired


def annihilate_sector(
    state: BeliefState, sector: str, *, sectors: SectorRegistry
) -> tuple[BeliefState, list[int]]:
    """Clear every active fragment in a sector, pinned ones included."""
    sectors.require(sector)
    cleared = [
        f.with_status(FragmentStatus.ANNIHILATED)
        for f in state.iter_active()
        if f.coord.sector == sector
    ]
    return state.with_fragments(cleared), [f.id for f in cleared]


@dataclass
class ReflectResult:
    state: BeliefState
    report_id: int | None
    outcome: AssimilationOutcome


def meta_report_text(state: BeliefState, sectors: SectorRegistry) -> str:
    """Measurements as space-separated key=value tokens, registry order."""
    counts = {name: 0 for name in sectors.names()}
    for f in state.iter_active():
        counts[f.coord.sector] = counts.get(f.coord.sector, 0) + 1
    parts = [f"kappa={coherence(state):.6f}", f"lambda={int(load(state))}"]
    parts.extend(f"active.{name}={counts[name]}" for name in sectors.names())
    return " ".join(parts)


def parse_meta_report(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for token in text.split():
        key, _, value = token.partition("=")
        out[key] = value
    return out


def reflect(
    state: BeliefState,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    layer: int = 1,
) -> ReflectResult:
    """Measure the state, then assimilate a meta report of the measurements.

    Measurement happens before admission, so the report describes the state
    it was born into, not itself. Carries no assertion by design.
    """
    blueprint = FragmentBlueprint(
        text=meta_report_text(state, sectors),
        kind=FragmentKind.META_REPORT,
        coord=Coord("refl", layer),
        anchor=META_REPORT_ANCHOR,
        provenance=Provenance.reflected(),
    )
    outcome = assimilate(state, blueprint, 1.0, config=config, sectors=sectors)
    return ReflectResult(
        state=outcome.state,
        report_id=outcome.fragment_id if outcome.admitted else None,
        outcome=outcome,
    )
