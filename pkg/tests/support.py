"""Shared builders for tests: handmade fragments, states, and random cases.

Random generators take an explicit random.Random so every test run is
seeded and reproducible. Generated states satisfy the model invariants
(unique ids, pinned implies anchor 1.0, consistent next_id).
"""

from __future__ import annotations

import random

from epistemic_engine import (
    Assertion,
    BeliefFragment,
    BeliefState,
    Coord,
    Engine,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    FragmentStatus,
    GuardrailMode,
    InjectionRequest,
    Polarity,
    Provenance,
    SectorRegistry,
    Strategy,
)

FROZEN_VACUUM_HASH = "4d5eddd6c2330881e68526d5b0ea56bcae3a2c3e5ea9caa9d08fdb77e8ee583c"

TOPICS = ("route_a", "sensor_x", "resource_z", "trading", "region_x", "maze")
PREDICATES = ("safe", "available", "reading_ok", "explore", "viable")
SECTOR_POOL = ("perc", "plan", "mem", "refl", "know", "ethics")
KINDS = (
    FragmentKind.OBSERVATION,
    FragmentKind.GOAL,
    FragmentKind.CONSTRAINT,
    FragmentKind.CORRECTION,
    FragmentKind.HEURISTIC,
)


def mk_assert(topic="route_a", predicate="safe", polarity="+", params=()):
    return Assertion(
        topic=topic,
        predicate=predicate,
        polarity=Polarity.from_token(polarity),
        params=tuple(params),
    )


def mk_bp(
    text="A belief.",
    kind=FragmentKind.OBSERVATION,
    sector="know",
    k=0,
    assertion=None,
    anchor=0.5,
    pinned=False,
    ttl=None,
    fast_decay=False,
    provenance=None,
):
    return FragmentBlueprint(
        text=text,
        kind=kind,
        coord=Coord(sector, k),
        assertion=assertion,
        anchor=anchor,
        pinned=pinned,
        ttl=ttl,
        fast_decay=fast_decay,
        provenance=provenance,
    )


def mk_fragment(
    fid,
    text="A belief.",
    kind=FragmentKind.OBSERVATION,
    sector="know",
    k=0,
    assertion=None,
    anchor=0.5,
    pinned=False,
    ttl=None,
    fast_decay=False,
    provenance=None,
    born_tick=0,
    status=FragmentStatus.ACTIVE,
):
    return BeliefFragment(
        id=fid,
        text=text,
        kind=kind,
        coord=Coord(sector, k),
        assertion=assertion,
        anchor=1.0 if pinned else anchor,
        pinned=pinned,
        ttl=ttl,
        fast_decay=fast_decay,
        provenance=provenance or Provenance.perceived(),
        born_tick=born_tick,
        status=status,
    )


def mk_state(*fragments, tick=0):
    state = BeliefState.vacuum().at_tick(tick)
    return state.with_fragments(list(fragments))


def mk_request(
    strategy=Strategy.DIRECT,
    source="ops",
    priority=0.9,
    fragment=None,
    ttl=None,
    target=None,
    **bp_kwargs,
):
    return InjectionRequest(
        strategy=strategy,
        source=source,
        priority=priority,
        fragment=fragment if fragment is not None else mk_bp(**bp_kwargs),
        ttl=ttl,
        target=target,
    )


def random_assertion(rng: random.Random) -> Assertion:
    return Assertion(
        topic=rng.choice(TOPICS),
        predicate=rng.choice(PREDICATES),
        polarity=rng.choice((Polarity.POSITIVE, Polarity.NEGATIVE)),
    )


def random_state(rng: random.Random, max_fragments=8, k_max=4) -> BeliefState:
    n = rng.randint(0, max_fragments)
    fragments = []
    for fid in range(1, n + 1):
        pinned = rng.random() < 0.15
        fragments.append(
            mk_fragment(
                fid,
                text=f"Generated belief {fid}.",
                kind=rng.choice(KINDS),
                sector=rng.choice(SECTOR_POOL),
                k=rng.randint(0, k_max),
                assertion=random_assertion(rng) if rng.random() < 0.8 else None,
                anchor=round(rng.random(), 3),
                pinned=pinned,
                ttl=rng.choice((None, None, None, 2, 5)),
                status=FragmentStatus.ACTIVE
                if rng.random() < 0.85
                else rng.choice((FragmentStatus.RETRACTED, FragmentStatus.EXPIRED)),
            )
        )
    return mk_state(*fragments, tick=rng.randint(0, 6))


def random_blueprint(rng: random.Random, k_max=4) -> FragmentBlueprint:
    return mk_bp(
        text=f"Candidate belief {rng.randint(1, 999)}.",
        kind=rng.choice(KINDS),
        sector=rng.choice(SECTOR_POOL),
        k=rng.randint(0, k_max),
        assertion=random_assertion(rng) if rng.random() < 0.8 else None,
        anchor=round(rng.random(), 3),
        pinned=rng.random() < 0.1,
        ttl=rng.choice((None, None, 3)),
    )


def std_engine(config: EngineConfig | None = None, **source_kwargs) -> Engine:
    """Engine with one all-strategies source `ops` (token `ops-token`)."""
    engine = Engine(config or EngineConfig())
    kwargs = dict(
        token="ops-token",
        max_priority=1.0,
        strategies=tuple(Strategy),
        can_review=True,
    )
    kwargs.update(source_kwargs)
    engine.register_source("ops", **kwargs)
    return engine


def seeded_drop_engine(**cfg_overrides) -> Engine:
    """Engine at kappa 0.75 where a winning route_a correction crashes kappa
    to 0, tripping the coherence guardrail. The standing sensor_x conflict is
    only reachable through naive injection. Flag mode by default; a reviewer
    source `reviewer` (token `rev-token`) is registered."""
    cfg_kwargs = dict(
        guardrail_mode=GuardrailMode.FLAG_FOR_REVIEW,
        kappa_floor=0.0,
        kappa_drop_max=0.1,
        allow_naive=True,
    )
    cfg_kwargs.update(cfg_overrides)
    engine = std_engine(EngineConfig(**cfg_kwargs))
    engine.register_source(
        "reviewer", token="rev-token", max_priority=1.0, strategies=(), can_review=True
    )
    for _ in range(3):
        engine.perceive(mk_bp(assertion=mk_assert("route_a", "safe", "+"), anchor=0.2))
    for polarity in ("+", "-"):
        engine.submit(
            mk_request(
                strategy=Strategy.NAIVE,
                assertion=mk_assert("sensor_x", "reading_ok", polarity),
                anchor=0.2,
            ),
            "ops-token",
        )
    return engine
