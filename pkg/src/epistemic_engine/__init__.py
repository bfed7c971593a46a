"""Embeddable belief-state engine.

Belief fragments live at (sector, abstraction-level) coordinates and change
only through assimilation. Injection strategies, a safety pipeline, a
lifecycle clock, a deterministic scenario harness, and an HTTP control
service are layered on top of that single admission path.
"""

from .assimilation import (
    AssimilationOutcome,
    ElaborationRule,
    ShadowReport,
    assimilate,
    shadow_assimilate,
)
from .engine import Engine
from .injection import (
    AppropriateResult,
    ContextSnapshot,
    InjectionPolicy,
    InjectionRequest,
    InjectionResult,
    PolicyDecision,
    Strategy,
    appropriate,
)
from .manifold import (
    Assertion,
    BeliefFragment,
    BeliefState,
    Coord,
    EngineConfig,
    FragmentBlueprint,
    FragmentKind,
    FragmentStatus,
    GuardrailMode,
    Polarity,
    Provenance,
    SectorRegistry,
    canonical_document,
    coherence,
    load,
    query,
    state_hash,
)
from .safety import (
    AuditLog,
    AuditRecord,
    Decision,
    FilterMode,
    FilterRule,
    PendingQueue,
    RuleSet,
    SourceRegistry,
    VetResult,
    vet,
)
from .scenario import (
    RunResult,
    Scenario,
    parse_scenario,
    replay_check,
    run_scenario,
)
from .self_injection import (
    SEED_NAMES,
    SelfInjectionResult,
    run_self_injection,
    seed_state,
)

__version__ = "0.1.0"

__all__ = [
    "AppropriateResult",
    "Assertion",
    "AssimilationOutcome",
    "AuditLog",
    "AuditRecord",
    "BeliefFragment",
    "BeliefState",
    "ContextSnapshot",
    "Coord",
    "Decision",
    "ElaborationRule",
    "Engine",
    "EngineConfig",
    "FilterMode",
    "FilterRule",
    "FragmentBlueprint",
    "FragmentKind",
    "FragmentStatus",
    "GuardrailMode",
    "InjectionPolicy",
    "InjectionRequest",
    "InjectionResult",
    "PendingQueue",
    "Polarity",
    "PolicyDecision",
    "Provenance",
    "RuleSet",
    "RunResult",
    "SEED_NAMES",
    "Scenario",
    "SectorRegistry",
    "SelfInjectionResult",
    "ShadowReport",
    "SourceRegistry",
    "Strategy",
    "VetResult",
    "appropriate",
    "assimilate",
    "canonical_document",
    "coherence",
    "load",
    "parse_scenario",
    "query",
    "replay_check",
    "run_scenario",
    "run_self_injection",
    "seed_state",
    "shadow_assimilate",
    "state_hash",
    "vet",
]
