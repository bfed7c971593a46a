"""Safety pipeline primitives: sources, filters, guardrails, audit, pending.

The vet sequence is fixed: authentication, whitelist, blacklist, then the
two guardrails (pinned alignment, shadow coherence). It short-circuits on
first failure and reports a stage-distinct reason code, so operators can
tell from the audit trail exactly which gate closed. Unauthenticated
content never reaches the content matchers.

Tokens are never stored; registries and pending entries hold SHA-256
digests only. The audit log is append-only: records are assigned a
monotonic seq and are never modified or deleted.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .assimilation import ElaborationRule, shadow_assimilate
from .errors import AlreadyResolved, DuplicateRule, UnknownPending
from .injection import InjectionRequest, Strategy, effective_blueprint
from .manifold import (
    BeliefState,
    EngineConfig,
    FragmentBlueprint,
    SectorRegistry,
    coherence,
)

STAGE_AUTH = "auth"
STAGE_WHITELIST = "whitelist"
STAGE_BLACKLIST = "blacklist"
STAGE_GUARDRAIL = "guardrail"

REASON_GUARDRAIL_PINNED = "guardrail:conflict_with_pinned"
REASON_GUARDRAIL_COHERENCE = "guardrail:coherence_impact"


def token_digest(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SourceEntry:
    source_id: str
    token_digest: str
    max_priority: float = 1.0
    strategies: frozenset[Strategy] = frozenset()
    can_review: bool = False


class SourceRegistry:
    def __init__(self) -> None:
        self._entries: dict[str, SourceEntry] = {}

    def register(
        self,
        source_id: str,
        *,
        token: str | None = None,
        digest: str | None = None,
        max_priority: float = 1.0,
        strategies: Iterable[Strategy] = (),
        can_review: bool = False,
    ) -> None:
        if (token is None) == (digest is None):
            raise ValueError("pass exactly one of token or digest")
        if not 0.0 <= max_priority <= 1.0:
            raise ValueError("max_priority out of [0, 1]")
        self._entries[source_id] = SourceEntry(
            source_id=source_id,
            token_digest=digest if digest is not None else token_digest(token),  # type: ignore[arg-type]
            max_priority=max_priority,
            strategies=frozenset(strategies),
            can_review=can_review,
        )

    def get(self, source_id: str) -> SourceEntry | None:
        return self._entries.get(source_id)

    def authenticate_digest(
        self, source_id: str, digest: str, priority: float, strategy: Strategy
    ) -> bool:
        entry = self._entries.get(source_id)
        if entry is None or entry.token_digest != digest:
            return False
        if priority > entry.max_priority:
            return False
        return strategy in entry.strategies

    def authenticate(
        self, source_id: str, token: str, priority: float, strategy: Strategy
    ) -> bool:
        return self.authenticate_digest(source_id, token_digest(token), priority, strategy)

    def is_reviewer(self, source_id: str, token: str) -> bool:
        entry = self._entries.get(source_id)
        return (
            entry is not None
            and entry.token_digest == token_digest(token)
            and entry.can_review
        )


# ---------------------------------------------------------------------------
# Filter rules

class FilterMode(Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


def _glob_to_regex(glob: str) -> re.Pattern[str]:
    # Only * and ? are wildcards; everything else matches literally.
    parts = []
    for ch in glob:
        if ch == "*":
            parts.append(".*")
        elif ch == "?":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts) + r"\Z", re.DOTALL)


@dataclass(frozen=True)
class AssertionMatch:
    topic: str
    predicate: str
    polarity: str  # "positive" | "negative"


@dataclass(frozen=True)
class FilterRule:
    """One criterion per rule: topic equality, text glob, or assertion triple."""

    rule_id: str
    topic_exact: str | None = None
    text_glob: str | None = None
    assertion_match: AssertionMatch | None = None

    def __post_init__(self) -> None:
        given = sum(
            x is not None
            for x in (self.topic_exact, self.text_glob, self.assertion_match)
        )
        if given != 1:
            raise ValueError("a filter rule needs exactly one criterion")
        if not self.rule_id:
            raise ValueError("rule_id must be non-empty")

    def matches(self, blueprint: FragmentBlueprint) -> bool:
        if self.topic_exact is not None:
            return (
                blueprint.assertion is not None
                and blueprint.assertion.topic == self.topic_exact
            )
        if self.text_glob is not None:
            return _glob_to_regex(self.text_glob).match(blueprint.text) is not None
        a = blueprint.assertion
        m = self.assertion_match
        return (
            a is not None
            and m is not None
            and a.topic == m.topic
            and a.predicate == m.predicate
            and a.polarity.value == m.polarity
        )


class RuleSet:
    """Ordered whitelist and blacklist; first matching blacklist rule wins."""

    def __init__(self) -> None:
        self.whitelist: list[FilterRule] = []
        self.blacklist: list[FilterRule] = []

    def add(self, mode: FilterMode, rule: FilterRule) -> None:
        bucket = self.whitelist if mode is FilterMode.WHITELIST else self.blacklist
        if any(r.rule_id == rule.rule_id for r in self.whitelist + self.blacklist):
            raise DuplicateRule(f"rule id already in use: {rule.rule_id}")
        bucket.append(rule)

    def whitelist_passes(self, blueprint: FragmentBlueprint) -> bool:
        # An empty whitelist admits everything; otherwise one match is required.
        if not self.whitelist:
            return True
        return any(r.matches(blueprint) for r in self.whitelist)

    def first_blacklisted(self, blueprint: FragmentBlueprint) -> FilterRule | None:
        for rule in self.blacklist:
            if rule.matches(blueprint):
                return rule
        return None


# ---------------------------------------------------------------------------
# Vet: the four-stage gate

@dataclass(frozen=True)
class VetResult:
    passed: bool
    stage: str | None = None
    reasons: tuple[str, ...] = ()

    @property
    def guardrail_failure(self) -> bool:
        return self.stage == STAGE_GUARDRAIL


def vet(
    state: BeliefState,
    request: InjectionRequest,
    token: str,
    *,
    config: EngineConfig,
    sectors: SectorRegistry,
    sources: SourceRegistry,
    rules: RuleSet,
    elaborations: tuple[ElaborationRule, ...] = (),
    skip_guardrails: bool = False,
    token_is_digest: bool = False,
) -> VetResult:
    """Run the gate stages in order, stopping at the first failure."""
    if token_is_digest:
        authed = sources.authenticate_digest(
            request.source, token, request.priority, request.strategy
        )
    else:
        authed = sources.authenticate(
            request.source, token, request.priority, request.strategy
        )
    if not authed:
        return VetResult(False, STAGE_AUTH, (STAGE_AUTH,))

    blueprint = effective_blueprint(request)
    if not rules.whitelist_passes(blueprint):
        return VetResult(False, STAGE_WHITELIST, (STAGE_WHITELIST,))

    hit = rules.first_blacklisted(blueprint)
    if hit is not None:
        return VetResult(False, STAGE_BLACKLIST, (f"blacklist:{hit.rule_id}",))

    if skip_guardrails:
        return VetResult(True)

    if blueprint.assertion is not None:
        pinned_clash = any(
            f.pinned
            and f.assertion is not None
            and f.assertion.opposes(blueprint.assertion)
            for f in state.iter_active()
        )
        if pinned_clash:
            return VetResult(False, STAGE_GUARDRAIL, (REASON_GUARDRAIL_PINNED,))

    try:
        # Same elaboration rules as dispatch, so the prediction covers the
        # whole admission including derived fragments.
        shadow = shadow_assimilate(
            state,
            blueprint,
            request.priority,
            config=config,
            sectors=sectors,
            rules=elaborations,
        )
    except Exception:
        # Structurally invalid blueprints can't be shadowed; let strategy
        # dispatch surface the precise error downstream.
        return VetResult(True)
    if shadow.would_admit:
        floor = config.kappa_floor
        drop_limit = coherence(state) - config.kappa_drop_max
        if shadow.predicted_kappa < floor or shadow.predicted_kappa < drop_limit:
            return VetResult(False, STAGE_GUARDRAIL, (REASON_GUARDRAIL_COHERENCE,))

    return VetResult(True)


# ---------------------------------------------------------------------------
# Audit log

class Decision(Enum):
    ADMITTED = "admitted"
    REJECTED = "rejected"
    DEFERRED = "deferred"
    FLAGGED_FOR_REVIEW = "flagged_for_review"
    REVISED = "revised"


AUDIT_HEADER = "epistemic-audit v1 elaborations=unfiltered"


def _ids_token(ids: tuple[int, ...]) -> str:
    return ",".join(str(i) for i in ids) if ids else "-"


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    tick: int
    source: str
    strategy: str
    coord: str
    kind: str
    topic: str
    decision: Decision
    reason_codes: tuple[str, ...]
    kappa_before: float
    kappa_after: float
    lambda_before: float
    lambda_after: float
    retracted_ids: tuple[int, ...] = ()
    admitted_ids: tuple[int, ...] = ()

    def line(self) -> str:
        cols = (
            str(self.seq),
            str(self.tick),
            self.source,
            self.strategy,
            self.coord,
            self.kind,
            self.topic,
            self.decision.value,
            ",".join(self.reason_codes) if self.reason_codes else "-",
            f"{self.kappa_before:.6f}",
            f"{self.kappa_after:.6f}",
            f"{self.lambda_before:.6f}",
            f"{self.lambda_after:.6f}",
            _ids_token(self.retracted_ids),
            _ids_token(self.admitted_ids),
        )
        return "\t".join(cols)

    def to_json_obj(self) -> dict:
        return {
            "seq": self.seq,
            "tick": self.tick,
            "request_summary": {
                "source": self.source,
                "strategy": self.strategy,
                "coord": self.coord,
                "kind": self.kind,
                "topic": self.topic,
            },
            "decision": self.decision.value,
            "reason_codes": list(self.reason_codes),
            "kappa_before": self.kappa_before,
            "kappa_after": self.kappa_after,
            "lambda_before": self.lambda_before,
            "lambda_after": self.lambda_after,
            "retracted_ids": list(self.retracted_ids),
            "admitted_ids": list(self.admitted_ids),
        }


class AuditLog:
    """Append-only decision trail. Records are never modified or deleted."""

    def __init__(self) -> None:
        self._records: list[AuditRecord] = []

    def append(self, **kwargs) -> AuditRecord:
        record = AuditRecord(seq=len(self._records) + 1, **kwargs)
        self._records.append(record)
        return record

    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def since(self, seq: int) -> list[AuditRecord]:
        return [r for r in self._records if r.seq > seq]

    def last_seq(self) -> int:
        return len(self._records)

    def render_lines(self) -> list[str]:
        return [AUDIT_HEADER] + [r.line() for r in self._records]

    def document(self) -> str:
        return "\n".join(self.render_lines()) + "\n"


# ---------------------------------------------------------------------------
# Pending review queue

@dataclass
class PendingEntry:
    pending_id: int
    created_tick: int
    request: InjectionRequest
    token_digest: str
    reasons: tuple[str, ...]
    resolved: bool = False
    verdict: str | None = None


class PendingQueue:
    """Requests parked by a flag_for_review guardrail, resolved FIFO or by id."""

    def __init__(self) -> None:
        self._entries: dict[int, PendingEntry] = {}
        self._next_id = 1

    def add(
        self,
        request: InjectionRequest,
        digest: str,
        tick: int,
        reasons: tuple[str, ...],
    ) -> PendingEntry:
        entry = PendingEntry(
            pending_id=self._next_id,
            created_tick=tick,
            request=request,
            token_digest=digest,
            reasons=reasons,
        )
        self._entries[entry.pending_id] = entry
        self._next_id += 1
        return entry

    def get(self, pending_id: int) -> PendingEntry:
        entry = self._entries.get(pending_id)
        if entry is None:
            raise UnknownPending(f"no pending entry {pending_id}")
        return entry

    def resolve(self, pending_id: int, verdict: str) -> PendingEntry:
        entry = self.get(pending_id)
        if entry.resolved:
            raise AlreadyResolved(f"pending entry {pending_id} already {entry.verdict}")
        entry.resolved = True
        entry.verdict = verdict
        return entry

    def open_entries(self) -> list[PendingEntry]:
        return [e for e in self._entries.values() if not e.resolved]

    def open_count(self) -> int:
        return sum(1 for e in self._entries.values() if not e.resolved)
