"""Engine: one belief state plus the machinery that governs changing it.

All mutation funnels through the methods here, and every submit or operator
action appends exactly one audit record, whatever the outcome. The engine
itself is single-threaded by contract; callers that share an instance
across threads (the control service does) must serialize mutations.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lifecycle
from .assimilation import AssimilationOutcome, ElaborationRule, assimilate
from .errors import EngineError, Unauthorized
from .injection import (
    ContextSnapshot,
    InjectionPolicy,
    InjectionRequest,
    PolicyDecision,
    Strategy,
    effective_blueprint,
    inject_naive,
)
from .lifecycle import ReflectResult, TickReport
from .manifold import (
    BeliefState,
    EngineConfig,
    FragmentBlueprint,
    GuardrailMode,
    Provenance,
    SectorRegistry,
    canonical_document,
    coherence,
    load,
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
    token_digest,
    vet,
)

REASON_NAIVE_DISABLED = "naive_disabled"
REASON_NAIVE_BYPASS = "naive_bypass"
REASON_HUMAN_REVIEW = "human_review"
REASON_REJECTED_BY_REVIEWER = "rejected_by_reviewer"
REASON_MANUAL_RETIREMENT = "manual_retirement"
REASON_PINNED_RETIRED = "pinned_retired"
REASON_ANNIHILATION = "annihilation"
REASON_POLICY_DEFER = "policy_defer"
REASON_POLICY_DROP = "policy_drop"


@dataclass(frozen=True)
class _RequestSummary:
    source: str
    strategy: str
    coord: str
    kind: str
    topic: str


def _summarize(request: InjectionRequest) -> _RequestSummary:
    bp = effective_blueprint(request)
    return _RequestSummary(
        source=request.source,
        strategy=request.strategy.value,
        coord=bp.coord.token(),
        kind=bp.kind.value,
        topic=bp.assertion.topic if bp.assertion is not None else "-",
    )


class Engine:
    def __init__(self, config: EngineConfig | None = None, sectors: SectorRegistry | None = None):
        self.config = config or EngineConfig()
        self.sectors = sectors or SectorRegistry()
        self.sources = SourceRegistry()
        self.rules = RuleSet()
        self.elaborations: list[ElaborationRule] = []
        self.audit = AuditLog()
        self.pending = PendingQueue()
        self.policy: InjectionPolicy | None = None
        self.state = BeliefState.vacuum()
        self.env: dict[str, str] = {}

    # -- reads ---------------------------------------------------------

    def context(self) -> ContextSnapshot:
        return ContextSnapshot.from_state(self.state, self.env)

    def metrics(self) -> dict:
        return {
            "tick": self.state.tick,
            "kappa": coherence(self.state),
            "lambda": load(self.state),
            "active": int(load(self.state)),
            "pending": self.pending.open_count(),
        }

    def hash(self) -> str:
        return state_hash(self.state)

    def export(self) -> str:
        return canonical_document(self.state)

    # -- configuration -------------------------------------------------

    def register_sector(self, name: str) -> None:
        self.sectors.register(name)

    def register_source(self, source_id: str, **kwargs) -> None:
        self.sources.register(source_id, **kwargs)

    def add_rule(self, mode: FilterMode, rule: FilterRule) -> None:
        self.rules.add(mode, rule)

    def add_elaboration(self, rule: ElaborationRule) -> None:
        self.elaborations.append(rule)

    def set_env(self, key: str, value: str) -> None:
        self.env[key] = value

    # -- audit plumbing --------------------------------------------------

    def _record(
        self,
        summary: _RequestSummary,
        decision: Decision,
        reasons,
        kappa_before: float,
        lambda_before: float,
        retracted=(),
        admitted=(),
    ) -> AuditRecord:
        return self.audit.append(
            tick=self.state.tick,
            source=summary.source,
            strategy=summary.strategy,
            coord=summary.coord,
            kind=summary.kind,
            topic=summary.topic,
            decision=decision,
            reason_codes=tuple(reasons),
            kappa_before=kappa_before,
            kappa_after=coherence(self.state),
            lambda_before=lambda_before,
            lambda_after=load(self.state),
            retracted_ids=tuple(retracted),
            admitted_ids=tuple(admitted),
        )

    # -- the submission path ---------------------------------------------

    def submit(self, request: InjectionRequest, token: str) -> AuditRecord:
        """Full pipeline for one injection request; exactly one audit record."""
        kb, lb = coherence(self.state), load(self.state)
        summary = _summarize(request)

        if self.policy is not None:
            verdict = self.policy.decide(self.state, self.context(), request)
            if verdict is PolicyDecision.DEFER:
                return self._record(summary, Decision.DEFERRED, (REASON_POLICY_DEFER,), kb, lb)
            if verdict is PolicyDecision.DROP:
                return self._record(summary, Decision.REJECTED, (REASON_POLICY_DROP,), kb, lb)

        if request.strategy is Strategy.NAIVE:
            if not self.config.allow_naive:
                return self._record(summary, Decision.REJECTED, (REASON_NAIVE_DISABLED,), kb, lb)
            try:
                new_state, fid = inject_naive(
                    self.state, request, config=self.config, sectors=self.sectors
                )
            except EngineError as err:
                return self._record(summary, Decision.REJECTED, (err.code,), kb, lb)
            self.state = new_state
            return self._record(
                summary, Decision.ADMITTED, (REASON_NAIVE_BYPASS,), kb, lb, admitted=(fid,)
            )

        check = vet(
            self.state,
            request,
            token,
            config=self.config,
            sectors=self.sectors,
            sources=self.sources,
            rules=self.rules,
            elaborations=tuple(self.elaborations),
        )
        if not check.passed:
            if (
                check.guardrail_failure
                and self.config.guardrail_mode is GuardrailMode.FLAG_FOR_REVIEW
            ):
                self.pending.add(
                    request, token_digest(token), self.state.tick, check.reasons
                )
                return self._record(
                    summary, Decision.FLAGGED_FOR_REVIEW, check.reasons, kb, lb
                )
            return self._record(summary, Decision.REJECTED, check.reasons, kb, lb)

        return self._dispatch_and_record(request, summary, kb, lb)

    def _dispatch_and_record(
        self,
        request: InjectionRequest,
        summary: _RequestSummary,
        kb: float,
        lb: float,
        extra_reasons: tuple[str, ...] = (),
    ) -> AuditRecord:
        from .injection import dispatch

        try:
            result = dispatch(
                self.state,
                self.context(),
                request,
                config=self.config,
                sectors=self.sectors,
                rules=self.elaborations,
            )
        except EngineError as err:
            return self._record(
                summary, Decision.REJECTED, extra_reasons + (err.code,), kb, lb
            )

        self.state = result.state
        if result.deferred:
            return self._record(
                summary, Decision.DEFERRED, extra_reasons + tuple(result.reasons), kb, lb
            )
        outcome = result.outcome
        assert outcome is not None
        if outcome.admitted:
            return self._record(
                summary,
                Decision.ADMITTED,
                extra_reasons + tuple(result.notes),
                kb,
                lb,
                retracted=outcome.retracted_ids,
                admitted=outcome.admitted_ids,
            )
        return self._record(
            summary, Decision.REJECTED, extra_reasons + (outcome.reason,), kb, lb
        )

    # -- human review -----------------------------------------------------

    def resolve_pending(
        self, pending_id: int, verdict: str, actor: str, token: str
    ) -> AuditRecord:
        """Approve or reject a parked request. Approval re-runs authentication
        and content filters against current rules and skips only the
        guardrails; assimilation still applies in full."""
        if verdict not in ("approve", "reject"):
            raise ValueError(f"verdict must be approve or reject: {verdict!r}")
        if not self.sources.is_reviewer(actor, token):
            raise Unauthorized(f"{actor} may not review pending requests")
        entry = self.pending.resolve(pending_id, verdict)

        kb, lb = coherence(self.state), load(self.state)
        summary = _summarize(entry.request)
        if verdict == "reject":
            return self._record(
                summary,
                Decision.REJECTED,
                (REASON_HUMAN_REVIEW, REASON_REJECTED_BY_REVIEWER),
                kb,
                lb,
            )

        check = vet(
            self.state,
            entry.request,
            entry.token_digest,
            config=self.config,
            sectors=self.sectors,
            sources=self.sources,
            rules=self.rules,
            skip_guardrails=True,
            token_is_digest=True,
        )
        if not check.passed:
            return self._record(
                summary,
                Decision.REJECTED,
                (REASON_HUMAN_REVIEW,) + check.reasons,
                kb,
                lb,
            )
        return self._dispatch_and_record(
            entry.request, summary, kb, lb, extra_reasons=(REASON_HUMAN_REVIEW,)
        )

    # -- lifecycle --------------------------------------------------------

    def tick(self, count: int = 1) -> list[TickReport]:
        if count < 1:
            raise ValueError("tick count must be >= 1")
        reports = []
        for _ in range(count):
            self.state, report = lifecycle.tick(self.state, config=self.config)
            reports.append(report)
        return reports

    def reinforce(self, fragment_id: int) -> None:
        self.state = lifecycle.reinforce(self.state, fragment_id, config=self.config)

    def retire(self, fragment_id: int, actor: str, token: str) -> AuditRecord:
        if not self.sources.is_reviewer(actor, token):
            raise Unauthorized(f"{actor} may not retire fragments")
        kb, lb = coherence(self.state), load(self.state)
        self.state, fragment = lifecycle.retire(self.state, fragment_id)
        reasons = [REASON_MANUAL_RETIREMENT]
        if fragment.pinned:
            reasons.append(REASON_PINNED_RETIRED)
        summary = _RequestSummary(
            source=actor,
            strategy="retire",
            coord=fragment.coord.token(),
            kind=fragment.kind.value,
            topic=fragment.assertion.topic if fragment.assertion else "-",
        )
        return self._record(
            summary, Decision.REVISED, reasons, kb, lb, retracted=(fragment_id,)
        )

    def annihilate(self, sector: str, actor: str, token: str) -> AuditRecord:
        if not self.sources.is_reviewer(actor, token):
            raise Unauthorized(f"{actor} may not annihilate sectors")
        kb, lb = coherence(self.state), load(self.state)
        self.state, cleared = lifecycle.annihilate_sector(
            self.state, sector, sectors=self.sectors
        )
        summary = _RequestSummary(
            source=actor, strategy="annihilate", coord=f"{sector}/-", kind="-", topic="-"
        )
        return self._record(
            summary, Decision.REVISED, (REASON_ANNIHILATION,), kb, lb, retracted=cleared
        )

    def reflect(self) -> ReflectResult:
        result = lifecycle.reflect(
            self.state,
            config=self.config,
            sectors=self.sectors,
            layer=min(1, self.config.k_max),
        )
        self.state = result.state
        return result

    # -- perception -------------------------------------------------------

    def perceive(
        self, blueprint: FragmentBlueprint, authority: float | None = None
    ) -> AssimilationOutcome:
        """Admit an observation from the agent's own sensing; not an injection,
        so no vetting and no audit record."""
        from dataclasses import replace

        stamped = replace(blueprint, provenance=Provenance.perceived())
        outcome = assimilate(
            self.state,
            stamped,
            blueprint.anchor if authority is None else authority,
            config=self.config,
            sectors=self.sectors,
            rules=self.elaborations,
        )
        self.state = outcome.state
        return outcome
