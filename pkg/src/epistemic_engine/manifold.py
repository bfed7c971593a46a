"""Core belief-state model: fragments, coordinates, sectors, and metrics.

A belief state is an immutable ensemble of linguistic fragments, each pinned
to a coordinate (sector, abstraction level). States are never mutated in
place; every operation returns a fresh state, which is what makes shadow
evaluation and deterministic replay cheap. The empty state is the epistemic
vacuum and hashes to a fixed constant.

Canonical serialization lives here too: a line-oriented document with a
versioned header, one tab-separated line per fragment in id order. The
SHA-256 of that document is the state hash used for replay checks and
branch-equivalence comparisons.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Iterator, Mapping, NamedTuple

from .errors import (
    DuplicateSector,
    InvalidSectorName,
    LayerOutOfRange,
    UnknownSector,
)

# Sector names and assertion identifiers share one lexical rule.
_IDENT_RE = re.compile(r"[a-z][a-z0-9_]{0,31}\Z")

BUILTIN_SECTORS = ("perc", "plan", "mem", "refl", "know", "ethics")


class FragmentKind(Enum):
    OBSERVATION = "observation"
    GOAL = "goal"
    CONSTRAINT = "constraint"
    CORRECTION = "correction"
    HEURISTIC = "heuristic"
    REFLECTIVE_PROMPT = "reflective_prompt"
    META_REPORT = "meta_report"


class FragmentStatus(Enum):
    ACTIVE = "active"
    EXPIRED = "expired"
    NULLIFIED = "nullified"
    RETRACTED = "retracted"
    ANNIHILATED = "annihilated"


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @classmethod
    def from_token(cls, token: str) -> "Polarity":
        if token in ("+", "positive"):
            return cls.POSITIVE
        if token in ("-", "negative"):
            return cls.NEGATIVE
        raise ValueError(f"bad polarity token: {token!r}")

    def flipped(self) -> "Polarity":
        return Polarity.NEGATIVE if self is Polarity.POSITIVE else Polarity.POSITIVE


def _require_ident(value: str, what: str) -> None:
    if not isinstance(value, str) or not _IDENT_RE.match(value):
        raise ValueError(f"{what} must match [a-z][a-z0-9_]* (max 32 chars): {value!r}")


@dataclass(frozen=True)
class Assertion:
    """Structured claim attached to a fragment; the unit of conflict detection."""

    topic: str
    predicate: str
    polarity: Polarity
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        _require_ident(self.topic, "assertion topic")
        _require_ident(self.predicate, "assertion predicate")
        keys = [k for k, _ in self.params]
        if len(keys) != len(set(keys)):
            raise ValueError("assertion param keys must be unique")
        for k, v in self.params:
            _require_ident(k, "assertion param key")
            if not isinstance(v, str):
                raise ValueError("assertion param values must be strings")

    def comparable_with(self, other: "Assertion") -> bool:
        # Same claim subject: identical (topic, predicate).
        return self.topic == other.topic and self.predicate == other.predicate

    def opposes(self, other: "Assertion") -> bool:
        return self.comparable_with(other) and self.polarity is not other.polarity

    def to_json_obj(self) -> dict:
        return {
            "topic": self.topic,
            "predicate": self.predicate,
            "polarity": self.polarity.value,
            "params": [[k, v] for k, v in self.params],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "Assertion":
        return cls(
            topic=obj["topic"],
            predicate=obj["predicate"],
            polarity=Polarity.from_token(obj["polarity"]),
            params=tuple((k, v) for k, v in obj.get("params", [])),
        )


class Coord(NamedTuple):
    sector: str
    k: int

    def token(self) -> str:
        return f"{self.sector}/{self.k}"


class ProvenanceKind(Enum):
    PERCEIVED = "perceived"
    INJECTED = "injected"
    ELABORATED = "elaborated"
    REFLECTED = "reflected"


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    source: str | None = None       # injected only
    parent_id: int | None = None    # elaborated only

    @classmethod
    def perceived(cls) -> "Provenance":
        return cls(ProvenanceKind.PERCEIVED)

    @classmethod
    def reflected(cls) -> "Provenance":
        return cls(ProvenanceKind.REFLECTED)

    @classmethod
    def injected(cls, source: str) -> "Provenance":
        return cls(ProvenanceKind.INJECTED, source=source)

    @classmethod
    def elaborated(cls, parent_id: int) -> "Provenance":
        return cls(ProvenanceKind.ELABORATED, parent_id=parent_id)

    def token(self) -> str:
        if self.kind is ProvenanceKind.INJECTED:
            return "injected:" + json.dumps(self.source, ensure_ascii=False)
        if self.kind is ProvenanceKind.ELABORATED:
            return f"elaborated:{self.parent_id}"
        return self.kind.value

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind.value}
        if self.source is not None:
            obj["source"] = self.source
        if self.parent_id is not None:
            obj["parent_id"] = self.parent_id
        return obj


@dataclass(frozen=True)
class FragmentBlueprint:
    """Candidate fragment before admission; ids and status come later."""

    text: str
    kind: FragmentKind
    coord: Coord
    assertion: Assertion | None = None
    anchor: float = 0.5
    pinned: bool = False
    ttl: int | None = None
    fast_decay: bool = False
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text:
            raise ValueError("fragment text must be a non-empty string")
        if not 0.0 <= self.anchor <= 1.0:
            raise ValueError(f"anchor out of [0, 1]: {self.anchor}")
        if self.ttl is not None and self.ttl < 1:
            raise ValueError(f"ttl must be >= 1: {self.ttl}")
        if self.pinned:
            # Pinned implies full anchor; normalize rather than reject.
            object.__setattr__(self, "anchor", 1.0)


@dataclass(frozen=True)
class BeliefFragment:
    id: int
    text: str
    kind: FragmentKind
    coord: Coord
    assertion: Assertion | None
    anchor: float
    pinned: bool
    ttl: int | None
    fast_decay: bool
    provenance: Provenance
    born_tick: int
    status: FragmentStatus = FragmentStatus.ACTIVE

    @property
    def active(self) -> bool:
        return self.status is FragmentStatus.ACTIVE

    def with_status(self, status: FragmentStatus) -> "BeliefFragment":
        return replace(self, status=status)

    def with_anchor(self, anchor: float) -> "BeliefFragment":
        return replace(self, anchor=anchor)


class SectorRegistry:
    """Registered sector names; the built-ins are always present."""

    def __init__(self, extra: tuple[str, ...] | list[str] = ()):
        self._names: list[str] = list(BUILTIN_SECTORS)
        for name in extra:
            self.register(name)

    def register(self, name: str) -> None:
        if not _IDENT_RE.match(name or ""):
            raise InvalidSectorName(f"bad sector name: {name!r}")
        if name in self._names:
            raise DuplicateSector(f"sector already registered: {name}")
        self._names.append(name)

    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._names

    def require(self, name: str) -> None:
        if name not in self._names:
            raise UnknownSector(f"sector not registered: {name}")

    def check_coord(self, coord: Coord, k_max: int) -> None:
        self.require(coord.sector)
        if not 0 <= coord.k <= k_max:
            raise LayerOutOfRange(f"abstraction level {coord.k} outside 0..{k_max}")


class GuardrailMode(Enum):
    REJECT = "reject"
    FLAG_FOR_REVIEW = "flag_for_review"


@dataclass(frozen=True)
class EngineConfig:
    k_max: int = 4
    capacity: int = 256
    decay_rate: float = 0.95
    fast_decay: float = 0.5
    null_threshold: float = 0.05
    reinforce_step: float = 0.1
    authority_epsilon: float = 0.05
    kappa_floor: float = 0.8
    kappa_drop_max: float = 0.1
    guardrail_mode: GuardrailMode = GuardrailMode.REJECT
    allow_naive: bool = False
    high_anchor_band: float = 0.75

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        for name in ("decay_rate", "fast_decay"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        for name in ("null_threshold", "authority_epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        for name in ("reinforce_step", "kappa_floor", "kappa_drop_max", "high_anchor_band"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    def updated(self, mapping: Mapping[str, object]) -> "EngineConfig":
        """New config with keys from `mapping` applied; values may be strings."""
        kwargs: dict = {}
        valid = {f.name: f.type for f in fields(self)}
        for key, raw in mapping.items():
            if key not in valid:
                raise ValueError(f"unknown config key: {key}")
            kwargs[key] = _coerce_config_value(key, raw)
        return replace(self, **kwargs)


def _coerce_config_value(key: str, raw: object):
    if key == "guardrail_mode":
        if isinstance(raw, GuardrailMode):
            return raw
        return GuardrailMode(str(raw))
    if key == "allow_naive":
        if isinstance(raw, bool):
            return raw
        token = str(raw).lower()
        if token in ("true", "1", "yes"):
            return True
        if token in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {raw!r}")
    if key in ("k_max", "capacity"):
        return int(raw)  # type: ignore[arg-type]
    return float(raw)  # type: ignore[arg-type]


@dataclass(frozen=True)
class BeliefState:
    """Immutable snapshot of the manifold; fragments keyed by id."""

    fragments: dict[int, BeliefFragment] = field(default_factory=dict)
    next_id: int = 1
    tick: int = 0

    @classmethod
    def vacuum(cls) -> "BeliefState":
        return cls()

    def get(self, fragment_id: int) -> BeliefFragment | None:
        return self.fragments.get(fragment_id)

    def all_fragments(self) -> list[BeliefFragment]:
        return [self.fragments[i] for i in sorted(self.fragments)]

    def active_fragments(self) -> list[BeliefFragment]:
        return [f for f in self.all_fragments() if f.active]

    def iter_active(self) -> Iterator[BeliefFragment]:
        for fid in sorted(self.fragments):
            f = self.fragments[fid]
            if f.active:
                yield f

    def with_fragment(self, fragment: BeliefFragment) -> "BeliefState":
        new = dict(self.fragments)
        new[fragment.id] = fragment
        return replace(
            self,
            fragments=new,
            next_id=max(self.next_id, fragment.id + 1),
        )

    def with_fragments(self, updated: list[BeliefFragment]) -> "BeliefState":
        new = dict(self.fragments)
        top = self.next_id
        for fragment in updated:
            new[fragment.id] = fragment
            top = max(top, fragment.id + 1)
        return replace(self, fragments=new, next_id=top)

    def at_tick(self, tick: int) -> "BeliefState":
        return replace(self, tick=tick)


# ---------------------------------------------------------------------------
# Metrics

def _assertion_bearing_active(state: BeliefState) -> list[BeliefFragment]:
    return [f for f in state.iter_active() if f.assertion is not None]


def conflicting_pairs(state: BeliefState) -> list[tuple[BeliefFragment, BeliefFragment]]:
    """All active pairs asserting opposite polarity on the same claim."""
    pairs = []
    bearing = _assertion_bearing_active(state)
    for i, f in enumerate(bearing):
        for g in bearing[i + 1:]:
            if f.assertion.opposes(g.assertion):  # type: ignore[union-attr]
                pairs.append((f, g))
    return pairs


def coherence(state: BeliefState) -> float:
    """1 - conflicting/comparable over active assertion-bearing fragments.

    A state with no comparable pairs is vacuously coherent (1.0).
    """
    bearing = _assertion_bearing_active(state)
    comparable = 0
    conflicting = 0
    for i, f in enumerate(bearing):
        for g in bearing[i + 1:]:
            if f.assertion.comparable_with(g.assertion):  # type: ignore[union-attr]
                comparable += 1
                if f.assertion.polarity is not g.assertion.polarity:  # type: ignore[union-attr]
                    conflicting += 1
    if comparable == 0:
        return 1.0
    return 1.0 - conflicting / comparable


def load(state: BeliefState) -> float:
    """Cognitive load; in this engine simply the active fragment count."""
    return float(sum(1 for _ in state.iter_active()))


def query(
    state: BeliefState,
    sector: str | None = None,
    k: int | None = None,
    status: FragmentStatus | None = None,
    *,
    sectors: SectorRegistry | None = None,
) -> list[BeliefFragment]:
    """Fragments filtered by coordinate and status, in id order."""
    if sector is not None and sectors is not None:
        sectors.require(sector)
    out = []
    for f in state.all_fragments():
        if sector is not None and f.coord.sector != sector:
            continue
        if k is not None and f.coord.k != k:
            continue
        if status is not None and f.status is not status:
            continue
        out.append(f)
    return out


# ---------------------------------------------------------------------------
# Canonical serialization and hashing

STATE_HEADER = "epistemic-state v1"


def canonical_fragment_line(f: BeliefFragment) -> str:
    assertion = (
        "-"
        if f.assertion is None
        else json.dumps(f.assertion.to_json_obj(), ensure_ascii=False, separators=(",", ":"))
    )
    cols = (
        str(f.id),
        json.dumps(f.text, ensure_ascii=False),
        assertion,
        f.kind.value,
        f.coord.token(),
        f"{f.anchor:.6f}",
        "1" if f.pinned else "0",
        f.provenance.token(),
        str(f.born_tick),
        "-" if f.ttl is None else str(f.ttl),
        f.status.value,
    )
    return "\t".join(cols)


def canonical_document(state: BeliefState) -> str:
    lines = [f"{STATE_HEADER} tick={state.tick}"]
    lines.extend(canonical_fragment_line(f) for f in state.all_fragments())
    return "\n".join(lines) + "\n"


def state_hash(state: BeliefState) -> str:
    return hashlib.sha256(canonical_document(state).encode("utf-8")).hexdigest()
