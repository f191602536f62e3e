"""Domain types and elementary geometry shared by every other module.

Coordinates live on a discretized valence-arousal plane: valence is the
horizontal axis, arousal the vertical one, both integers in [-100, 100].
All types here are plain values; none of them touch storage or the network.
"""

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from sym.errors import ValidationError

COORD_MIN = -100
COORD_MAX = 100


class LexicalClass(str, Enum):
    NOUN = "NOUN"
    VERB = "VERB"
    ADVERB = "ADVERB"
    ADJECTIVE = "ADJECTIVE"
    EXPRESSION = "EXPRESSION"


class Phase(str, Enum):
    PRE = "PRE"
    DURING = "DURING"
    POST = "POST"


class SpotKind(str, Enum):
    SELF = "SELF"
    STIMULUS = "STIMULUS"


class SpotStatus(str, Enum):
    POINT_ONLY = "POINT_ONLY"
    ACCEPTED = "ACCEPTED"
    EXHAUSTED = "EXHAUSTED"
    DECLINED = "DECLINED"


class SessionState(str, Enum):
    CREATED = "CREATED"
    PRE_DONE = "PRE_DONE"
    RUNNING = "RUNNING"
    POST_DONE = "POST_DONE"
    CLOSED = "CLOSED"


# Forward-only transition order for SessionState.
SESSION_STATE_ORDER = [
    SessionState.CREATED,
    SessionState.PRE_DONE,
    SessionState.RUNNING,
    SessionState.POST_DONE,
    SessionState.CLOSED,
]


class DuringKind(str, Enum):
    SELF = "SELF"
    STIMULUS = "STIMULUS"
    BOTH = "BOTH"


class PolicyKind(str, Enum):
    ALTERNATE = "ALTERNATE"
    RANDOM = "RANDOM"
    ALL_ON = "ALL_ON"
    ALL_OFF = "ALL_OFF"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class MoodPoint:
    """One discretized valence-arousal coordinate pair."""

    valence: int
    arousal: int

    def __post_init__(self):
        for name, value in (("valence", self.valence), ("arousal", self.arousal)):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            if not COORD_MIN <= value <= COORD_MAX:
                raise ValidationError(
                    f"{name} {value} outside [{COORD_MIN}, {COORD_MAX}]"
                )

    def to_dict(self) -> dict:
        return {"valence": self.valence, "arousal": self.arousal}

    @classmethod
    def from_dict(cls, data: dict) -> "MoodPoint":
        return cls(valence=data["valence"], arousal=data["arousal"])


def _round_half_away(value: float) -> int:
    # Half-away-from-zero so symmetric offsets move toward the extrema
    # symmetrically (Python's round() would round halves to even).
    if value >= 0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def clamp_point(x_raw: float, y_raw: float) -> MoodPoint:
    """Discretize a raw client coordinate pair onto the stored grid.

    Each component is rounded half-away-from-zero, then clamped to
    [-100, 100]. Idempotent on already-valid points. Non-finite input
    raises ValidationError.
    """
    for name, value in (("valence", x_raw), ("arousal", y_raw)):
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")
    return MoodPoint(
        valence=max(COORD_MIN, min(COORD_MAX, _round_half_away(x_raw))),
        arousal=max(COORD_MIN, min(COORD_MAX, _round_half_away(y_raw))),
    )


def distance(a: MoodPoint, b: MoodPoint) -> float:
    """Euclidean distance between two mood points."""
    return math.hypot(a.valence - b.valence, a.arousal - b.arousal)


@dataclass(frozen=True)
class MoodTerm:
    """A positioned mood word of one dictionary version."""

    term_id: str
    text: str
    lexical_class: LexicalClass
    concept_id: str
    position: MoodPoint

    def to_dict(self) -> dict:
        return {
            "id": self.term_id,
            "text": self.text,
            "lexical_class": self.lexical_class.value,
            "concept_id": self.concept_id,
            "valence": self.position.valence,
            "arousal": self.position.arousal,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MoodTerm":
        return cls(
            term_id=data["id"],
            text=data["text"],
            lexical_class=LexicalClass(data["lexical_class"]),
            concept_id=data["concept_id"],
            position=MoodPoint(valence=data["valence"], arousal=data["arousal"]),
        )


@dataclass(frozen=True)
class Concept:
    """Emotional concept grouping the terms that express it."""

    concept_id: str
    label: str
    member_term_ids: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {"id": self.concept_id, "label": self.label}


@dataclass(frozen=True)
class ConceptLink:
    """Symmetric proximity-weighted edge between two concepts."""

    concept_a: str
    concept_b: str
    weight: float

    def to_dict(self) -> dict:
        return {"a": self.concept_a, "b": self.concept_b, "weight": self.weight}

    @property
    def pair(self) -> frozenset:
        return frozenset((self.concept_a, self.concept_b))


@dataclass
class Dictionary:
    """A versioned set of mood terms plus its concept net.

    Versions are immutable once published: every mutating operation
    returns a new Dictionary with version + 1 and leaves its input alone.
    """

    dictionary_id: str
    version: int
    context_label: str
    parent_id: Optional[str] = None
    terms: dict = field(default_factory=dict)  # term_id -> MoodTerm
    concepts: dict = field(default_factory=dict)  # concept_id -> Concept
    links: list = field(default_factory=list)  # [ConceptLink]

    def term_ids(self) -> set:
        return set(self.terms)

    def to_dict(self) -> dict:
        """Interchange JSON document, plus the version number."""
        return {
            "dictionary_id": self.dictionary_id,
            "version": self.version,
            "context_label": self.context_label,
            "parent_id": self.parent_id,
            "terms": [self.terms[tid].to_dict() for tid in sorted(self.terms)],
            "concepts": [self.concepts[cid].to_dict() for cid in sorted(self.concepts)],
            "links": [
                link.to_dict()
                for link in sorted(self.links, key=lambda l: (l.concept_a, l.concept_b))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, version: Optional[int] = None) -> "Dictionary":
        terms = {t["id"]: MoodTerm.from_dict(t) for t in data.get("terms", [])}
        members: dict = {}
        for term in terms.values():
            members.setdefault(term.concept_id, set()).add(term.term_id)
        concepts = {
            c["id"]: Concept(
                concept_id=c["id"],
                label=c.get("label", c["id"]),
                member_term_ids=frozenset(members.get(c["id"], set())),
            )
            for c in data.get("concepts", [])
        }
        links = [
            ConceptLink(concept_a=l["a"], concept_b=l["b"], weight=l["weight"])
            for l in data.get("links", [])
        ]
        return cls(
            dictionary_id=data["dictionary_id"],
            version=data.get("version", version) if version is None else version,
            context_label=data.get("context_label", ""),
            parent_id=data.get("parent_id"),
            terms=terms,
            concepts=concepts,
            links=links,
        )


@dataclass(frozen=True)
class SuggestionRound:
    """One offer of up to k terms and the subset the participant refused."""

    offered_term_ids: tuple
    refused_term_ids: tuple = ()

    def to_dict(self) -> dict:
        return {
            "offered": list(self.offered_term_ids),
            "refused": list(self.refused_term_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SuggestionRound":
        return cls(
            offered_term_ids=tuple(data["offered"]),
            refused_term_ids=tuple(data.get("refused", [])),
        )


@dataclass
class SpotRecord:
    """One spotting act: the persisted (x, y, word) tuple with its trail."""

    spot_id: str
    session_id: str
    phase: Phase
    kind: SpotKind
    point: MoodPoint
    t_ms: int
    wall_clock: datetime
    dictionary_version: int
    stimulus_id: Optional[str] = None
    rounds: list = field(default_factory=list)  # [SuggestionRound]
    chosen_term_id: Optional[str] = None
    status: SpotStatus = SpotStatus.POINT_ONLY

    def refused_term_ids(self) -> list:
        """All refused term ids across rounds, in round order."""
        out = []
        for rnd in self.rounds:
            out.extend(rnd.refused_term_ids)
        return out

    def to_dict(self) -> dict:
        return {
            "spot_id": self.spot_id,
            "session_id": self.session_id,
            "phase": self.phase.value,
            "kind": self.kind.value,
            "stimulus_id": self.stimulus_id,
            "point": self.point.to_dict(),
            "t_ms": self.t_ms,
            "wall_clock": self.wall_clock.isoformat(),
            "dictionary_version": self.dictionary_version,
            "rounds": [r.to_dict() for r in self.rounds],
            "chosen_term_id": self.chosen_term_id,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpotRecord":
        return cls(
            spot_id=data["spot_id"],
            session_id=data["session_id"],
            phase=Phase(data["phase"]),
            kind=SpotKind(data["kind"]),
            stimulus_id=data.get("stimulus_id"),
            point=MoodPoint.from_dict(data["point"]),
            t_ms=data["t_ms"],
            wall_clock=datetime.fromisoformat(data["wall_clock"]),
            dictionary_version=data["dictionary_version"],
            rounds=[SuggestionRound.from_dict(r) for r in data.get("rounds", [])],
            chosen_term_id=data.get("chosen_term_id"),
            status=SpotStatus(data["status"]),
        )


def spot_record_violations(record: SpotRecord) -> list:
    """Check every SpotRecord invariant; returns one message per breach."""
    problems = []
    if record.t_ms < 0:
        problems.append(f"t_ms must be non-negative, got {record.t_ms}")
    if (record.stimulus_id is not None) != (record.kind == SpotKind.STIMULUS):
        problems.append("stimulus_id is required iff kind is STIMULUS")
    if (record.status == SpotStatus.ACCEPTED) != (record.chosen_term_id is not None):
        problems.append("chosen_term_id present iff status is ACCEPTED")
    if (record.status == SpotStatus.POINT_ONLY) != (len(record.rounds) == 0):
        problems.append("status POINT_ONLY iff rounds is empty")

    seen: set = set()
    for idx, rnd in enumerate(record.rounds):
        offered = list(rnd.offered_term_ids)
        if not offered:
            problems.append(f"round {idx} offers no terms")
        if len(set(offered)) != len(offered):
            problems.append(f"round {idx} offers a term twice")
        if seen & set(offered):
            problems.append(f"round {idx} re-offers a term from an earlier round")
        if not set(rnd.refused_term_ids) <= set(offered):
            problems.append(f"round {idx} refuses a term it did not offer")
        seen |= set(offered)

    if record.chosen_term_id is not None:
        if not record.rounds:
            problems.append("chosen term without any suggestion round")
        else:
            last = record.rounds[-1]
            if record.chosen_term_id not in last.offered_term_ids:
                problems.append("chosen term is not in the last round's offer")
            if record.chosen_term_id in set(record.refused_term_ids()):
                problems.append("chosen term appears in a refused set")
    return problems


@dataclass(frozen=True)
class AssignmentPolicy:
    """How sessions get the suggestion condition assigned."""

    kind: PolicyKind
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind == PolicyKind.RANDOM and self.seed is None:
            raise ValidationError("RANDOM assignment policy requires a seed")

    def to_dict(self) -> dict:
        out = {"policy": self.kind.value}
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AssignmentPolicy":
        return cls(kind=PolicyKind(data["policy"]), seed=data.get("seed"))


ALL_PHASES = frozenset((Phase.PRE, Phase.DURING, Phase.POST))


@dataclass
class Experiment:
    """Governing configuration for a batch of participant sessions."""

    experiment_id: str
    name: str
    dictionary_id: str
    during_kind: DuringKind = DuringKind.BOTH
    assignment_policy: AssignmentPolicy = AssignmentPolicy(PolicyKind.ALTERNATE)
    k_suggestions: int = 3
    suggestion_phases: frozenset = ALL_PHASES

    def __post_init__(self):
        if self.k_suggestions < 1:
            raise ValidationError("k_suggestions must be >= 1")

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "name": self.name,
            "dictionary_id": self.dictionary_id,
            "during_kind": self.during_kind.value,
            "assignment_policy": self.assignment_policy.to_dict(),
            "k_suggestions": self.k_suggestions,
            "suggestion_phases": sorted(p.value for p in self.suggestion_phases),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Experiment":
        return cls(
            experiment_id=data["experiment_id"],
            name=data["name"],
            dictionary_id=data["dictionary_id"],
            during_kind=DuringKind(data.get("during_kind", "BOTH")),
            assignment_policy=AssignmentPolicy.from_dict(data["assignment_policy"]),
            k_suggestions=data.get("k_suggestions", 3),
            suggestion_phases=frozenset(
                Phase(p) for p in data.get("suggestion_phases", ["PRE", "DURING", "POST"])
            ),
        )


@dataclass
class Session:
    """One participant run, pinned to a dictionary version for its lifetime."""

    session_id: str
    experiment_id: str
    participant_pseudonym: str
    suggestions_enabled: bool
    dictionary_id: str
    dictionary_version: int
    started_at: datetime
    state: SessionState = SessionState.CREATED

    def advance(self, new_state: SessionState) -> None:
        """Move the lifecycle forward; backward transitions are refused."""
        if SESSION_STATE_ORDER.index(new_state) < SESSION_STATE_ORDER.index(self.state):
            raise ValidationError(
                f"session state cannot go back from {self.state.value} to {new_state.value}"
            )
        self.state = new_state

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "experiment_id": self.experiment_id,
            "participant_pseudonym": self.participant_pseudonym,
            "suggestions_enabled": self.suggestions_enabled,
            "dictionary_id": self.dictionary_id,
            "dictionary_version": self.dictionary_version,
            "started_at": self.started_at.isoformat(),
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Session":
        return cls(
            session_id=data["session_id"],
            experiment_id=data["experiment_id"],
            participant_pseudonym=data["participant_pseudonym"],
            suggestions_enabled=data["suggestions_enabled"],
            dictionary_id=data["dictionary_id"],
            dictionary_version=data["dictionary_version"],
            started_at=datetime.fromisoformat(data["started_at"]),
            state=SessionState(data["state"]),
        )


@dataclass(frozen=True)
class FeedbackEvent:
    """An accepted or refused (term, point) pair feeding the position update."""

    term_id: str
    point: MoodPoint
    accepted: bool
    wall_clock: datetime
    dictionary_id: str

    def to_dict(self) -> dict:
        return {
            "term_id": self.term_id,
            "point": self.point.to_dict(),
            "accepted": self.accepted,
            "wall_clock": self.wall_clock.isoformat(),
            "dictionary_id": self.dictionary_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackEvent":
        return cls(
            term_id=data["term_id"],
            point=MoodPoint.from_dict(data["point"]),
            accepted=data["accepted"],
            wall_clock=datetime.fromisoformat(data["wall_clock"]),
            dictionary_id=data["dictionary_id"],
        )


@dataclass(frozen=True)
class Marker:
    """Timeline marker for synchronizing spots with external media or props.

    Markers may arrive out of order; ordering by t_ms happens at read time.
    """

    label: str
    t_ms: int
    session_id: Optional[str] = None
    experiment_id: Optional[str] = None

    def __post_init__(self):
        if (self.session_id is None) == (self.experiment_id is None):
            raise ValidationError("marker needs exactly one of session_id/experiment_id")
        if self.t_ms < 0:
            raise ValidationError("marker t_ms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "t_ms": self.t_ms,
            "session_id": self.session_id,
            "experiment_id": self.experiment_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Marker":
        return cls(
            label=data["label"],
            t_ms=data["t_ms"],
            session_id=data.get("session_id"),
            experiment_id=data.get("experiment_id"),
        )


@dataclass
class SuggestionLoopState:
    """Per-spot progress of the suggest / accept / refuse loop.

    The round the participant is currently deciding lives here, not on
    the SpotRecord: record rounds are appended only once settled, so the
    record invariants hold at every observable instant.
    """

    spot_id: str
    current_offer: tuple = ()
    remaining_excluded: set = field(default_factory=set)
    rounds_so_far: int = 0
    open: bool = False

    def to_dict(self) -> dict:
        return {
            "spot_id": self.spot_id,
            "current_offer": list(self.current_offer),
            "remaining_excluded": sorted(self.remaining_excluded),
            "rounds_so_far": self.rounds_so_far,
            "open": self.open,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SuggestionLoopState":
        return cls(
            spot_id=data["spot_id"],
            current_offer=tuple(data.get("current_offer", [])),
            remaining_excluded=set(data["remaining_excluded"]),
            rounds_so_far=data["rounds_so_far"],
            open=data["open"],
        )
