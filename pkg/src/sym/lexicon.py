"""Dictionary engine: closest-term lookup, custom dictionaries, concept net,
and the feedback-driven position update.

Every operation here is deterministic and leaves its input dictionary
untouched; mutations come back as a new Dictionary object.
"""

import json
from dataclasses import dataclass
from datetime import timedelta
from importlib import resources
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Union

from sym.errors import NotFoundError, ValidationError
from sym.model import (
    COORD_MAX,
    COORD_MIN,
    Concept,
    ConceptLink,
    Dictionary,
    FeedbackEvent,
    LexicalClass,
    MoodPoint,
    MoodTerm,
    clamp_point,
    distance,
)

SEED_DICTIONARY_RESOURCE = "seed_dictionary.json"


@dataclass(frozen=True)
class UpdateParams:
    """Tuning for the periodic position update.

    alpha is the blend weight toward the feedback centroid; min_samples is
    how many accepted events a term needs before it moves; window limits
    which events count (None = all given, int = the most recent n events,
    timedelta = trailing duration measured from the newest event).
    """

    alpha: float = 0.2
    min_samples: int = 5
    window: Union[int, timedelta, None] = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.min_samples < 1:
            raise ValidationError(f"min_samples must be >= 1, got {self.min_samples}")


@dataclass(frozen=True)
class Violation:
    """One dictionary invariant breach, naming the offending id."""

    code: str
    offender: str
    message: str

    def __str__(self):
        return f"{self.code}({self.offender}): {self.message}"


def suggest_terms(
    dictionary: Dictionary,
    point: MoodPoint,
    excluded: Iterable[str] = (),
    k: int = 3,
) -> list:
    """The k closest terms to `point`, never offering an excluded term.

    Ordered by non-decreasing distance, ties broken by ascending Unicode
    code-point order of the text, then by term id, so the result is
    deterministic for a fixed (version, point, excluded, k).
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    excluded = set(excluded)
    candidates = [
        term for term_id, term in dictionary.terms.items() if term_id not in excluded
    ]
    candidates.sort(key=lambda t: (distance(t.position, point), t.text, t.term_id))
    return candidates[:k]


def derive_custom_dictionary(
    master: Dictionary,
    keep: Iterable[str],
    overrides: Optional[dict] = None,
    context_label: str = "",
    dictionary_id: Optional[str] = None,
) -> Dictionary:
    """Cut a context dictionary out of the master.

    Keeps exactly the `keep` terms, applying position overrides where
    given; concepts and links shrink to the surviving members. The master
    is untouched and the result starts at version 1 with the master as
    parent.
    """
    overrides = overrides or {}
    keep = set(keep)
    missing = sorted(keep - master.term_ids())
    if missing:
        raise ValidationError(
            f"keep lists terms absent from master {master.dictionary_id}",
            detail=missing,
        )
    stray = sorted(set(overrides) - keep)
    if stray:
        raise ValidationError("overrides reference terms outside keep", detail=stray)

    terms = {}
    for term_id in keep:
        term = master.terms[term_id]
        if term_id in overrides:
            term = MoodTerm(
                term_id=term.term_id,
                text=term.text,
                lexical_class=term.lexical_class,
                concept_id=term.concept_id,
                position=overrides[term_id],
            )
        terms[term_id] = term

    concepts = {}
    for concept in master.concepts.values():
        members = frozenset(concept.member_term_ids & keep)
        if members:
            concepts[concept.concept_id] = Concept(
                concept_id=concept.concept_id,
                label=concept.label,
                member_term_ids=members,
            )
    links = [
        link
        for link in master.links
        if link.concept_a in concepts and link.concept_b in concepts
    ]
    return Dictionary(
        dictionary_id=dictionary_id or f"{master.dictionary_id}:{context_label}",
        version=1,
        context_label=context_label,
        parent_id=master.dictionary_id,
        terms=terms,
        concepts=concepts,
        links=links,
    )


def _windowed(feedback: list, window: Union[int, timedelta, None]) -> list:
    if window is None or not feedback:
        return list(feedback)
    ordered = sorted(feedback, key=lambda e: e.wall_clock)
    if isinstance(window, timedelta):
        horizon = ordered[-1].wall_clock - window
        return [e for e in ordered if e.wall_clock >= horizon]
    return ordered[-window:]


def folksonomy_update(
    dictionary: Dictionary,
    feedback: list,
    params: Optional[UpdateParams] = None,
    bump_on_empty: bool = False,
) -> Dictionary:
    """Blend term positions toward the centroid of their accepted spots.

    A term moves only when it gathered at least min_samples accepted
    events inside the window; its new position is
    clamp_point((1 - alpha) * old + alpha * centroid). Refused events are
    kept in the log but move nothing. With no events in the window the
    call is a no-op and returns the input version unchanged (set
    bump_on_empty to publish an identical version + 1 instead).
    """
    params = params or UpdateParams()
    foreign = sorted({e.term_id for e in feedback} - dictionary.term_ids())
    if foreign:
        raise ValidationError(
            f"feedback references terms absent from {dictionary.dictionary_id}",
            detail=foreign,
        )

    effective = _windowed(feedback, params.window)
    if not effective:
        if not bump_on_empty:
            return dictionary
        return Dictionary(
            dictionary_id=dictionary.dictionary_id,
            version=dictionary.version + 1,
            context_label=dictionary.context_label,
            parent_id=dictionary.parent_id,
            terms=dict(dictionary.terms),
            concepts=dict(dictionary.concepts),
            links=list(dictionary.links),
        )

    accepted_points: dict = {}
    for event in effective:
        if event.accepted:
            accepted_points.setdefault(event.term_id, []).append(event.point)

    terms = dict(dictionary.terms)
    for term_id, points in accepted_points.items():
        if len(points) < params.min_samples:
            continue
        old = terms[term_id]
        centroid_v = fmean(p.valence for p in points)
        centroid_a = fmean(p.arousal for p in points)
        new_position = clamp_point(
            (1 - params.alpha) * old.position.valence + params.alpha * centroid_v,
            (1 - params.alpha) * old.position.arousal + params.alpha * centroid_a,
        )
        terms[term_id] = MoodTerm(
            term_id=old.term_id,
            text=old.text,
            lexical_class=old.lexical_class,
            concept_id=old.concept_id,
            position=new_position,
        )

    return Dictionary(
        dictionary_id=dictionary.dictionary_id,
        version=dictionary.version + 1,
        context_label=dictionary.context_label,
        parent_id=dictionary.parent_id,
        terms=terms,
        concepts=dict(dictionary.concepts),
        links=list(dictionary.links),
    )


def concept_neighbors(
    dictionary: Dictionary, concept_id: str, min_weight: float = 0.0
) -> list:
    """Concepts linked to concept_id with weight >= min_weight.

    Returns (Concept, weight) pairs, heaviest first, ties by concept id.
    """
    if concept_id not in dictionary.concepts:
        raise NotFoundError(f"unknown concept {concept_id}")
    neighbors = []
    for link in dictionary.links:
        if concept_id == link.concept_a:
            other = link.concept_b
        elif concept_id == link.concept_b:
            other = link.concept_a
        else:
            continue
        if link.weight >= min_weight:
            neighbors.append((dictionary.concepts[other], link.weight))
    neighbors.sort(key=lambda pair: (-pair[1], pair[0].concept_id))
    return neighbors


def _document_violations(doc: dict) -> list:
    violations = []
    where = doc.get("dictionary_id")
    where = where if isinstance(where, str) else "<document>"
    if not doc.get("dictionary_id") or not isinstance(doc["dictionary_id"], str):
        violations.append(
            Violation("MISSING_FIELD", where, "dictionary_id must be a non-empty string")
        )
    if not doc.get("context_label") or not isinstance(doc["context_label"], str):
        violations.append(
            Violation("MISSING_FIELD", where, "context_label must be a non-empty string")
        )
    for key in ("terms", "concepts", "links"):
        if not isinstance(doc.get(key, []), list):
            violations.append(
                Violation("MISSING_FIELD", where, f"{key} must be an array")
            )
    if any(v.code == "MISSING_FIELD" for v in violations):
        return violations  # per-entry checks assume the containers exist

    terms = doc.get("terms", [])
    concepts = doc.get("concepts", [])
    links = doc.get("links", [])

    entry_shapes_ok = True
    for label, entries in (("terms", terms), ("concepts", concepts), ("links", links)):
        for entry in entries:
            if not isinstance(entry, dict):
                violations.append(
                    Violation("MISSING_FIELD", where, f"{label} entries must be objects")
                )
                entry_shapes_ok = False
            elif label != "links" and not (
                isinstance(entry.get("id"), str) and entry["id"]
            ):
                violations.append(
                    Violation(
                        "MISSING_FIELD", where, f"every {label[:-1]} needs a string id"
                    )
                )
                entry_shapes_ok = False
    if not entry_shapes_ok:
        return violations  # per-entry checks index into these shapes

    concept_ids = set()
    for concept in concepts:
        if concept["id"] in concept_ids:
            violations.append(
                Violation("DUPLICATE_CONCEPT_ID", concept["id"], "concept id used twice")
            )
        concept_ids.add(concept["id"])

    term_ids = set()
    seen_text_class = {}
    for term in terms:
        tid = term["id"]
        if tid in term_ids:
            violations.append(Violation("DUPLICATE_TERM_ID", tid, "term id used twice"))
        term_ids.add(tid)

        if not term.get("text"):
            violations.append(Violation("EMPTY_TEXT", tid, "term text is empty"))
        try:
            LexicalClass(term.get("lexical_class"))
        except ValueError:
            violations.append(
                Violation(
                    "BAD_LEXICAL_CLASS",
                    tid,
                    f"unknown lexical class {term.get('lexical_class')!r}",
                )
            )
        key = (term.get("text"), term.get("lexical_class"))
        if key in seen_text_class:
            violations.append(
                Violation(
                    "DUPLICATE_TERM",
                    tid,
                    f"(text, lexical_class) {key!r} already used by {seen_text_class[key]}",
                )
            )
        else:
            seen_text_class[key] = tid

        for axis in ("valence", "arousal"):
            value = term.get(axis)
            if not isinstance(value, int) or not COORD_MIN <= value <= COORD_MAX:
                violations.append(
                    Violation(
                        "RANGE",
                        tid,
                        f"{axis} {value!r} outside [{COORD_MIN}, {COORD_MAX}]",
                    )
                )
        if term.get("concept_id") not in concept_ids:
            violations.append(
                Violation(
                    "UNKNOWN_CONCEPT",
                    tid,
                    f"concept {term.get('concept_id')!r} not declared",
                )
            )

    seen_pairs = set()
    for link in links:
        a, b, weight = link.get("a"), link.get("b"), link.get("weight")
        name = f"{a}--{b}"
        if a == b:
            violations.append(Violation("SELF_LINK", name, "link joins a concept to itself"))
        for end in (a, b):
            if end not in concept_ids:
                violations.append(
                    Violation("LINK_ENDPOINT", name, f"link endpoint {end!r} not declared")
                )
        if not isinstance(weight, (int, float)) or not 0 < weight <= 1:
            violations.append(
                Violation("LINK_WEIGHT", name, f"weight {weight!r} outside (0, 1]")
            )
        pair = frozenset((a, b))
        if pair in seen_pairs:
            violations.append(
                Violation("DUPLICATE_LINK", name, "unordered pair linked twice")
            )
        seen_pairs.add(pair)

    return violations


def validate_dictionary(candidate: Union[Dictionary, dict]) -> list:
    """Check every dictionary invariant; empty list iff all hold.

    Accepts either a Dictionary object or a raw interchange document, so
    out-of-range positions in an input file surface as RANGE violations
    instead of blowing up during parsing.
    """
    if isinstance(candidate, Dictionary):
        violations = _document_violations(candidate.to_dict())
        for concept in candidate.concepts.values():
            for term_id in concept.member_term_ids:
                term = candidate.terms.get(term_id)
                if term is None or term.concept_id != concept.concept_id:
                    violations.append(
                        Violation(
                            "MEMBERSHIP",
                            concept.concept_id,
                            f"member {term_id} does not point back to this concept",
                        )
                    )
        return violations
    return _document_violations(candidate)


def custom_subset_violations(candidate: Dictionary, master: Dictionary) -> list:
    """A custom dictionary may only contain term ids its master has."""
    return [
        Violation("NOT_IN_MASTER", term_id, f"term absent from master {master.dictionary_id}")
        for term_id in sorted(candidate.term_ids() - master.term_ids())
    ]


def parse_interchange(data: dict, version: int = 1) -> Dictionary:
    """Build a Dictionary from an interchange document, rejecting on any violation."""
    violations = validate_dictionary(data)
    if violations:
        raise ValidationError(
            f"dictionary document has {len(violations)} violation(s)",
            detail=[str(v) for v in violations],
        )
    return Dictionary.from_dict(data, version=version)


def interchange_document(dictionary: Dictionary) -> dict:
    """The file form of a dictionary: interchange fields, no version number."""
    doc = dictionary.to_dict()
    doc.pop("version", None)
    return doc


def load_dictionary_file(path: Union[str, Path], version: int = 1) -> Dictionary:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_interchange(json.load(handle), version=version)


def dump_dictionary_file(dictionary: Dictionary, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(interchange_document(dictionary), handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def load_seed_dictionary() -> Dictionary:
    """The shipped starter dictionary (editable fixture, not ground truth)."""
    text = resources.files("sym.data").joinpath(SEED_DICTIONARY_RESOURCE).read_text("utf-8")
    return parse_interchange(json.loads(text))
