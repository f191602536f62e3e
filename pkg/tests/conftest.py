"""Shared fixtures: tiny dictionaries and fully deterministic services."""

import itertools
from datetime import datetime, timedelta, timezone

# One line per acceptance criterion, echoed after the run so the verdicts
# survive pytest's output capture (see test_acceptance.py).
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)

import pytest

from sym.lexicon import UpdateParams
from sym.model import (
    Concept,
    ConceptLink,
    Dictionary,
    LexicalClass,
    MoodPoint,
    MoodTerm,
)
from sym.service import SymService

EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)


def make_term(term_id, valence, arousal, concept_id="c", text=None, lexical_class=None):
    return MoodTerm(
        term_id=term_id,
        text=text if text is not None else term_id,
        lexical_class=lexical_class or LexicalClass.ADJECTIVE,
        concept_id=concept_id,
        position=MoodPoint(valence=valence, arousal=arousal),
    )


def make_dictionary(terms, dictionary_id="dict", version=1, links=(), context_label="test"):
    """Build a dictionary from (id, v, a) tuples or MoodTerm objects."""
    built = {}
    for spec in terms:
        term = spec if isinstance(spec, MoodTerm) else make_term(*spec)
        built[term.term_id] = term
    concepts = {}
    for term in built.values():
        concepts.setdefault(term.concept_id, set()).add(term.term_id)
    return Dictionary(
        dictionary_id=dictionary_id,
        version=version,
        context_label=context_label,
        terms=built,
        concepts={
            cid: Concept(concept_id=cid, label=cid, member_term_ids=frozenset(members))
            for cid, members in concepts.items()
        },
        links=[ConceptLink(concept_a=a, concept_b=b, weight=w) for a, b, w in links],
    )


@pytest.fixture
def five_term_dictionary():
    """The A..E layout used by the closest-term examples."""
    return make_dictionary(
        [
            ("A", 0, 0),
            ("B", 10, 0),
            ("C", 0, 20),
            ("D", -50, -50),
            ("E", 100, 100),
        ]
    )


def interchange_doc(dictionary):
    doc = dictionary.to_dict()
    doc.pop("version", None)
    return doc


def deterministic_service(data_dir=None, **kwargs):
    """A service whose ids and timestamps are reproducible run to run."""
    counter = itertools.count(1)
    ticks = itertools.count(0)
    kwargs.setdefault("id_factory", lambda: f"{next(counter):04d}")
    kwargs.setdefault("clock", lambda: EPOCH + timedelta(seconds=next(ticks)))
    kwargs.setdefault("update_params", UpdateParams(alpha=0.2, min_samples=5))
    return SymService(data_dir=data_dir, **kwargs)


@pytest.fixture
def service(tmp_path):
    svc = deterministic_service(data_dir=tmp_path / "data")
    yield svc
    svc.close()


@pytest.fixture
def memory_service():
    svc = deterministic_service()
    yield svc
    svc.close()
