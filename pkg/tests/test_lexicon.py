"""Dictionary engine: closest terms, custom derivation, position updates."""

import json
import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sym.errors import NotFoundError, ValidationError
from sym.lexicon import (
    UpdateParams,
    concept_neighbors,
    custom_subset_violations,
    derive_custom_dictionary,
    dump_dictionary_file,
    folksonomy_update,
    interchange_document,
    load_dictionary_file,
    load_seed_dictionary,
    parse_interchange,
    suggest_terms,
    validate_dictionary,
)
from sym.model import FeedbackEvent, MoodPoint, distance
from tests.conftest import make_dictionary, make_term

NOW = datetime(2026, 1, 1, tzinfo=timezone.utc)


def feedback(term_id, valence, arousal, accepted=True, at=NOW, dictionary_id="dict"):
    return FeedbackEvent(
        term_id=term_id,
        point=MoodPoint(valence, arousal),
        accepted=accepted,
        wall_clock=at,
        dictionary_id=dictionary_id,
    )


def oracle_closest(dictionary, point, excluded, k):
    """Independent selection: integer squared distances, repeated min-extraction.

    Avoids both floating-point distance and Python's sort so it cannot
    share a bug with the implementation.
    """
    candidates = [t for t in dictionary.terms.values() if t.term_id not in excluded]
    picked = []
    while candidates and len(picked) < k:
        best = candidates[0]
        for term in candidates[1:]:
            d_best = (best.position.valence - point.valence) ** 2 + (
                best.position.arousal - point.arousal
            ) ** 2
            d_term = (term.position.valence - point.valence) ** 2 + (
                term.position.arousal - point.arousal
            ) ** 2
            if (d_term, term.text, term.term_id) < (d_best, best.text, best.term_id):
                best = term
        picked.append(best)
        candidates.remove(best)
    return picked


class TestSuggestTerms:
    def test_single_candidate(self):
        dictionary = make_dictionary([("A", 0, 0)])
        result = suggest_terms(dictionary, MoodPoint(50, 50), k=3)
        assert [t.term_id for t in result] == ["A"]

    def test_three_closest_of_five(self, five_term_dictionary):
        point = MoodPoint(1, 1)
        result = suggest_terms(five_term_dictionary, point, k=3)
        assert [t.term_id for t in result] == ["A", "B", "C"]
        dists = [distance(t.position, point) for t in result]
        assert dists == pytest.approx([1.41, 9.06, 19.03], abs=0.005)

    def test_exclusion_exhausts_candidates(self, five_term_dictionary):
        result = suggest_terms(
            five_term_dictionary, MoodPoint(1, 1), excluded={"A", "B", "C", "D", "E"}, k=3
        )
        assert result == []

    def test_ties_break_by_text_then_id(self):
        dictionary = make_dictionary(
            [
                make_term("t3", 0, 5, text="same"),
                make_term("t1", 5, 0, text="same"),
                make_term("t2", 0, -5, text="alpha"),
            ]
        )
        result = suggest_terms(dictionary, MoodPoint(0, 0), k=3)
        assert [t.term_id for t in result] == ["t2", "t1", "t3"]

    def test_k_must_be_positive(self, five_term_dictionary):
        with pytest.raises(ValidationError):
            suggest_terms(five_term_dictionary, MoodPoint(0, 0), k=0)

    def test_matches_oracle_on_random_inputs(self):
        rng = random.Random(1234)
        for _ in range(100):
            n = rng.randint(1, 64)
            dictionary = make_dictionary(
                [(f"t{i}", rng.randint(-100, 100), rng.randint(-100, 100)) for i in range(n)]
            )
            point = MoodPoint(rng.randint(-100, 100), rng.randint(-100, 100))
            excluded = {f"t{i}" for i in range(n) if rng.random() < 0.3}
            k = rng.randint(1, 5)
            got = suggest_terms(dictionary, point, excluded=excluded, k=k)
            want = oracle_closest(dictionary, point, excluded, k)
            assert [t.term_id for t in got] == [t.term_id for t in want]

    @given(
        st.integers(-100, 100),
        st.integers(-100, 100),
        st.integers(0, 255),
        st.integers(0, 255),
    )
    @settings(max_examples=80)
    def test_exclusion_is_monotone(self, v, a, small_mask, extra_mask):
        # Excluded terms never appear, and every previous result term that
        # stays eligible keeps its slot: larger exclusion sets can only
        # remove entries and append farther ones at the tail.
        dictionary = make_dictionary(
            [(f"t{i}", (i * 13) % 201 - 100, (i * 7) % 201 - 100) for i in range(8)]
        )
        point = MoodPoint(v, a)
        smaller = {f"t{i}" for i in range(8) if small_mask & (1 << i)}
        larger = smaller | {f"t{i}" for i in range(8) if extra_mask & (1 << i)}
        before = [t.term_id for t in suggest_terms(dictionary, point, excluded=smaller, k=4)]
        after = [t.term_id for t in suggest_terms(dictionary, point, excluded=larger, k=4)]
        assert not set(after) & larger
        survivors = [t for t in before if t not in larger]
        assert after[: len(survivors)] == survivors


class TestDeriveCustomDictionary:
    def test_identity_filter_copies_terms(self, five_term_dictionary):
        custom = derive_custom_dictionary(
            five_term_dictionary,
            keep=five_term_dictionary.term_ids(),
            context_label="music",
        )
        assert custom.term_ids() == five_term_dictionary.term_ids()
        assert custom.parent_id == five_term_dictionary.dictionary_id
        assert custom.version == 1
        for term_id, term in custom.terms.items():
            assert term.position == five_term_dictionary.terms[term_id].position

    def test_drops_noise_word(self):
        master = make_dictionary([("anger", -80, 70), ("calm", 60, -60), ("joy", 80, 50)])
        keep = master.term_ids() - {"anger"}
        custom = derive_custom_dictionary(master, keep=keep, context_label="music")
        assert "anger" not in custom.terms
        assert custom.term_ids() == {"calm", "joy"}
        assert "anger" in master.terms  # master untouched

    def test_single_term_override(self):
        master = make_dictionary([("A", 0, 0), ("B", 5, 5)])
        custom = derive_custom_dictionary(
            master,
            keep={"A"},
            overrides={"A": MoodPoint(12, -7)},
            context_label="museum",
        )
        assert list(custom.terms) == ["A"]
        assert custom.terms["A"].position == MoodPoint(12, -7)
        assert master.terms["A"].position == MoodPoint(0, 0)

    def test_unknown_keep_lists_offenders(self, five_term_dictionary):
        with pytest.raises(ValidationError) as err:
            derive_custom_dictionary(
                five_term_dictionary, keep={"A", "nope", "missing"}, context_label="x"
            )
        assert err.value.detail == ["missing", "nope"]

    def test_override_outside_keep_rejected(self, five_term_dictionary):
        with pytest.raises(ValidationError):
            derive_custom_dictionary(
                five_term_dictionary,
                keep={"A"},
                overrides={"B": MoodPoint(0, 0)},
                context_label="x",
            )

    def test_concepts_and_links_shrink_to_survivors(self):
        master = make_dictionary(
            [
                make_term("a1", 0, 0, concept_id="c1"),
                make_term("a2", 1, 1, concept_id="c1"),
                make_term("b1", 2, 2, concept_id="c2"),
                make_term("d1", 3, 3, concept_id="c3"),
            ],
            links=[("c1", "c2", 0.5), ("c2", "c3", 0.9)],
        )
        custom = derive_custom_dictionary(master, keep={"a1", "b1"}, context_label="x")
        assert set(custom.concepts) == {"c1", "c2"}
        assert custom.concepts["c1"].member_term_ids == frozenset({"a1"})
        assert [(l.concept_a, l.concept_b) for l in custom.links] == [("c1", "c2")]

    def test_subset_violation_detection(self, five_term_dictionary):
        stranger = make_dictionary([("Z", 0, 0)], dictionary_id="other")
        violations = custom_subset_violations(stranger, five_term_dictionary)
        assert [v.offender for v in violations] == ["Z"]
        assert all(v.code == "NOT_IN_MASTER" for v in violations)


class TestFolksonomyUpdate:
    def test_empty_feedback_is_noop(self, five_term_dictionary):
        result = folksonomy_update(five_term_dictionary, [], UpdateParams())
        assert result is five_term_dictionary

    def test_empty_feedback_with_bump_publishes_identical_next_version(
        self, five_term_dictionary
    ):
        result = folksonomy_update(
            five_term_dictionary, [], UpdateParams(), bump_on_empty=True
        )
        assert result.version == five_term_dictionary.version + 1
        assert {t.term_id: t.position for t in result.terms.values()} == {
            t.term_id: t.position for t in five_term_dictionary.terms.values()
        }

    def test_fixed_point_when_centroid_equals_position(self):
        for alpha in (0.1, 0.5, 1.0):
            dictionary = make_dictionary([("w", -40, 40)])
            events = [feedback("w", -40, 40) for _ in range(3)]
            result = folksonomy_update(
                dictionary, events, UpdateParams(alpha=alpha, min_samples=1)
            )
            assert result.terms["w"].position == MoodPoint(-40, 40)
            assert result.version == dictionary.version + 1

    def test_hand_computed_blend(self):
        # centroid of (10,0), (20,0), (0,6) is (10, 2); blending one fifth
        # of the way from (0, 0) gives (2, 0.4), stored as (2, 0).
        dictionary = make_dictionary([("w", 0, 0)])
        events = [feedback("w", 10, 0), feedback("w", 20, 0), feedback("w", 0, 6)]
        result = folksonomy_update(
            dictionary, events, UpdateParams(alpha=0.2, min_samples=3)
        )
        assert result.terms["w"].position == MoodPoint(2, 0)

    def test_below_min_samples_does_not_move(self):
        dictionary = make_dictionary([("w", 0, 0)])
        events = [feedback("w", 50, 50), feedback("w", 50, 50)]
        result = folksonomy_update(
            dictionary, events, UpdateParams(alpha=0.5, min_samples=3)
        )
        assert result.terms["w"].position == MoodPoint(0, 0)
        assert result.version == dictionary.version + 1

    def test_refusals_move_nothing(self):
        dictionary = make_dictionary([("w", 0, 0)])
        events = [feedback("w", 80, 80, accepted=False) for _ in range(10)]
        result = folksonomy_update(dictionary, events, UpdateParams(min_samples=1))
        assert result.terms["w"].position == MoodPoint(0, 0)

    def test_foreign_terms_rejected(self, five_term_dictionary):
        with pytest.raises(ValidationError) as err:
            folksonomy_update(five_term_dictionary, [feedback("ghost", 0, 0)])
        assert err.value.detail == ["ghost"]

    def test_count_window_keeps_most_recent_events(self):
        dictionary = make_dictionary([("w", 0, 0)])
        old = [feedback("w", -100, -100, at=NOW - timedelta(hours=i + 1)) for i in range(5)]
        new = [feedback("w", 10, 10, at=NOW) for _ in range(2)]
        result = folksonomy_update(
            dictionary, old + new, UpdateParams(alpha=1.0, min_samples=1, window=2)
        )
        assert result.terms["w"].position == MoodPoint(10, 10)

    def test_duration_window_measured_from_newest_event(self):
        dictionary = make_dictionary([("w", 0, 0)])
        stale = [feedback("w", -100, -100, at=NOW - timedelta(hours=10))]
        fresh = [feedback("w", 20, 20, at=NOW), feedback("w", 40, 40, at=NOW)]
        result = folksonomy_update(
            dictionary,
            stale + fresh,
            UpdateParams(alpha=1.0, min_samples=1, window=timedelta(hours=1)),
        )
        assert result.terms["w"].position == MoodPoint(30, 30)

    def test_term_set_concepts_links_preserved(self):
        dictionary = make_dictionary(
            [
                make_term("a", 0, 0, concept_id="c1"),
                make_term("b", 10, 10, concept_id="c2"),
            ],
            links=[("c1", "c2", 0.7)],
        )
        events = [feedback("a", 100, 100) for _ in range(5)]
        result = folksonomy_update(dictionary, events, UpdateParams(min_samples=1))
        assert result.term_ids() == dictionary.term_ids()
        assert set(result.concepts) == set(dictionary.concepts)
        assert [(l.concept_a, l.concept_b, l.weight) for l in result.links] == [
            ("c1", "c2", 0.7)
        ]

    @given(
        st.integers(-100, 100),
        st.integers(-100, 100),
        st.lists(
            st.tuples(st.integers(-100, 100), st.integers(-100, 100)),
            min_size=1,
            max_size=20,
        ),
        st.sampled_from([0.1, 0.2, 0.5, 1.0]),
    )
    @settings(max_examples=80)
    def test_positions_stay_in_range(self, v, a, points, alpha):
        dictionary = make_dictionary([("w", v, a)])
        events = [feedback("w", pv, pa) for pv, pa in points]
        result = folksonomy_update(
            dictionary, events, UpdateParams(alpha=alpha, min_samples=1)
        )
        position = result.terms["w"].position
        assert -100 <= position.valence <= 100
        assert -100 <= position.arousal <= 100

    def test_contraction_reaches_fixed_point_near_target(self):
        # Repeated updates toward a fixed centroid stall two units short of
        # it: the blend step shrinks below what rounding can express.
        dictionary = make_dictionary([("w", 80, -80)])
        params = UpdateParams(alpha=0.2, min_samples=1)
        for _ in range(25):
            dictionary = folksonomy_update(
                dictionary, [feedback("w", -40, 40)], params
            )
        assert dictionary.terms["w"].position == MoodPoint(-38, 38)
        assert dictionary.version == 26

    def test_update_params_validation(self):
        with pytest.raises(ValidationError):
            UpdateParams(alpha=0.0)
        with pytest.raises(ValidationError):
            UpdateParams(alpha=1.5)
        with pytest.raises(ValidationError):
            UpdateParams(min_samples=0)


class TestConceptNeighbors:
    def net(self):
        return make_dictionary(
            [
                make_term("t1", 0, 0, concept_id="c1"),
                make_term("t2", 10, 0, concept_id="c2"),
                make_term("t3", 0, 10, concept_id="c3"),
            ],
            links=[("c1", "c2", 0.9), ("c1", "c3", 0.4)],
        )

    def test_no_links_gives_empty(self):
        dictionary = make_dictionary([make_term("t1", 0, 0, concept_id="c1")])
        assert concept_neighbors(dictionary, "c1") == []

    def test_min_weight_filters(self):
        result = concept_neighbors(self.net(), "c1", min_weight=0.5)
        assert [(c.concept_id, w) for c, w in result] == [("c2", 0.9)]

    def test_zero_threshold_sorts_by_weight(self):
        result = concept_neighbors(self.net(), "c1", min_weight=0.0)
        assert [(c.concept_id, w) for c, w in result] == [("c2", 0.9), ("c3", 0.4)]

    def test_links_are_symmetric(self):
        result = concept_neighbors(self.net(), "c2", min_weight=0.0)
        assert [(c.concept_id, w) for c, w in result] == [("c1", 0.9)]

    def test_unknown_concept(self):
        with pytest.raises(NotFoundError):
            concept_neighbors(self.net(), "ghost")


class TestValidateDictionary:
    def test_seed_dictionary_is_clean(self):
        seed = load_seed_dictionary()
        assert validate_dictionary(seed) == []
        assert len(seed.terms) >= 40

    def test_duplicate_text_and_class_flagged(self):
        doc = make_dictionary(
            [make_term("t1", 0, 0, text="calm"), make_term("t2", 5, 5, text="calm")]
        ).to_dict()
        violations = validate_dictionary(doc)
        assert [v.code for v in violations] == ["DUPLICATE_TERM"]

    def test_out_of_range_position_in_raw_document(self):
        doc = make_dictionary([("t1", 0, 0)]).to_dict()
        doc["terms"][0]["arousal"] = 200
        violations = validate_dictionary(doc)
        assert [v.code for v in violations] == ["RANGE"]

    def test_parse_rejects_bad_document(self):
        doc = make_dictionary([("t1", 0, 0)]).to_dict()
        doc["terms"][0]["valence"] = 999
        with pytest.raises(ValidationError):
            parse_interchange(doc)

    def test_missing_top_level_fields_flagged(self):
        violations = validate_dictionary({"dictionary_id": "x", "terms": []})
        assert [v.code for v in violations] == ["MISSING_FIELD"]
        assert "context_label" in violations[0].message
        violations = validate_dictionary({"context_label": "x", "terms": {}})
        assert sorted(v.code for v in violations) == [
            "MISSING_FIELD",
            "MISSING_FIELD",
        ]

    def test_malformed_entries_become_violations_not_crashes(self):
        base = {"dictionary_id": "x", "context_label": "c", "concepts": [], "links": []}
        no_id = validate_dictionary({**base, "terms": [{"text": "calm"}]})
        assert [v.code for v in no_id] == ["MISSING_FIELD"]
        assert "term" in no_id[0].message
        not_objects = validate_dictionary(
            {**base, "terms": ["calm"], "concepts": [7], "links": [None]}
        )
        assert [v.code for v in not_objects] == ["MISSING_FIELD"] * 3

    def test_empty_term_list_is_legal(self):
        # derive_custom_dictionary with an empty keep produces exactly this
        doc = {
            "dictionary_id": "empty",
            "context_label": "nothing yet",
            "parent_id": None,
            "terms": [],
            "concepts": [],
            "links": [],
        }
        assert validate_dictionary(doc) == []
        assert parse_interchange(doc).terms == {}

    def test_interchange_file_round_trip(self, tmp_path, five_term_dictionary):
        path = tmp_path / "dict.json"
        dump_dictionary_file(five_term_dictionary, path)
        raw = json.loads(path.read_text("utf-8"))
        assert "version" not in raw
        loaded = load_dictionary_file(path, version=7)
        assert loaded.version == 7
        assert loaded.term_ids() == five_term_dictionary.term_ids()
        assert interchange_document(loaded) == interchange_document(five_term_dictionary)

    def test_seed_covers_lexical_classes(self):
        seed = load_seed_dictionary()
        classes = {t.lexical_class.value for t in seed.terms.values()}
        assert {"ADJECTIVE", "NOUN", "VERB", "EXPRESSION"} <= classes
