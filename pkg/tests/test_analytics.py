"""Mood deltas, per-stimulus dispersion, and the researcher cloud view."""

import math

import pytest

from sym.analytics import (
    DispersionStat,
    cloud_points,
    experiment_stats,
    mood_delta,
    stimulus_dispersion,
)
from sym.errors import IncompleteSessionError, NotFoundError


@pytest.fixture
def experiment(memory_service):
    exp = memory_service.create_experiment(name="n", dictionary_id="master-en")
    return memory_service, exp["experiment"]["experiment_id"]


def run_session(service, experiment_id, participant, pre, post=None, during=()):
    sid = service.create_session(experiment_id, participant)["session"]["session_id"]
    spot = service.submit_spot(sid, "PRE", "SELF", pre[0], pre[1], 0)
    if spot["open"]:
        service.decide_suggestion(spot["spot"]["spot_id"], "DECLINE")
    t = 100
    for kind, x, y, stimulus in during:
        spot = service.submit_spot(
            sid, "DURING", kind, x, y, t, stimulus_id=stimulus
        )
        if spot["open"]:
            service.decide_suggestion(spot["spot"]["spot_id"], "DECLINE")
        t += 100
    if post is not None:
        spot = service.submit_spot(sid, "POST", "SELF", post[0], post[1], t)
        if spot["open"]:
            service.decide_suggestion(spot["spot"]["spot_id"], "DECLINE")
    return sid


class TestMoodDelta:
    def test_post_minus_pre(self, experiment):
        service, experiment_id = experiment
        sid = run_session(service, experiment_id, "p1", pre=(-20, 30), post=(40, -10))
        assert mood_delta(service.state, sid) == (60, -40)

    def test_identical_endpoints_give_zero(self, experiment):
        service, experiment_id = experiment
        sid = run_session(service, experiment_id, "p1", pre=(15, -5), post=(15, -5))
        assert mood_delta(service.state, sid) == (0, 0)

    def test_swapping_endpoints_negates(self, experiment):
        service, experiment_id = experiment
        one = run_session(service, experiment_id, "p1", pre=(-20, 30), post=(40, -10))
        two = run_session(service, experiment_id, "p2", pre=(40, -10), post=(-20, 30))
        dv1, da1 = mood_delta(service.state, one)
        dv2, da2 = mood_delta(service.state, two)
        assert (dv1, da1) == (-dv2, -da2)

    def test_during_spots_do_not_contribute(self, experiment):
        service, experiment_id = experiment
        sid = run_session(
            service,
            experiment_id,
            "p1",
            pre=(0, 0),
            post=(10, 10),
            during=[("SELF", -90, -90, None), ("STIMULUS", 90, 90, "s1")],
        )
        assert mood_delta(service.state, sid) == (10, 10)

    def test_session_without_post_is_incomplete(self, experiment):
        service, experiment_id = experiment
        sid = run_session(service, experiment_id, "p1", pre=(0, 0))
        with pytest.raises(IncompleteSessionError):
            mood_delta(service.state, sid)

    def test_unknown_session_is_not_found(self, experiment):
        service, _ = experiment
        with pytest.raises(NotFoundError):
            mood_delta(service.state, "ghost")


class TestStimulusDispersion:
    def test_single_spot_has_zero_spread(self, experiment):
        service, experiment_id = experiment
        run_session(
            service,
            experiment_id,
            "p1",
            pre=(0, 0),
            post=(0, 0),
            during=[("STIMULUS", 30, -40, "track")],
        )
        stat = stimulus_dispersion(service.state, experiment_id, "track")
        assert stat.centroid == (30, -40)
        assert stat.mean_distance == 0.0
        assert stat.n == 1

    def test_two_participants_average_out(self, experiment):
        service, experiment_id = experiment
        run_session(
            service, experiment_id, "p1",
            pre=(0, 0), post=(0, 0), during=[("STIMULUS", 0, 0, "track")],
        )
        run_session(
            service, experiment_id, "p2",
            pre=(0, 0), post=(0, 0), during=[("STIMULUS", 0, 10, "track")],
        )
        stat = stimulus_dispersion(service.state, experiment_id, "track")
        assert stat.centroid == (0, 5)
        assert stat.mean_distance == pytest.approx(5.0, abs=1e-9)
        assert stat.n == 2

    def test_only_the_latest_spot_per_participant_counts(self, experiment):
        service, experiment_id = experiment
        run_session(
            service, experiment_id, "p1",
            pre=(0, 0), post=(0, 0),
            during=[("STIMULUS", -80, -80, "track"), ("STIMULUS", 20, 20, "track")],
        )
        stat = stimulus_dispersion(service.state, experiment_id, "track")
        assert stat.centroid == (20, 20)
        assert stat.n == 1

    def test_participant_order_does_not_matter(self, experiment):
        service, experiment_id = experiment
        points = [(10, 0), (-30, 40), (50, 50)]
        for i, (x, y) in enumerate(points):
            run_session(
                service, experiment_id, f"p{i}",
                pre=(0, 0), post=(0, 0), during=[("STIMULUS", x, y, "track")],
            )
        stat = stimulus_dispersion(service.state, experiment_id, "track")
        cx = sum(p[0] for p in points) / 3
        cy = sum(p[1] for p in points) / 3
        assert stat.centroid == pytest.approx((cx, cy))
        expected = sum(math.hypot(x - cx, y - cy) for x, y in points) / 3
        assert stat.mean_distance == pytest.approx(expected, abs=1e-9)

    def test_mean_distance_is_never_negative(self, experiment):
        service, experiment_id = experiment
        import random

        rng = random.Random(42)
        for i in range(8):
            run_session(
                service, experiment_id, f"p{i}",
                pre=(0, 0), post=(0, 0),
                during=[
                    ("STIMULUS", rng.randint(-100, 100), rng.randint(-100, 100), "track")
                ],
            )
        stat = stimulus_dispersion(service.state, experiment_id, "track")
        assert stat.mean_distance >= 0
        assert stat.n == 8

    def test_unknown_stimulus_is_not_found(self, experiment):
        service, experiment_id = experiment
        with pytest.raises(NotFoundError):
            stimulus_dispersion(service.state, experiment_id, "ghost")

    def test_stat_serializes_for_the_api(self):
        stat = DispersionStat(centroid=(1.5, -2.0), mean_distance=3.25, n=4)
        assert stat.to_dict() == {
            "centroid": {"valence": 1.5, "arousal": -2.0},
            "mean_distance": 3.25,
            "n": 4,
        }


class TestCloud:
    def test_empty_experiment_has_no_points(self, experiment):
        service, experiment_id = experiment
        assert cloud_points(service.state, experiment_id) == []

    def test_unknown_experiment_is_not_found(self, experiment):
        service, _ = experiment
        with pytest.raises(NotFoundError):
            cloud_points(service.state, "ghost")

    def test_points_sorted_by_participant_then_time(self, experiment):
        service, experiment_id = experiment
        run_session(
            service, experiment_id, "zoe",
            pre=(1, 1), post=(2, 2), during=[("STIMULUS", 3, 3, "s")],
        )
        run_session(
            service, experiment_id, "abe",
            pre=(4, 4), post=(5, 5),
        )
        points = cloud_points(service.state, experiment_id)
        keys = [(p["participant_pseudonym"], p["t_ms"]) for p in points]
        assert keys == sorted(keys)
        assert keys[0][0] == "abe"
        assert len(points) == 5

    def test_phase_and_kind_filters(self, experiment):
        service, experiment_id = experiment
        run_session(
            service, experiment_id, "p1",
            pre=(0, 0), post=(9, 9),
            during=[("SELF", 1, 1, None), ("STIMULUS", 2, 2, "s")],
        )
        assert len(cloud_points(service.state, experiment_id)) == 4
        pre_only = cloud_points(service.state, experiment_id, phase="PRE")
        assert [p["phase"] for p in pre_only] == ["PRE"]
        stimulus_only = cloud_points(service.state, experiment_id, kind="STIMULUS")
        assert [p["stimulus_id"] for p in stimulus_only] == ["s"]
        both = cloud_points(
            service.state, experiment_id, phase="DURING", kind="SELF"
        )
        assert len(both) == 1 and both[0]["point"] == {"valence": 1, "arousal": 1}

    def test_entry_shape_carries_what_the_ui_needs(self, experiment):
        service, experiment_id = experiment
        sid = run_session(service, experiment_id, "p1", pre=(7, -7), post=(0, 0))
        (entry, _) = cloud_points(service.state, experiment_id)
        assert entry == {
            "participant_pseudonym": "p1",
            "session_id": sid,
            "phase": "PRE",
            "kind": "SELF",
            "stimulus_id": None,
            "point": {"valence": 7, "arousal": -7},
            "t_ms": 0,
            "chosen_term": None,
        }

    def test_chosen_term_text_is_included(self, memory_service):
        exp = memory_service.create_experiment(name="n", dictionary_id="master-en")
        experiment_id = exp["experiment"]["experiment_id"]
        sid = memory_service.create_session(experiment_id, "p1")["session"][
            "session_id"
        ]
        spot = memory_service.submit_spot(sid, "PRE", "SELF", 30, 40, 0)
        chosen = spot["round"]["offered"][0]
        memory_service.decide_suggestion(
            spot["spot"]["spot_id"], "ACCEPT", term_id=chosen["term_id"]
        )
        (entry,) = cloud_points(memory_service.state, experiment_id)
        assert entry["chosen_term"] == chosen["text"]


class TestExperimentStats:
    def test_full_rollup(self, experiment):
        service, experiment_id = experiment
        run_session(
            service, experiment_id, "p1",
            pre=(-20, 30), post=(40, -10), during=[("STIMULUS", 0, 0, "track")],
        )
        run_session(
            service, experiment_id, "p2",
            pre=(0, 0), post=(0, 0), during=[("STIMULUS", 0, 10, "track")],
        )
        stats = experiment_stats(service.state, experiment_id)
        assert stats["experiment_id"] == experiment_id
        assert stats["sessions"] == 2
        assert stats["spots"] == 6
        assert sorted(
            stats["mood_deltas"].values(), key=lambda d: d["valence"]
        ) == [
            {"valence": 0, "arousal": 0},
            {"valence": 60, "arousal": -40},
        ]
        track = stats["stimuli"]["track"]
        assert track["centroid"] == {"valence": 0.0, "arousal": 5.0}
        assert track["n"] == 2
        assert stats["std_valence"] is not None

    def test_empty_experiment_rolls_up_to_zeroes(self, experiment):
        service, experiment_id = experiment
        stats = experiment_stats(service.state, experiment_id)
        assert stats["sessions"] == 0
        assert stats["spots"] == 0
        assert stats["mood_deltas"] == {}
        assert stats["stimuli"] == {}
        assert stats["std_valence"] is None
