"""Read-only analyses over the materialized store state.

Everything here works on integer spot coordinates and reports floats
without rounding; nothing in this module mutates state.
"""

import math
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import Optional

from sym.errors import IncompleteSessionError, NotFoundError
from sym.model import Phase, SpotKind

__all__ = [
    "DispersionStat",
    "mood_delta",
    "stimulus_dispersion",
    "cloud_points",
    "experiment_stats",
]


@dataclass(frozen=True)
class DispersionStat:
    """Agreement summary for one stimulus: where answers cluster and how tightly."""

    centroid: tuple  # (valence, arousal) as floats
    mean_distance: float
    n: int

    def to_dict(self) -> dict:
        return {
            "centroid": {"valence": self.centroid[0], "arousal": self.centroid[1]},
            "mean_distance": self.mean_distance,
            "n": self.n,
        }


def _session_spots(state, session_id: str) -> list:
    return [state.spots[sid] for sid in state.session_spots.get(session_id, [])]


def mood_delta(state, session_id: str) -> tuple:
    """Component-wise POST minus PRE self-report for one session.

    Raises IncompleteSessionError until the session has both its PRE and
    its POST self spot.
    """
    if session_id not in state.sessions:
        raise NotFoundError(f"unknown session {session_id}")
    spots = _session_spots(state, session_id)
    pre = [s for s in spots if s.phase == Phase.PRE and s.kind == SpotKind.SELF]
    post = [s for s in spots if s.phase == Phase.POST and s.kind == SpotKind.SELF]
    if len(pre) != 1 or len(post) != 1:
        raise IncompleteSessionError(
            f"session {session_id} needs exactly one PRE and one POST self spot "
            f"(has {len(pre)} and {len(post)})"
        )
    return (
        post[0].point.valence - pre[0].point.valence,
        post[0].point.arousal - pre[0].point.arousal,
    )


def _experiment_sessions(state, experiment_id: str) -> list:
    if experiment_id not in state.experiments:
        raise NotFoundError(f"unknown experiment {experiment_id}")
    return [
        s for s in state.sessions.values() if s.experiment_id == experiment_id
    ]


def stimulus_dispersion(state, experiment_id: str, stimulus_id: str) -> DispersionStat:
    """How much participants agree about one stimulus.

    Takes each participant's most recent spot for the stimulus (submission
    order decides recency), then reports the centroid of those points and
    the mean euclidean distance to it.
    """
    latest: dict = {}
    for session in _experiment_sessions(state, experiment_id):
        for spot in _session_spots(state, session.session_id):
            if spot.kind == SpotKind.STIMULUS and spot.stimulus_id == stimulus_id:
                latest[session.participant_pseudonym] = spot.point
    if not latest:
        raise NotFoundError(
            f"no spots for stimulus {stimulus_id} in experiment {experiment_id}"
        )
    points = list(latest.values())
    centroid_v = fmean(p.valence for p in points)
    centroid_a = fmean(p.arousal for p in points)
    mean_distance = fmean(
        math.hypot(p.valence - centroid_v, p.arousal - centroid_a) for p in points
    )
    return DispersionStat(
        centroid=(centroid_v, centroid_a),
        mean_distance=mean_distance,
        n=len(points),
    )


def cloud_points(
    state,
    experiment_id: str,
    phase: Optional[Phase] = None,
    kind: Optional[SpotKind] = None,
) -> list:
    """Every matching spot of an experiment, flattened for plotting.

    Entries are ordered by (participant_pseudonym, t_ms); phase and kind
    narrow the selection when given.
    """
    entries = []
    for session in _experiment_sessions(state, experiment_id):
        for spot in _session_spots(state, session.session_id):
            if phase is not None and spot.phase != phase:
                continue
            if kind is not None and spot.kind != kind:
                continue
            chosen = state.term_text(
                session, spot.dictionary_version, spot.chosen_term_id
            )
            entries.append(
                {
                    "participant_pseudonym": session.participant_pseudonym,
                    "session_id": session.session_id,
                    "phase": spot.phase.value,
                    "kind": spot.kind.value,
                    "stimulus_id": spot.stimulus_id,
                    "point": spot.point.to_dict(),
                    "t_ms": spot.t_ms,
                    "chosen_term": chosen or None,
                }
            )
    entries.sort(key=lambda e: (e["participant_pseudonym"], e["t_ms"]))
    return entries


def experiment_stats(state, experiment_id: str) -> dict:
    """Summary a researcher reads after a run: deltas, dispersion, spread.

    Per-axis spread is the population standard deviation; stimuli are
    summarized with the same centroid/mean-distance pair the dispersion
    analysis reports, plus per-axis deviations of the contributing points.
    """
    experiment = state.experiments.get(experiment_id)
    if experiment is None:
        raise NotFoundError(f"unknown experiment {experiment_id}")
    sessions = _experiment_sessions(state, experiment_id)

    deltas = {}
    all_points = []
    stimulus_ids = set()
    for session in sessions:
        try:
            dv, da = mood_delta(state, session.session_id)
            deltas[session.session_id] = {"valence": dv, "arousal": da}
        except IncompleteSessionError:
            pass
        for spot in _session_spots(state, session.session_id):
            all_points.append(spot.point)
            if spot.stimulus_id is not None:
                stimulus_ids.add(spot.stimulus_id)

    stimuli = {}
    for stimulus_id in sorted(stimulus_ids):
        stat = stimulus_dispersion(state, experiment_id, stimulus_id)
        stimuli[stimulus_id] = stat.to_dict()

    def axis_std(values: list) -> Optional[float]:
        return pstdev(values) if values else None

    return {
        "experiment_id": experiment_id,
        "name": experiment.name,
        "sessions": len(sessions),
        "spots": len(all_points),
        "mood_deltas": deltas,
        "stimuli": stimuli,
        "std_valence": axis_std([p.valence for p in all_points]),
        "std_arousal": axis_std([p.arousal for p in all_points]),
    }
