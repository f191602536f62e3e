"""Command layer tying the dictionary engine to the durable store.

Every mutation is validated here, turned into an event group, appended to
the log, and applied to in-memory state; reads compose views over that
state. All writes go through one lock, so the log stays a serial history.
"""

import copy
import random
import threading
import uuid
from dataclasses import replace
from datetime import timedelta
from typing import Iterable, Optional, Union

from sym import analytics, lexicon
from sym.errors import (
    BusyError,
    ConflictError,
    IncompleteSessionError,
    NotFoundError,
    ProtocolError,
    ValidationError,
)
from sym.lexicon import UpdateParams
from sym.model import (
    AssignmentPolicy,
    Dictionary,
    DuringKind,
    Experiment,
    Marker,
    Phase,
    PolicyKind,
    Session,
    SessionState,
    SpotKind,
    SpotRecord,
    clamp_point,
    utc_now,
)
from sym.store import Event, EventLog, StoreState, export_csv, replay


def assignment_enabled(policy: AssignmentPolicy, index: int) -> bool:
    """Whether the session at 0-based creation `index` gets suggestions.

    ALTERNATE turns even indices on; RANDOM draws a per-index coin from a
    generator seeded with "{seed}:{index}", so the assignment of any index
    is reproducible across processes and independent of arrival order.
    """
    if policy.kind == PolicyKind.ALTERNATE:
        return index % 2 == 0
    if policy.kind == PolicyKind.RANDOM:
        return random.Random(f"{policy.seed}:{index}").random() < 0.5
    if policy.kind == PolicyKind.ALL_ON:
        return True
    return False


def _coerce(enum_cls, value, field: str):
    try:
        return enum_cls(value)
    except ValueError:
        raise ValidationError(
            f"{field} must be one of {[m.value for m in enum_cls]}, got {value!r}"
        )


def _require_time(t_ms, field: str = "t_ms") -> int:
    if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
        raise ValidationError(f"{field} must be a non-negative integer, got {t_ms!r}")
    return t_ms


class SymService:
    """Single-writer facade over the event log and materialized state.

    Mutators take an optional idempotency_key; retrying a key that already
    committed changes nothing and answers with the original response.
    """

    def __init__(
        self,
        data_dir=None,
        default_k: int = 3,
        update_params: Optional[UpdateParams] = None,
        clock=utc_now,
        id_factory=None,
        seed_master: bool = True,
    ):
        self.log = EventLog(data_dir)
        self.default_k = default_k
        self.update_params = update_params or UpdateParams()
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex)
        self._write_lock = threading.RLock()
        self._claims: dict = {}
        self._claims_guard = threading.Lock()

        snapshot = self.log.load_snapshot()
        if snapshot is not None:
            self.state = snapshot
            replay(self.log.events(after_seq=snapshot.last_seq), self.state)
        else:
            self.state = replay(self.log.events())
        if seed_master and not self.state.dictionaries:
            self.publish_dictionary(
                lexicon.interchange_document(lexicon.load_seed_dictionary())
            )

    # -- plumbing ----------------------------------------------------------

    def _cached(self, key: str) -> Optional[dict]:
        response = self.state.responses.get(key)
        return copy.deepcopy(response) if response is not None else None

    def _commit(self, events: list) -> dict:
        stored = []
        for event in events:
            seq = self.log.append_event(event)
            stored.append(replace(event, seq=seq))
        return copy.deepcopy(self.state.apply_group(stored))

    def _event(self, key: str, kind: str, payload: dict, suffix: str = "") -> Event:
        return Event(
            event_id=key + suffix,
            command_key=key,
            kind=kind,
            payload=payload,
            wall_clock=self.clock(),
        )

    def _experiment(self, experiment_id: str) -> Experiment:
        experiment = self.state.experiments.get(experiment_id)
        if experiment is None:
            raise NotFoundError(f"unknown experiment {experiment_id}")
        return experiment

    def _session(self, session_id: str) -> Session:
        session = self.state.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id}")
        return session

    def _pinned_dictionary(self, session: Session) -> Dictionary:
        return self.state.dictionaries[session.dictionary_id][session.dictionary_version]

    # -- commands ----------------------------------------------------------

    def create_experiment(
        self,
        name: str,
        dictionary_id: str,
        during_kind: Union[DuringKind, str] = DuringKind.BOTH,
        assignment_policy: Optional[AssignmentPolicy] = None,
        k_suggestions: Optional[int] = None,
        suggestion_phases: Optional[Iterable] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            if not name or not isinstance(name, str):
                raise ValidationError("experiment name must be a non-empty string")
            if dictionary_id not in self.state.dictionaries:
                raise NotFoundError(f"unknown dictionary {dictionary_id}")
            if k_suggestions is not None and (
                not isinstance(k_suggestions, int) or isinstance(k_suggestions, bool)
            ):
                raise ValidationError("k_suggestions must be an integer")
            phases = (
                frozenset(_coerce(Phase, p, "suggestion_phases") for p in suggestion_phases)
                if suggestion_phases is not None
                else None
            )
            experiment = Experiment(
                experiment_id=f"exp-{self.id_factory()}",
                name=name,
                dictionary_id=dictionary_id,
                during_kind=_coerce(DuringKind, during_kind, "during_kind"),
                assignment_policy=assignment_policy or AssignmentPolicy(PolicyKind.ALTERNATE),
                k_suggestions=self.default_k if k_suggestions is None else k_suggestions,
                **({"suggestion_phases": phases} if phases is not None else {}),
            )
            event = self._event(
                key, "ExperimentCreated", {"experiment": experiment.to_dict()}
            )
            return self._commit([event])

    def create_session(
        self,
        experiment_id: str,
        participant_pseudonym: str,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            experiment = self._experiment(experiment_id)
            if not participant_pseudonym or not isinstance(participant_pseudonym, str):
                raise ValidationError("participant_pseudonym must be a non-empty string")
            index = self.state.session_counts.get(experiment_id, 0)
            session = Session(
                session_id=f"ses-{self.id_factory()}",
                experiment_id=experiment_id,
                participant_pseudonym=participant_pseudonym,
                suggestions_enabled=assignment_enabled(
                    experiment.assignment_policy, index
                ),
                dictionary_id=experiment.dictionary_id,
                dictionary_version=self.state.latest_version[experiment.dictionary_id],
                started_at=self.clock(),
            )
            event = self._event(key, "SessionCreated", {"session": session.to_dict()})
            return self._commit([event])

    def submit_spot(
        self,
        session_id: str,
        phase: Union[Phase, str],
        kind: Union[SpotKind, str],
        x,
        y,
        t_ms: int,
        stimulus_id: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            session = self._session(session_id)
            experiment = self._experiment(session.experiment_id)
            phase = _coerce(Phase, phase, "phase")
            kind = _coerce(SpotKind, kind, "kind")

            if session.state in (SessionState.POST_DONE, SessionState.CLOSED):
                raise ProtocolError(
                    f"session {session_id} already finished ({session.state.value})"
                )
            if phase == Phase.PRE and session.state != SessionState.CREATED:
                raise ProtocolError("PRE spot must come first and only once")
            if phase != Phase.PRE and session.state == SessionState.CREATED:
                raise ProtocolError(f"{phase.value} spot before the PRE spot")

            if phase != Phase.DURING and kind != SpotKind.SELF:
                raise ValidationError("PRE and POST spots are self-reports")
            if phase == Phase.DURING:
                allowed = {
                    DuringKind.SELF: {SpotKind.SELF},
                    DuringKind.STIMULUS: {SpotKind.STIMULUS},
                    DuringKind.BOTH: {SpotKind.SELF, SpotKind.STIMULUS},
                }[experiment.during_kind]
                if kind not in allowed:
                    raise ValidationError(
                        f"experiment accepts only {sorted(k.value for k in allowed)} during spots"
                    )
            if (kind == SpotKind.STIMULUS) != (stimulus_id is not None):
                raise ValidationError("stimulus_id is required iff kind is STIMULUS")

            if not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
                raise ValidationError("x and y must be numbers")
            record = SpotRecord(
                spot_id=f"spt-{self.id_factory()}",
                session_id=session_id,
                phase=phase,
                kind=kind,
                stimulus_id=stimulus_id,
                point=clamp_point(x, y),
                t_ms=_require_time(t_ms),
                wall_clock=self.clock(),
                dictionary_version=session.dictionary_version,
            )

            events = [self._event(key, "SpotSubmitted", {"spot": record.to_dict()})]
            eligible = (
                session.suggestions_enabled and phase in experiment.suggestion_phases
            )
            if eligible:
                offered = lexicon.suggest_terms(
                    self._pinned_dictionary(session),
                    record.point,
                    excluded=(),
                    k=experiment.k_suggestions,
                )
                if offered:
                    events.append(
                        self._event(
                            key,
                            "SuggestionsIssued",
                            {
                                "spot_id": record.spot_id,
                                "round_index": 0,
                                "offered_term_ids": [t.term_id for t in offered],
                            },
                            suffix="/1",
                        )
                    )
            return self._commit(events)

    def decide_suggestion(
        self,
        spot_id: str,
        decision: str,
        term_id: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            spot = self.state.spots.get(spot_id)
            if spot is None:
                raise NotFoundError(f"unknown spot {spot_id}")
            if decision not in ("ACCEPT", "REFUSE", "DECLINE"):
                raise ValidationError(
                    f"decision must be ACCEPT, REFUSE or DECLINE, got {decision!r}"
                )
            loop = self.state.loops.get(spot_id)
            if loop is None or not loop.open:
                raise ConflictError(f"no open suggestion round for spot {spot_id}")

            session = self._session(spot.session_id)
            experiment = self._experiment(session.experiment_id)
            current_offer = loop.current_offer

            if decision == "ACCEPT":
                if term_id is None:
                    raise ValidationError("ACCEPT requires a term_id")
                if term_id not in current_offer:
                    raise ValidationError(
                        f"term {term_id} is not part of the current offer"
                    )
            elif term_id is not None:
                raise ValidationError("term_id only accompanies ACCEPT")

            payload = {"spot_id": spot_id, "decision": decision}
            if term_id is not None:
                payload["term_id"] = term_id
            events = [self._event(key, "SuggestionDecided", payload)]

            if decision == "REFUSE":
                next_offer = lexicon.suggest_terms(
                    self._pinned_dictionary(session),
                    spot.point,
                    excluded=loop.remaining_excluded,
                    k=experiment.k_suggestions,
                )
                if next_offer:
                    events.append(
                        self._event(
                            key,
                            "SuggestionsIssued",
                            {
                                "spot_id": spot_id,
                                "round_index": loop.rounds_so_far,
                                "offered_term_ids": [t.term_id for t in next_offer],
                            },
                            suffix="/1",
                        )
                    )
            return self._commit(events)

    def ingest_marker(
        self,
        label: str,
        t_ms: int,
        session_id: Optional[str] = None,
        experiment_id: Optional[str] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            if not label or not isinstance(label, str):
                raise ValidationError("marker label must be a non-empty string")
            marker = Marker(
                label=label,
                t_ms=_require_time(t_ms),
                session_id=session_id,
                experiment_id=experiment_id,
            )
            if session_id is not None:
                self._session(session_id)
            if experiment_id is not None:
                self._experiment(experiment_id)
            event = self._event(key, "MarkerIngested", {"marker": marker.to_dict()})
            return self._commit([event])

    def close_session(
        self, session_id: str, idempotency_key: Optional[str] = None
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            self._session(session_id)
            event = self._event(key, "SessionClosed", {"session_id": session_id})
            return self._commit([event])

    def publish_dictionary(
        self, document: dict, idempotency_key: Optional[str] = None
    ) -> dict:
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            if not isinstance(document, dict) or not document.get("dictionary_id"):
                raise ValidationError("document must carry a dictionary_id")
            dictionary_id = document["dictionary_id"]
            next_version = self.state.latest_version.get(dictionary_id, 0) + 1
            parsed = lexicon.parse_interchange(document, version=next_version)
            if parsed.parent_id is not None:
                parent_versions = self.state.dictionaries.get(parsed.parent_id)
                if not parent_versions:
                    raise ValidationError(
                        f"parent dictionary {parsed.parent_id} is unknown"
                    )
                master = parent_versions[self.state.latest_version[parsed.parent_id]]
                violations = lexicon.custom_subset_violations(parsed, master)
                if violations:
                    raise ValidationError(
                        "custom dictionary is not a subset of its master",
                        detail=[str(v) for v in violations],
                    )
            event = self._event(
                key,
                "DictionaryPublished",
                {
                    "dictionary": parsed.to_dict(),
                    "feedback_cursor": None,
                    "updated": False,
                },
            )
            return self._commit([event])

    def _claim(self, dictionary_id: str) -> threading.Lock:
        with self._claims_guard:
            lock = self._claims.setdefault(dictionary_id, threading.Lock())
        if not lock.acquire(blocking=False):
            raise BusyError(f"an update is already running for {dictionary_id}")
        return lock

    def run_update(
        self,
        dictionary_id: str,
        params: Optional[UpdateParams] = None,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        """Fold feedback gathered since the last run into a new version.

        Holds a per-dictionary claim for the duration; a concurrent run on
        the same dictionary answers BUSY instead of waiting. With nothing
        new to fold in, no version is published and `updated` is False.
        """
        key = idempotency_key or self.id_factory()
        with self._write_lock:
            cached = self._cached(key)
            if cached is not None:
                return cached
            if dictionary_id not in self.state.dictionaries:
                raise NotFoundError(f"unknown dictionary {dictionary_id}")

        claim = self._claim(dictionary_id)
        try:
            with self._write_lock:
                cached = self._cached(key)
                if cached is not None:
                    return cached
                version = self.state.latest_version[dictionary_id]
                current = self.state.dictionaries[dictionary_id][version]
                feed = self.state.feedback.get(dictionary_id, [])
                cursor = self.state.feedback_cursor.get(dictionary_id, 0)
                fresh = list(feed[cursor:])
                new_cursor = cursor + len(fresh)
            # Terms dropped by a later import may still have queued feedback;
            # those events no longer apply to the current term set.
            fresh = [e for e in fresh if e.term_id in current.terms]
            updated = lexicon.folksonomy_update(
                current, fresh, params or self.update_params
            )
            with self._write_lock:
                if updated is current:
                    response = {
                        "dictionary_id": dictionary_id,
                        "version": current.version,
                        "updated": False,
                    }
                    self.state.responses[key] = response
                    return dict(response)
                if self.state.latest_version[dictionary_id] != version:
                    raise ConflictError(
                        f"dictionary {dictionary_id} changed while updating"
                    )
                event = self._event(
                    key,
                    "DictionaryPublished",
                    {
                        "dictionary": updated.to_dict(),
                        "feedback_cursor": new_cursor,
                        "updated": True,
                    },
                )
                return self._commit([event])
        finally:
            claim.release()

    # -- reads ---------------------------------------------------------------

    def get_experiment(self, experiment_id: str) -> dict:
        with self._write_lock:
            return self._experiment(experiment_id).to_dict()

    def get_dictionary(
        self, dictionary_id: str, version: Optional[int] = None
    ) -> Dictionary:
        with self._write_lock:
            versions = self.state.dictionaries.get(dictionary_id)
            if not versions:
                raise NotFoundError(f"unknown dictionary {dictionary_id}")
            if version is None:
                version = self.state.latest_version[dictionary_id]
            if version not in versions:
                raise NotFoundError(
                    f"dictionary {dictionary_id} has no version {version}"
                )
            return versions[version]

    def session_detail(self, session_id: str) -> dict:
        with self._write_lock:
            session = self._session(session_id)
            spots = []
            for spot_id in self.state.session_spots.get(session_id, []):
                spot = self.state.spots[spot_id]
                view = spot.to_dict()
                view["chosen_term_text"] = (
                    self.state.term_text(
                        session, spot.dictionary_version, spot.chosen_term_id
                    )
                    or None
                )
                loop = self.state.loops.get(spot_id)
                view["open"] = bool(loop and loop.open)
                view["open_offer"] = (
                    self.state.term_views(spot, loop.current_offer)
                    if loop and loop.open
                    else None
                )
                spots.append(view)
            markers = sorted(
                (m.to_dict() for m in self.state.markers if m.session_id == session_id),
                key=lambda m: m["t_ms"],
            )
            try:
                delta = analytics.mood_delta(self.state, session_id)
                delta_view = {"valence": delta[0], "arousal": delta[1]}
            except IncompleteSessionError:
                delta_view = None
            return {
                "session": session.to_dict(),
                "spots": spots,
                "markers": markers,
                "mood_delta": delta_view,
            }

    def cloud(self, experiment_id: str, phase=None, kind=None) -> list:
        with self._write_lock:
            return analytics.cloud_points(self.state, experiment_id, phase, kind)

    def export(
        self,
        experiment_id: Optional[str] = None,
        session_id: Optional[str] = None,
    ) -> bytes:
        with self._write_lock:
            return export_csv(self.state, experiment_id, session_id)

    def stats(self, experiment_id: str) -> dict:
        with self._write_lock:
            return analytics.experiment_stats(self.state, experiment_id)

    def snapshot(self) -> None:
        with self._write_lock:
            self.log.save_snapshot(self.state)

    def close(self) -> None:
        self.log.close()


class UpdateScheduler:
    """Daemon loop that refreshes every known dictionary at a fixed interval."""

    def __init__(self, service: SymService, interval: timedelta):
        if interval.total_seconds() <= 0:
            raise ValidationError("scheduler interval must be positive")
        self.service = service
        self.interval = interval
        self._stop = threading.Event()
        self._thread = None

    def run_once(self) -> dict:
        """One sweep over all dictionaries; returns {dictionary_id: response}."""
        results = {}
        for dictionary_id in list(self.service.state.dictionaries):
            try:
                results[dictionary_id] = self.service.run_update(dictionary_id)
            except BusyError:
                continue
        return results

    def _run(self) -> None:
        while not self._stop.wait(self.interval.total_seconds()):
            self.run_once()

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
