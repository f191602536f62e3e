"""Durable append-only event log, replayable state, and CSV interchange.

The log is the single source of truth: every state mutation is an event
group appended by one writer, and replaying the full log (or a snapshot
plus the tail) rebuilds identical state. The CSV schema is public and
bit-exact; everything else in here is internal format.
"""

import csv
import io
import json
import os
import struct
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import groupby
from pathlib import Path
from typing import Iterable, Optional, Union

from sym.errors import NotFoundError, ValidationError
from sym.model import (
    COORD_MAX,
    COORD_MIN,
    Dictionary,
    Experiment,
    FeedbackEvent,
    Marker,
    MoodPoint,
    Phase,
    Session,
    SessionState,
    SpotKind,
    SpotRecord,
    SpotStatus,
    SuggestionLoopState,
    SuggestionRound,
    spot_record_violations,
)

LOG_MAGIC = b"SYMLOG1\n"
LOG_FILENAME = "events.log"
SNAPSHOT_FILENAME = "snapshot.json"
SNAPSHOT_FORMAT = 1

EVENT_KINDS = frozenset(
    {
        "ExperimentCreated",
        "SessionCreated",
        "SpotSubmitted",
        "SuggestionsIssued",
        "SuggestionDecided",
        "SessionClosed",
        "MarkerIngested",
        "DictionaryPublished",
    }
)

CSV_HEADER = [
    "session_id",
    "participant_id",
    "experiment_id",
    "phase",
    "kind",
    "stimulus_id",
    "t_ms",
    "valence",
    "arousal",
    "status",
    "chosen_term",
    "refused_terms",
    "dictionary_version",
]

REFUSED_JOINER = "|"


@dataclass(frozen=True)
class Event:
    """One durable log record; event_id doubles as the idempotency key."""

    event_id: str
    command_key: str
    kind: str
    payload: dict
    wall_clock: datetime
    seq: int = 0

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "command_key": self.command_key,
            "kind": self.kind,
            "payload": self.payload,
            "wall_clock": self.wall_clock.isoformat(),
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Event":
        return cls(
            event_id=data["event_id"],
            command_key=data["command_key"],
            kind=data["kind"],
            payload=data["payload"],
            wall_clock=datetime.fromisoformat(data["wall_clock"]),
            seq=data["seq"],
        )


class EventLog:
    """Append-only log of length-prefixed JSON records with a magic header.

    Appends are serialized and flushed to disk before returning; a
    duplicate event_id is a no-op that answers with the original seq.
    Pass directory=None for an in-memory log (tests, ephemeral servers).
    """

    def __init__(self, directory: Union[str, Path, None] = None):
        self._events: list = []
        self._index: dict = {}
        self._lock = threading.Lock()
        self._fh = None
        self.directory: Optional[Path] = None
        if directory is not None:
            self.directory = Path(directory)
            self.directory.mkdir(parents=True, exist_ok=True)
            self._open_file()

    def _open_file(self) -> None:
        path = self.directory / LOG_FILENAME
        if path.exists():
            self._read_existing(path)
        else:
            with open(path, "wb") as handle:
                handle.write(LOG_MAGIC)
                handle.flush()
                os.fsync(handle.fileno())
        self._fh = open(path, "ab")

    def _read_existing(self, path: Path) -> None:
        with open(path, "rb") as handle:
            magic = handle.read(len(LOG_MAGIC))
            if magic != LOG_MAGIC:
                raise ValidationError(f"{path} is not an event log (bad header)")
            while True:
                prefix = handle.read(4)
                if not prefix:
                    break
                if len(prefix) < 4:
                    raise ValidationError(f"{path} ends mid-record")
                (length,) = struct.unpack(">I", prefix)
                body = handle.read(length)
                if len(body) < length:
                    raise ValidationError(f"{path} ends mid-record")
                event = Event.from_dict(json.loads(body.decode("utf-8")))
                self._events.append(event)
                self._index[event.event_id] = event.seq

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    def append_event(self, event: Event) -> int:
        """Append one event; returns its server-assigned seq.

        The event is durable before this returns. Re-appending an
        event_id already in the log changes nothing and returns the seq
        assigned the first time.
        """
        if event.kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {event.kind!r}")
        with self._lock:
            existing = self._index.get(event.event_id)
            if existing is not None:
                return existing
            stored = Event(
                event_id=event.event_id,
                command_key=event.command_key,
                kind=event.kind,
                payload=event.payload,
                wall_clock=event.wall_clock,
                seq=self.last_seq + 1,
            )
            if self._fh is not None:
                body = json.dumps(stored.to_dict(), ensure_ascii=False).encode("utf-8")
                self._fh.write(struct.pack(">I", len(body)))
                self._fh.write(body)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            self._events.append(stored)
            self._index[stored.event_id] = stored.seq
            return stored.seq

    def events(self, after_seq: int = 0) -> list:
        return [e for e in self._events if e.seq > after_seq]

    def save_snapshot(self, state: "StoreState") -> None:
        if self.directory is None:
            return
        payload = {
            "format": SNAPSHOT_FORMAT,
            "last_seq": state.last_seq,
            "state": state.to_dict(),
        }
        tmp = self.directory / (SNAPSHOT_FILENAME + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, ensure_ascii=False)
        tmp.replace(self.directory / SNAPSHOT_FILENAME)

    def load_snapshot(self) -> Optional["StoreState"]:
        if self.directory is None:
            return None
        path = self.directory / SNAPSHOT_FILENAME
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("format") != SNAPSHOT_FORMAT:
            raise ValidationError(f"unsupported snapshot format {payload.get('format')!r}")
        return StoreState.from_dict(payload["state"])

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class StoreState:
    """Materialized view of the event log; mutated only via apply_group."""

    def __init__(self):
        self.experiments: dict = {}
        self.session_counts: dict = {}
        self.sessions: dict = {}
        self.spots: dict = {}
        self.session_spots: dict = {}
        self.loops: dict = {}
        self.markers: list = []
        self.dictionaries: dict = {}  # id -> {version -> Dictionary}
        self.latest_version: dict = {}
        self.feedback: dict = {}  # dictionary_id -> [FeedbackEvent]
        self.feedback_cursor: dict = {}
        self.responses: dict = {}  # command_key -> response dict
        self.last_seq: int = 0

    # -- event application ------------------------------------------------

    def apply_group(self, events: list) -> dict:
        """Apply one command's events atomically; returns the command response.

        The response is cached under the command key so a retried write
        answers with its original result.
        """
        if not events:
            raise ValidationError("empty event group")
        key = events[0].command_key
        head = events[0]
        handler = {
            "ExperimentCreated": self._apply_experiment_created,
            "SessionCreated": self._apply_session_created,
            "SpotSubmitted": self._apply_spot_group,
            "SuggestionDecided": self._apply_decision_group,
            "SessionClosed": self._apply_session_closed,
            "MarkerIngested": self._apply_marker,
            "DictionaryPublished": self._apply_dictionary_published,
        }.get(head.kind)
        if handler is None:
            raise ValidationError(f"event kind {head.kind!r} cannot lead a group")
        response = handler(events)
        self.responses[key] = response
        self.last_seq = max(self.last_seq, events[-1].seq)
        return response

    def _apply_experiment_created(self, events: list) -> dict:
        experiment = Experiment.from_dict(events[0].payload["experiment"])
        self.experiments[experiment.experiment_id] = experiment
        return {"experiment": experiment.to_dict()}

    def _apply_session_created(self, events: list) -> dict:
        session = Session.from_dict(events[0].payload["session"])
        self.sessions[session.session_id] = session
        self.session_spots[session.session_id] = []
        self.session_counts[session.experiment_id] = (
            self.session_counts.get(session.experiment_id, 0) + 1
        )
        return {"session": session.to_dict()}

    def _apply_spot_group(self, events: list) -> dict:
        spot = SpotRecord.from_dict(events[0].payload["spot"])
        session = self.sessions[spot.session_id]
        if spot.phase == Phase.PRE:
            session.advance(SessionState.PRE_DONE)
        elif spot.phase == Phase.DURING:
            session.advance(SessionState.RUNNING)
        else:
            session.advance(SessionState.POST_DONE)
        self.spots[spot.spot_id] = spot
        self.session_spots[spot.session_id].append(spot.spot_id)

        round_view = None
        if len(events) > 1:
            round_view = self._apply_suggestions_issued(events[1])
        loop = self.loops.get(spot.spot_id)
        return {
            "spot": spot.to_dict(),
            "round": round_view,
            "open": bool(loop and loop.open),
        }

    def _apply_suggestions_issued(self, event: Event) -> dict:
        # The fresh offer stays on the loop until the participant settles
        # it; SpotRecord.rounds only ever holds settled rounds.
        payload = event.payload
        spot = self.spots[payload["spot_id"]]
        offered = tuple(payload["offered_term_ids"])
        loop = self.loops.setdefault(
            spot.spot_id, SuggestionLoopState(spot_id=spot.spot_id)
        )
        loop.current_offer = offered
        loop.remaining_excluded |= set(offered)
        loop.rounds_so_far += 1
        loop.open = True
        return {
            "index": payload["round_index"],
            "offered": self.term_views(spot, offered),
        }

    def _apply_decision_group(self, events: list) -> dict:
        payload = events[0].payload
        spot = self.spots[payload["spot_id"]]
        session = self.sessions[spot.session_id]
        loop = self.loops[spot.spot_id]
        decision = payload["decision"]
        offer = loop.current_offer

        if decision == "ACCEPT":
            spot.rounds.append(SuggestionRound(offered_term_ids=offer))
            spot.chosen_term_id = payload["term_id"]
            spot.status = SpotStatus.ACCEPTED
            loop.current_offer = ()
            loop.open = False
            self._record_feedback(
                session, [(payload["term_id"], True)], spot.point, events[0].wall_clock
            )
        elif decision == "DECLINE":
            spot.rounds.append(SuggestionRound(offered_term_ids=offer))
            spot.status = SpotStatus.DECLINED
            loop.current_offer = ()
            loop.open = False
        elif decision == "REFUSE":
            spot.rounds.append(
                SuggestionRound(offered_term_ids=offer, refused_term_ids=offer)
            )
            self._record_feedback(
                session,
                [(term_id, False) for term_id in offer],
                spot.point,
                events[0].wall_clock,
            )
            if len(events) > 1:
                round_view = self._apply_suggestions_issued(events[1])
                return {"spot": spot.to_dict(), "round": round_view, "open": True}
            spot.status = SpotStatus.EXHAUSTED
            loop.current_offer = ()
            loop.open = False
        else:
            raise ValidationError(f"unknown decision {decision!r}")
        return {"spot": spot.to_dict(), "round": None, "open": False}

    def _record_feedback(self, session, term_flags, point, wall_clock) -> None:
        bucket = self.feedback.setdefault(session.dictionary_id, [])
        for term_id, accepted in term_flags:
            bucket.append(
                FeedbackEvent(
                    term_id=term_id,
                    point=point,
                    accepted=accepted,
                    wall_clock=wall_clock,
                    dictionary_id=session.dictionary_id,
                )
            )

    def _apply_session_closed(self, events: list) -> dict:
        session = self.sessions[events[0].payload["session_id"]]
        session.advance(SessionState.CLOSED)
        return {"session": session.to_dict()}

    def _apply_marker(self, events: list) -> dict:
        marker = Marker.from_dict(events[0].payload["marker"])
        self.markers.append(marker)
        return {"marker": marker.to_dict()}

    def _apply_dictionary_published(self, events: list) -> dict:
        payload = events[0].payload
        dictionary = Dictionary.from_dict(payload["dictionary"])
        versions = self.dictionaries.setdefault(dictionary.dictionary_id, {})
        versions[dictionary.version] = dictionary
        self.latest_version[dictionary.dictionary_id] = max(
            self.latest_version.get(dictionary.dictionary_id, 0), dictionary.version
        )
        if payload.get("feedback_cursor") is not None:
            self.feedback_cursor[dictionary.dictionary_id] = payload["feedback_cursor"]
        return {
            "dictionary_id": dictionary.dictionary_id,
            "version": dictionary.version,
            "updated": bool(payload.get("updated")),
        }

    def term_views(self, spot: SpotRecord, term_ids: Iterable[str]) -> list:
        session = self.sessions[spot.session_id]
        dictionary = self.dictionaries[session.dictionary_id][spot.dictionary_version]
        views = []
        for term_id in term_ids:
            term = dictionary.terms.get(term_id)
            views.append(
                {"term_id": term_id, "text": term.text if term else term_id}
            )
        return views

    def term_text(self, session: Session, version: int, term_id: Optional[str]) -> str:
        if term_id is None:
            return ""
        dictionary = self.dictionaries.get(session.dictionary_id, {}).get(version)
        if dictionary is None:
            return term_id
        term = dictionary.terms.get(term_id)
        return term.text if term else term_id

    # -- snapshot serialization -------------------------------------------

    def to_dict(self) -> dict:
        return {
            "experiments": {k: v.to_dict() for k, v in self.experiments.items()},
            "session_counts": dict(self.session_counts),
            "sessions": {k: v.to_dict() for k, v in self.sessions.items()},
            "spots": {k: v.to_dict() for k, v in self.spots.items()},
            "session_spots": {k: list(v) for k, v in self.session_spots.items()},
            "loops": {k: v.to_dict() for k, v in self.loops.items()},
            "markers": [m.to_dict() for m in self.markers],
            "dictionaries": {
                did: {str(ver): d.to_dict() for ver, d in versions.items()}
                for did, versions in self.dictionaries.items()
            },
            "latest_version": dict(self.latest_version),
            "feedback": {
                did: [e.to_dict() for e in events]
                for did, events in self.feedback.items()
            },
            "feedback_cursor": dict(self.feedback_cursor),
            "responses": self.responses,
            "last_seq": self.last_seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StoreState":
        state = cls()
        state.experiments = {
            k: Experiment.from_dict(v) for k, v in data["experiments"].items()
        }
        state.session_counts = dict(data["session_counts"])
        state.sessions = {k: Session.from_dict(v) for k, v in data["sessions"].items()}
        state.spots = {k: SpotRecord.from_dict(v) for k, v in data["spots"].items()}
        state.session_spots = {k: list(v) for k, v in data["session_spots"].items()}
        state.loops = {
            k: SuggestionLoopState.from_dict(v) for k, v in data["loops"].items()
        }
        state.markers = [Marker.from_dict(m) for m in data["markers"]]
        state.dictionaries = {
            did: {int(ver): Dictionary.from_dict(d) for ver, d in versions.items()}
            for did, versions in data["dictionaries"].items()
        }
        state.latest_version = dict(data["latest_version"])
        state.feedback = {
            did: [FeedbackEvent.from_dict(e) for e in events]
            for did, events in data["feedback"].items()
        }
        state.feedback_cursor = dict(data["feedback_cursor"])
        state.responses = dict(data["responses"])
        state.last_seq = data["last_seq"]
        return state


def replay(events: Iterable[Event], state: Optional[StoreState] = None) -> StoreState:
    """Rebuild state by applying every event group in log order."""
    state = state or StoreState()
    for _, group in groupby(events, key=lambda e: e.command_key):
        state.apply_group(list(group))
    return state


# -- CSV export / import ---------------------------------------------------


@dataclass(frozen=True)
class CsvRow:
    """One spot flattened to the public CSV schema (term texts, not ids)."""

    session_id: str
    participant_id: str
    experiment_id: str
    phase: Phase
    kind: SpotKind
    stimulus_id: Optional[str]
    t_ms: int
    valence: int
    arousal: int
    status: SpotStatus
    chosen_term: Optional[str]
    refused_terms: tuple
    dictionary_version: int

    def as_fields(self) -> list:
        return [
            self.session_id,
            self.participant_id,
            self.experiment_id,
            self.phase.value,
            self.kind.value,
            self.stimulus_id or "",
            str(self.t_ms),
            str(self.valence),
            str(self.arousal),
            self.status.value,
            self.chosen_term or "",
            REFUSED_JOINER.join(self.refused_terms),
            str(self.dictionary_version),
        ]


@dataclass(frozen=True)
class ImportedSpot:
    """One imported CSV row: the reconstructed record plus its session context."""

    record: SpotRecord
    participant_id: str
    experiment_id: str
    row: CsvRow


def rows_to_csv(rows: Iterable[CsvRow]) -> bytes:
    """Serialize rows (RFC 4180 quoting, LF endings, UTF-8), sorted by
    (session_id, t_ms) with input order preserved on ties."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in sorted(rows, key=lambda r: (r.session_id, r.t_ms)):
        writer.writerow(row.as_fields())
    return buffer.getvalue().encode("utf-8")


def state_rows(
    state: StoreState,
    experiment_id: Optional[str] = None,
    session_id: Optional[str] = None,
) -> list:
    """Flatten the store's spots to CSV rows, applying the export filter."""
    if experiment_id is not None and experiment_id not in state.experiments:
        raise NotFoundError(f"unknown experiment {experiment_id}")
    if session_id is not None and session_id not in state.sessions:
        raise NotFoundError(f"unknown session {session_id}")

    rows = []
    for session in state.sessions.values():
        if experiment_id is not None and session.experiment_id != experiment_id:
            continue
        if session_id is not None and session.session_id != session_id:
            continue
        for spot_id in state.session_spots.get(session.session_id, []):
            spot = state.spots[spot_id]
            refused = tuple(
                state.term_text(session, spot.dictionary_version, term_id)
                for term_id in spot.refused_term_ids()
            )
            chosen = (
                state.term_text(session, spot.dictionary_version, spot.chosen_term_id)
                or None
            )
            rows.append(
                CsvRow(
                    session_id=session.session_id,
                    participant_id=session.participant_pseudonym,
                    experiment_id=session.experiment_id,
                    phase=spot.phase,
                    kind=spot.kind,
                    stimulus_id=spot.stimulus_id,
                    t_ms=spot.t_ms,
                    valence=spot.point.valence,
                    arousal=spot.point.arousal,
                    status=spot.status,
                    chosen_term=chosen,
                    refused_terms=refused,
                    dictionary_version=spot.dictionary_version,
                )
            )
    return rows


def export_csv(
    state: StoreState,
    experiment_id: Optional[str] = None,
    session_id: Optional[str] = None,
) -> bytes:
    return rows_to_csv(state_rows(state, experiment_id, session_id))


_IMPORT_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"line {line}: {column} {value!r} is not an integer")


def _parse_enum(enum_cls, value: str, column: str, line: int):
    try:
        return enum_cls(value)
    except ValueError:
        raise ValidationError(f"line {line}: {column} {value!r} is not a valid {enum_cls.__name__}")


def _row_problems(row: CsvRow) -> list:
    problems = []
    for axis, value in (("valence", row.valence), ("arousal", row.arousal)):
        if not COORD_MIN <= value <= COORD_MAX:
            problems.append(f"{axis} {value} outside [{COORD_MIN}, {COORD_MAX}]")
    if row.t_ms < 0:
        problems.append(f"t_ms {row.t_ms} is negative")
    if (row.stimulus_id is not None) != (row.kind == SpotKind.STIMULUS):
        problems.append("stimulus_id must be present iff kind is STIMULUS")
    if (row.chosen_term is not None) != (row.status == SpotStatus.ACCEPTED):
        problems.append("chosen_term present iff status is ACCEPTED")
    if row.status == SpotStatus.POINT_ONLY and row.refused_terms:
        problems.append("POINT_ONLY row carries refused terms")
    if row.status == SpotStatus.EXHAUSTED and not row.refused_terms:
        problems.append("EXHAUSTED row carries no refused terms")
    return problems


def _synthesize_record(row: CsvRow, line: int) -> SpotRecord:
    # The CSV does not carry round structure or term ids, so rounds are
    # reconstructed from the refused / chosen texts (texts stand in as ids).
    rounds = []
    if row.refused_terms:
        rounds.append(
            SuggestionRound(
                offered_term_ids=row.refused_terms,
                refused_term_ids=row.refused_terms,
            )
        )
    if row.chosen_term is not None:
        rounds.append(SuggestionRound(offered_term_ids=(row.chosen_term,)))
    return SpotRecord(
        spot_id=f"import-{line}",
        session_id=row.session_id,
        phase=row.phase,
        kind=row.kind,
        stimulus_id=row.stimulus_id,
        point=MoodPoint(valence=row.valence, arousal=row.arousal),
        t_ms=row.t_ms,
        wall_clock=_IMPORT_EPOCH,
        dictionary_version=row.dictionary_version,
        rounds=rounds,
        chosen_term_id=row.chosen_term,
        status=row.status,
    )


def import_csv(data: bytes) -> list:
    """Parse an export back into records; every violation names its line.

    Returns one ImportedSpot per data row; each embedded SpotRecord
    passes the record invariants (a DECLINED row that refused nothing is
    the lone lossy case: its rounds cannot be reconstructed from the CSV).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"CSV is not valid UTF-8: {exc}")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("line 1: missing header row")
    if header != CSV_HEADER:
        raise ValidationError(
            f"line 1: header mismatch", detail={"expected": CSV_HEADER, "got": header}
        )

    imported = []
    for fields in reader:
        line = reader.line_num
        if not fields:
            continue
        if len(fields) != len(CSV_HEADER):
            raise ValidationError(
                f"line {line}: expected {len(CSV_HEADER)} fields, got {len(fields)}"
            )
        (
            session_id,
            participant_id,
            experiment_id,
            phase,
            kind,
            stimulus_id,
            t_ms,
            valence,
            arousal,
            status,
            chosen_term,
            refused_terms,
            dictionary_version,
        ) = fields
        row = CsvRow(
            session_id=session_id,
            participant_id=participant_id,
            experiment_id=experiment_id,
            phase=_parse_enum(Phase, phase, "phase", line),
            kind=_parse_enum(SpotKind, kind, "kind", line),
            stimulus_id=stimulus_id or None,
            t_ms=_parse_int(t_ms, "t_ms", line),
            valence=_parse_int(valence, "valence", line),
            arousal=_parse_int(arousal, "arousal", line),
            status=_parse_enum(SpotStatus, status, "status", line),
            chosen_term=chosen_term or None,
            refused_terms=tuple(refused_terms.split(REFUSED_JOINER))
            if refused_terms
            else (),
            dictionary_version=_parse_int(dictionary_version, "dictionary_version", line),
        )
        problems = _row_problems(row)
        if problems:
            raise ValidationError(f"line {line}: {problems[0]}", detail=problems)
        record = _synthesize_record(row, line)
        if not (record.status == SpotStatus.DECLINED and not record.rounds):
            record_problems = spot_record_violations(record)
            if record_problems:
                raise ValidationError(
                    f"line {line}: {record_problems[0]}", detail=record_problems
                )
        imported.append(
            ImportedSpot(
                record=record,
                participant_id=participant_id,
                experiment_id=experiment_id,
                row=row,
            )
        )
    return imported
