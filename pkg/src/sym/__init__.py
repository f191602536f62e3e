"""Live mood self-report on a valence-arousal diagram.

Participants place how they feel as a point on a two-axis plane; the
service suggests nearby mood words, learns better word positions from
what people accept, and gives researchers session protocols, markers,
analysis, and a bit-stable CSV export.
"""

__version__ = "0.1.0"

from sym.errors import (
    BusyError,
    ConflictError,
    IncompleteSessionError,
    NotFoundError,
    ProtocolError,
    SymError,
    ValidationError,
)
from sym.lexicon import (
    UpdateParams,
    derive_custom_dictionary,
    folksonomy_update,
    load_seed_dictionary,
    suggest_terms,
)
from sym.model import (
    AssignmentPolicy,
    Dictionary,
    DuringKind,
    Experiment,
    Marker,
    MoodPoint,
    MoodTerm,
    Phase,
    PolicyKind,
    Session,
    SessionState,
    SpotKind,
    SpotRecord,
    SpotStatus,
    clamp_point,
    distance,
)
from sym.service import SymService, UpdateScheduler, assignment_enabled
from sym.store import EventLog, export_csv, import_csv, replay

__all__ = [
    "__version__",
    "SymError",
    "NotFoundError",
    "ValidationError",
    "ProtocolError",
    "ConflictError",
    "BusyError",
    "IncompleteSessionError",
    "UpdateParams",
    "derive_custom_dictionary",
    "folksonomy_update",
    "load_seed_dictionary",
    "suggest_terms",
    "AssignmentPolicy",
    "Dictionary",
    "DuringKind",
    "Experiment",
    "Marker",
    "MoodPoint",
    "MoodTerm",
    "Phase",
    "PolicyKind",
    "Session",
    "SessionState",
    "SpotKind",
    "SpotRecord",
    "SpotStatus",
    "clamp_point",
    "distance",
    "SymService",
    "UpdateScheduler",
    "assignment_enabled",
    "EventLog",
    "export_csv",
    "import_csv",
    "replay",
]
