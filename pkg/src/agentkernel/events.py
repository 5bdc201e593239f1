"""Append-only event stream, action/observation taxonomy, and the canonical wire codec.

Every session is a totally ordered log of events. An event wraps either an
Action (agent or user intent) or an Observation (environment result). The
JSON-lines encoding defined here is the single wire format shared by the
controller, the runtime server, trajectory files, recordings, and the UI feed.
"""

from __future__ import annotations

import enum
import json
import threading
import time
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterator, Optional, Sequence, Union


class SessionClosed(Exception):
    """Raised when appending to (or injecting into) a closed session."""


class CausalityError(Exception):
    """Raised when an event references a cause id that does not exist."""


class CodecError(Exception):
    """Raised when a document cannot be decoded into a valid event."""


class Source(str, enum.Enum):
    AGENT = "agent"
    USER = "user"
    ENVIRONMENT = "environment"


# ---------------------------------------------------------------------------
# Actions

DEFAULT_SHELL_TIMEOUT_S = 120.0
DEFAULT_CELL_TIMEOUT_S = 60.0


@dataclass(frozen=True)
class ShellCommandAction:
    kind = "shell_command"
    command: str
    timeout_s: float = DEFAULT_SHELL_TIMEOUT_S
    thought: str = ""


@dataclass(frozen=True)
class CodeCellAction:
    kind = "code_cell"
    source: str
    thought: str = ""


@dataclass(frozen=True)
class BrowseAction:
    kind = "browse"
    program: str
    thought: str = ""


@dataclass(frozen=True)
class MessageAction:
    kind = "message"
    content: str
    wait_for_user: bool = True
    thought: str = ""


@dataclass(frozen=True)
class DelegateAction:
    kind = "delegate"
    agent: str
    subtask: str
    thought: str = ""


@dataclass(frozen=True)
class FinishAction:
    kind = "finish"
    summary: str = ""
    thought: str = ""


Action = Union[
    ShellCommandAction,
    CodeCellAction,
    BrowseAction,
    MessageAction,
    DelegateAction,
    FinishAction,
]

# ---------------------------------------------------------------------------
# Observations


@dataclass(frozen=True)
class ShellResultObservation:
    kind = "shell_result"
    exit_code: int
    output: str
    cwd: str
    timed_out: bool = False

    @property
    def success(self) -> bool:
        return self.exit_code == 0


@dataclass(frozen=True)
class CellResultObservation:
    kind = "cell_result"
    output: str


@dataclass(frozen=True)
class BrowseResultObservation:
    kind = "browse_result"
    page: str
    status: str
    url: str = ""
    message_to_user: str = ""
    episode_over: bool = False


@dataclass(frozen=True)
class UserMessageObservation:
    kind = "user_message"
    content: str


@dataclass(frozen=True)
class DelegateResultObservation:
    kind = "delegate_result"
    summary: str
    child_cost: float


@dataclass(frozen=True)
class ErrorObservation:
    kind = "error"
    category: str
    message: str


Observation = Union[
    ShellResultObservation,
    CellResultObservation,
    BrowseResultObservation,
    UserMessageObservation,
    DelegateResultObservation,
    ErrorObservation,
]

ACTION_KINDS = ("shell_command", "code_cell", "browse", "message", "delegate", "finish")
OBSERVATION_KINDS = (
    "shell_result",
    "cell_result",
    "browse_result",
    "user_message",
    "delegate_result",
    "error",
)

# Observation kind produced by a successful execution of each executable
# action kind. message/finish/delegate resolve at the controller, not here.
RESULT_KIND_FOR_ACTION = {
    "shell_command": "shell_result",
    "code_cell": "cell_result",
    "browse": "browse_result",
    "delegate": "delegate_result",
}

_PAYLOAD_TYPES = {
    "shell_command": ShellCommandAction,
    "code_cell": CodeCellAction,
    "browse": BrowseAction,
    "message": MessageAction,
    "delegate": DelegateAction,
    "finish": FinishAction,
    "shell_result": ShellResultObservation,
    "cell_result": CellResultObservation,
    "browse_result": BrowseResultObservation,
    "user_message": UserMessageObservation,
    "delegate_result": DelegateResultObservation,
    "error": ErrorObservation,
}


def is_action(payload: Any) -> bool:
    return getattr(payload, "kind", None) in ACTION_KINDS


def is_observation(payload: Any) -> bool:
    return getattr(payload, "kind", None) in OBSERVATION_KINDS


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class Event:
    """One immutable element of the session log."""

    id: int
    source: Source
    payload: Union[Action, Observation]
    cause: Optional[int] = None
    timestamp: float = 0.0

    @property
    def kind(self) -> str:
        return self.payload.kind


class EventStream:
    """Per-session append-only log with strictly increasing, gap-free ids.

    One logical writer per session; appends are serialized internally so
    concurrent readers always observe a consistent prefix.
    """

    def __init__(self) -> None:
        self._events: list[Event] = []
        self._lock = threading.RLock()
        self._closed = False
        self.changed = threading.Condition(self._lock)

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.snapshot())

    @property
    def closed(self) -> bool:
        with self._lock:
            return self._closed

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self.changed.notify_all()

    def snapshot(self) -> tuple[Event, ...]:
        with self._lock:
            return tuple(self._events)

    def get(self, event_id: int) -> Event:
        with self._lock:
            if 1 <= event_id <= len(self._events):
                return self._events[event_id - 1]
        raise CausalityError(f"no event with id {event_id}")

    def append(
        self,
        source: Source,
        payload: Union[Action, Observation],
        cause: Optional[int] = None,
    ) -> int:
        """Append a new event and return its id (previous max id + 1)."""
        with self._lock:
            if self._closed:
                raise SessionClosed("event stream is closed")
            if cause is not None and not (1 <= cause <= len(self._events)):
                raise CausalityError(
                    f"cause {cause} does not reference an existing event"
                )
            event = Event(
                id=len(self._events) + 1,
                source=source,
                payload=payload,
                cause=cause,
                timestamp=time.time(),
            )
            self._events.append(event)
            self.changed.notify_all()
            return event.id


@dataclass
class SessionLimits:
    """Hard per-session ceilings enforced by the controller."""

    max_iterations: int = 30
    max_cost: float = 10.0
    max_delegation_depth: int = 2

    def __post_init__(self) -> None:
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.max_cost <= 0:
            raise ValueError("max_cost must be positive")
        if self.max_delegation_depth < 0:
            raise ValueError("max_delegation_depth must be >= 0")


@dataclass
class SessionState:
    """Event history plus the accounting an agent's step() may consult."""

    events: EventStream = field(default_factory=EventStream)
    accumulated_cost: float = 0.0
    iteration: int = 0
    delegation_depth: int = 0
    limits: SessionLimits = field(default_factory=SessionLimits)

    def add_cost(self, amount: float) -> None:
        if amount < 0:
            raise ValueError("cost increments must be nonnegative")
        self.accumulated_cost += amount

    @property
    def history(self) -> list[tuple[Optional[Event], Optional[Event]]]:
        return history_pairs(self)

    def snapshot_text(self) -> str:
        """Canonical serialization of the whole state (timestamps stripped).

        Used for step-purity checks and replay-equality comparison.
        """
        head = json.dumps(
            {
                "accumulated_cost": round(self.accumulated_cost, 12),
                "iteration": self.iteration,
                "delegation_depth": self.delegation_depth,
            },
            sort_keys=True,
        )
        lines = [head]
        lines.extend(encode_event(ev, include_timestamp=False) for ev in self.events)
        return "\n".join(lines)


def history_pairs(
    state: SessionState,
) -> list[tuple[Optional[Event], Optional[Event]]]:
    """Pair each action with the observation caused by it, in id order.

    Unsolicited user messages surface as standalone (None, event) entries at
    their own stream position. A pending action pairs with None.
    """
    obs_by_cause: dict[int, Event] = {}
    for ev in state.events:
        if is_observation(ev.payload) and ev.cause is not None:
            obs_by_cause.setdefault(ev.cause, ev)
    entries: list[tuple[Optional[Event], Optional[Event]]] = []
    for ev in state.events:
        if is_action(ev.payload):
            entries.append((ev, obs_by_cause.get(ev.id)))
        elif ev.kind == "user_message" and ev.cause is None:
            entries.append((None, ev))
    return entries


# ---------------------------------------------------------------------------
# Canonical wire codec
#
# UTF-8 JSON, sorted keys, one event per line in .jsonl trajectory files.
# Timestamps are carried for display but excluded from the replay-equality
# form (include_timestamp=False).


def payload_to_doc(payload: Union[Action, Observation]) -> dict[str, Any]:
    doc = {}
    for f in fields(payload):
        value = getattr(payload, f.name)
        doc[f.name] = value
    return doc


def payload_from_doc(kind: str, doc: dict[str, Any]) -> Union[Action, Observation]:
    if kind not in _PAYLOAD_TYPES:
        raise CodecError(f"unknown payload kind {kind!r}")
    try:
        return _PAYLOAD_TYPES[kind](**doc)
    except TypeError as exc:
        raise CodecError(f"malformed {kind} payload: {exc}") from exc


def encode_event(event: Event, include_timestamp: bool = True) -> str:
    doc: dict[str, Any] = {
        "id": event.id,
        "source": event.source.value,
        "kind": event.kind,
        "payload": payload_to_doc(event.payload),
    }
    if event.cause is not None:
        doc["cause"] = event.cause
    if include_timestamp:
        doc["timestamp"] = event.timestamp
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def decode_event(text: str) -> Event:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodecError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CodecError("event document must be an object")
    try:
        kind = doc["kind"]
        payload_doc = doc["payload"]
        payload_type = _PAYLOAD_TYPES[kind]
        payload = payload_type(**payload_doc)
        return Event(
            id=int(doc["id"]),
            source=Source(doc["source"]),
            payload=payload,
            cause=doc.get("cause"),
            timestamp=float(doc.get("timestamp", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CodecError(f"malformed event document: {exc}") from exc


def strip_timestamp(event: Event) -> Event:
    return replace(event, timestamp=0.0)


def replay_form(events: Sequence[Event]) -> list[str]:
    """Timestamp-free encodings, the form compared for replay determinism."""
    return [encode_event(ev, include_timestamp=False) for ev in events]


def write_trajectory(
    path: str,
    events: Sequence[Event],
    metadata: Optional[dict[str, Any]] = None,
) -> None:
    """Write a metadata header line followed by one encoded event per line."""
    lines = []
    header = {"type": "trajectory_meta"}
    header.update(metadata or {})
    lines.append(json.dumps(header, sort_keys=True, separators=(",", ":")))
    lines.extend(encode_event(ev) for ev in events)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path: str) -> tuple[dict[str, Any], list[Event]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        return {}, []
    metadata: dict[str, Any] = {}
    start = 0
    first = json.loads(lines[0])
    if isinstance(first, dict) and first.get("type") == "trajectory_meta":
        metadata = first
        start = 1
    return metadata, [decode_event(ln) for ln in lines[start:]]


def verify_stream_invariants(events: Sequence[Event]) -> None:
    """Check id contiguity, cause validity, and codec stability; raise on violation."""
    seen: set[int] = set()
    for index, ev in enumerate(events, start=1):
        if ev.id != index:
            raise CausalityError(
                f"event ids must be gap-free from 1; position {index} has id {ev.id}"
            )
        if ev.cause is not None and ev.cause not in seen:
            raise CausalityError(
                f"event {ev.id} references cause {ev.cause} which is not an earlier event"
            )
        encoded = encode_event(ev)
        if encode_event(decode_event(encoded)) != encoded:
            raise CodecError(f"event {ev.id} does not round-trip")
        seen.add(ev.id)
