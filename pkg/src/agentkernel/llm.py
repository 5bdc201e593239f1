"""Completion providers with cost metering and deterministic record/replay.

Four provider modes share one interface: live (remote endpoint), scripted
(canned response queue), record (wrap another provider, persist every
exchange), and replay (serve recorded responses only). Replay keys exchanges
by a digest of the normalized prompt so that volatile substrings (timestamps,
session ids, temp paths) do not invalidate recordings.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

ROLES = ("system", "user", "assistant")


class ProviderError(Exception):
    """Live transport or protocol failure."""


class ReplayMiss(Exception):
    """No recorded response matches the request."""

    def __init__(self, digest: str, nearest_digest: str = "", distance: int = -1,
                 nearest_preview: str = ""):
        detail = f"no recorded response for prompt digest {digest[:16]}"
        if nearest_digest:
            detail += (
                f"; nearest recorded digest {nearest_digest[:16]}"
                f" at edit distance {distance}"
            )
        if nearest_preview:
            detail += f"; nearest prompt starts: {nearest_preview[:120]!r}"
        super().__init__(detail)
        self.digest = digest
        self.nearest_digest = nearest_digest
        self.distance = distance


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[Message, ...]
    model: str = ""  # empty: provider's configured model
    temperature: float = 0.0
    max_tokens: int = 4096

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a completion request needs at least one message")
        for i, msg in enumerate(self.messages):
            if msg.role == "system" and i != 0:
                raise ValueError("system message must come first")


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Usage
    cost: float


def request_from_texts(pairs: Sequence[tuple[str, str]], model: str = "scripted") -> CompletionRequest:
    return CompletionRequest(
        messages=tuple(Message(role, content) for role, content in pairs), model=model
    )


# ---------------------------------------------------------------------------
# Prompt normalization

# Lines containing any of these are dropped wholesale before hashing; suites
# may register more (e.g. their workspace temp directory).
DEFAULT_VOLATILE_PATTERNS = (
    r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}",  # timestamps
    r"sess-[A-Za-z0-9]+",  # session ids
)


class Normalizer:
    """Canonicalizes prompts: role tags, volatile-line removal, whitespace."""

    def __init__(self, extra_patterns: Iterable[str] = ()):
        self._patterns = [re.compile(p) for p in DEFAULT_VOLATILE_PATTERNS]
        for pattern in extra_patterns:
            self._patterns.append(re.compile(pattern))

    def register(self, pattern: str) -> None:
        self._patterns.append(re.compile(pattern))

    def register_path(self, path: str) -> None:
        self.register(re.escape(path))

    def raw_prompt(self, request: CompletionRequest) -> str:
        parts = []
        for msg in request.messages:
            parts.append(f"<|{msg.role}|>")
            parts.append(msg.content)
        return "\n".join(parts)

    def normalize(self, request: CompletionRequest) -> str:
        kept = []
        for line in self.raw_prompt(request).split("\n"):
            if any(p.search(line) for p in self._patterns):
                continue
            kept.append(re.sub(r"[ \t]+", " ", line).rstrip())
        text = "\n".join(kept)
        return text.rstrip("\n")

    def digest(self, request: CompletionRequest) -> str:
        return digest_text(self.normalize(request))


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def edit_distance(a: str, b: str, cap: int = 2000) -> int:
    """Plain Levenshtein, truncated for diagnostics on large prompts."""
    a, b = a[:cap], b[:cap]
    if a == b:
        return 0
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


# ---------------------------------------------------------------------------
# Price table


DEFAULT_PRICES = {
    # model -> (input per 1K tokens, output per 1K tokens)
    "scripted": (0.0, 0.0),
    "default": (0.01, 0.03),
}


class PriceTable:
    def __init__(self, prices: Optional[dict[str, tuple[float, float]]] = None):
        self._prices = dict(DEFAULT_PRICES)
        if prices:
            self._prices.update(prices)

    def cost(self, model: str, usage: Usage) -> float:
        pin, pout = self._prices.get(model, self._prices["default"])
        return usage.input_tokens / 1000.0 * pin + usage.output_tokens / 1000.0 * pout


def approx_tokens(text: str) -> int:
    # documented approximation: one token per 4 characters
    return max(1, len(text) // 4) if text else 0


# ---------------------------------------------------------------------------
# Recording store


@dataclass(frozen=True)
class RecordingEntry:
    prompt_digest: str
    normalized_prompt: str
    raw_prompt: str
    response: str
    usage: Usage
    unit_cost: float

    def to_doc(self) -> dict:
        return {
            "prompt_digest": self.prompt_digest,
            "normalized_prompt": self.normalized_prompt,
            "raw_prompt": self.raw_prompt,
            "response": self.response,
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
            },
            "unit_cost": self.unit_cost,
        }

    @staticmethod
    def from_doc(doc: dict) -> "RecordingEntry":
        return RecordingEntry(
            prompt_digest=doc["prompt_digest"],
            normalized_prompt=doc["normalized_prompt"],
            raw_prompt=doc["raw_prompt"],
            response=doc["response"],
            usage=Usage(**doc["usage"]),
            unit_cost=float(doc["unit_cost"]),
        )


class Recording:
    """Digest-keyed prompt/response store; append-locked, snapshot reads."""

    def __init__(self, metadata: Optional[dict] = None):
        self.metadata = {"model": "scripted", "platform_version": ""}
        self.metadata.update(metadata or {})
        self._entries: list[RecordingEntry] = []
        self._lock = threading.RLock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def snapshot(self) -> tuple[RecordingEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def append(self, entry: RecordingEntry) -> None:
        with self._lock:
            if any(e.prompt_digest == entry.prompt_digest for e in self._entries):
                raise ValueError(f"duplicate digest {entry.prompt_digest[:16]}")
            self._entries.append(entry)

    def save(self, path: str) -> None:
        with self._lock:
            lines = [
                json.dumps(
                    {"type": "recording_meta", **self.metadata},
                    sort_keys=True,
                    separators=(",", ":"),
                )
            ]
            lines.extend(
                json.dumps(e.to_doc(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
                for e in self._entries
            )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def load(path: str) -> "Recording":
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        metadata = {}
        start = 0
        if lines:
            head = json.loads(lines[0])
            if isinstance(head, dict) and head.get("type") == "recording_meta":
                metadata = {k: v for k, v in head.items() if k != "type"}
                start = 1
        rec = Recording(metadata)
        for line in lines[start:]:
            rec.append(RecordingEntry.from_doc(json.loads(line)))
        return rec


def lookup(
    recording: Recording, request: CompletionRequest, normalizer: Normalizer
) -> Optional[RecordingEntry]:
    """Exact raw-prompt match first, then normalized-digest match, else None."""
    raw = normalizer.raw_prompt(request)
    entries = recording.snapshot()
    for entry in entries:
        if entry.raw_prompt == raw:
            return entry
    digest = normalizer.digest(request)
    for entry in entries:
        if entry.prompt_digest == digest:
            return entry
    return None


def nearest_entry(
    recording: Recording, normalized: str
) -> tuple[Optional[RecordingEntry], int]:
    best, best_distance = None, -1
    for entry in recording.snapshot():
        distance = edit_distance(entry.normalized_prompt, normalized)
        if best is None or distance < best_distance:
            best, best_distance = entry, distance
    return best, best_distance


# ---------------------------------------------------------------------------
# Providers


class ScriptedProvider:
    """Pops canned responses in order, ignoring prompt content."""

    def __init__(self, responses: Sequence[str], model: str = "scripted",
                 prices: Optional[PriceTable] = None):
        self._queue = list(responses)
        self._lock = threading.Lock()
        self.model = model
        self.prices = prices or PriceTable()

    def complete(self, request: CompletionRequest) -> CompletionResult:
        with self._lock:
            if not self._queue:
                raise ProviderError("scripted provider ran out of responses")
            text = self._queue.pop(0)
        usage = Usage(
            input_tokens=approx_tokens(
                "\n".join(m.content for m in request.messages)
            ),
            output_tokens=approx_tokens(text),
        )
        return CompletionResult(
            text=text,
            usage=usage,
            cost=self.prices.cost(request.model or self.model, usage),
        )


class ReplayProvider:
    """Serves recorded responses; a pure function of (recording, request)."""

    def __init__(self, recording: Recording, normalizer: Optional[Normalizer] = None):
        self.recording = recording
        self.normalizer = normalizer or Normalizer()

    def complete(self, request: CompletionRequest) -> CompletionResult:
        entry = lookup(self.recording, request, self.normalizer)
        if entry is None:
            normalized = self.normalizer.normalize(request)
            near, distance = nearest_entry(self.recording, normalized)
            raise ReplayMiss(
                digest_text(normalized),
                near.prompt_digest if near else "",
                distance,
                near.normalized_prompt if near else "",
            )
        return CompletionResult(entry.response, entry.usage, entry.unit_cost)


class RecordingProvider:
    """Wraps another provider and persists every exchange."""

    def __init__(self, inner, recording: Recording,
                 normalizer: Optional[Normalizer] = None, path: Optional[str] = None):
        self.inner = inner
        self.recording = recording
        self.normalizer = normalizer or Normalizer()
        self.path = path

    def complete(self, request: CompletionRequest) -> CompletionResult:
        result = self.inner.complete(request)
        entry = RecordingEntry(
            prompt_digest=self.normalizer.digest(request),
            normalized_prompt=self.normalizer.normalize(request),
            raw_prompt=self.normalizer.raw_prompt(request),
            response=result.text,
            usage=result.usage,
            unit_cost=result.cost,
        )
        try:
            self.recording.append(entry)
        except ValueError:
            pass  # same normalized prompt seen twice; first recording wins
        if self.path:
            self.recording.save(self.path)
        return result


class LiveProvider:
    """Generic chat-completion HTTP client (single fixed JSON schema)."""

    def __init__(self, endpoint: str, api_key: str = "", model: str = "default",
                 prices: Optional[PriceTable] = None, timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.prices = prices or PriceTable()
        self.timeout_s = timeout_s

    def complete(self, request: CompletionRequest) -> CompletionResult:
        body = json.dumps(
            {
                "model": request.model or self.model,
                "messages": [
                    {"role": m.role, "content": m.content} for m in request.messages
                ],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderError(f"completion endpoint failed: {exc}") from exc
        try:
            text = payload["choices"][0]["message"]["content"]
            usage_doc = payload.get("usage", {})
            usage = Usage(
                input_tokens=int(usage_doc.get("prompt_tokens", 0)),
                output_tokens=int(usage_doc.get("completion_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion payload: {exc}") from exc
        return CompletionResult(
            text=text,
            usage=usage,
            cost=self.prices.cost(request.model or self.model, usage),
        )


class MeteredProvider:
    """Accumulates cost across calls; the controller drains it per step."""

    def __init__(self, inner):
        self.inner = inner
        self._lock = threading.Lock()
        self._undrained = 0.0
        self.total_cost = 0.0
        self.calls = 0

    def complete(self, request: CompletionRequest) -> CompletionResult:
        result = self.inner.complete(request)
        with self._lock:
            self._undrained += result.cost
            self.total_cost += result.cost
            self.calls += 1
        return result

    def drain(self) -> float:
        with self._lock:
            amount = self._undrained
            self._undrained = 0.0
        return amount


# ---------------------------------------------------------------------------
# Environment wiring

ENV_ENDPOINT = "AK_LLM_ENDPOINT"
ENV_API_KEY = "AK_LLM_API_KEY"
ENV_MODE = "AK_LLM_MODE"
ENV_RECORDING = "AK_RECORDING_PATH"

MODES = ("live", "record", "replay", "scripted")


def provider_from_env(
    env: Optional[dict] = None,
    scripted_responses: Sequence[str] = (),
    normalizer: Optional[Normalizer] = None,
):
    """Build the provider selected by AK_LLM_MODE (default: replay)."""
    env = dict(os.environ if env is None else env)
    mode = env.get(ENV_MODE, "replay")
    if mode not in MODES:
        raise ValueError(f"{ENV_MODE} must be one of {MODES}, got {mode!r}")
    if mode == "scripted":
        return ScriptedProvider(scripted_responses)
    if mode == "replay":
        path = env.get(ENV_RECORDING)
        if not path:
            raise ValueError(f"{ENV_RECORDING} is required in replay mode")
        return ReplayProvider(Recording.load(path), normalizer)
    live = LiveProvider(
        endpoint=env.get(ENV_ENDPOINT, ""), api_key=env.get(ENV_API_KEY, "")
    )
    if mode == "live":
        if not live.endpoint:
            raise ValueError(f"{ENV_ENDPOINT} is required in live mode")
        return live
    path = env.get(ENV_RECORDING)
    if not path:
        raise ValueError(f"{ENV_RECORDING} is required in record mode")
    recording = Recording.load(path) if os.path.exists(path) else Recording()
    return RecordingProvider(live, recording, normalizer, path=path)
