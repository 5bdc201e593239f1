"""Operator API: multiplexes live agent sessions for headless and UI clients.

    GET  /sessions                 -> {"sessions": [...]}
    POST /sessions                 {"task", "agent"?, "scripted_responses"?,
                                    "recording"?, "limits"?}
                                   -> {"session_id", "agent"}
    POST /sessions/<id>/message    {"text", "interrupt"?} -> {"event_id"}
    GET  /sessions/<id>/events     chunked NDJSON: every event from id 1 in
                                   canonical encoding (same bytes as
                                   trajectory lines), then one final
                                   {"feed_end": {...}} control line

Each session runs its controller on its own thread against a private
workspace subdirectory. The feed always replays from the first event, so
reconnecting clients can rebuild state and verify id contiguity themselves.
"""

from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .agents import AgentRegistry, UnknownAgent, default_registry
from .controller import SessionController
from .events import SessionClosed, SessionLimits, encode_event
from .llm import (
    LiveProvider,
    MeteredProvider,
    Recording,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
)
from .runtime import LocalBackend


class SessionHandle:
    def __init__(self, session_id: str, controller: SessionController,
                 backend: LocalBackend, task: str):
        self.session_id = session_id
        self.controller = controller
        self.backend = backend
        self.task = task
        self.thread = threading.Thread(
            target=controller.run, args=(task,), daemon=True,
            name=f"session-{session_id}",
        )

    @property
    def status(self) -> str:
        if self.controller.result is not None:
            return "done"
        return "running" if self.thread.is_alive() else "starting"

    def describe(self) -> dict:
        doc = {
            "session_id": self.session_id,
            "agent": self.controller.agent_name,
            "status": self.status,
            "events": len(self.controller.state.events),
            "task": self.task,
        }
        if self.controller.result is not None:
            doc["reason"] = self.controller.result.reason
            doc["summary"] = self.controller.result.summary
        return doc


class ControllerHub:
    """Creates sessions and owns their backends, gateways, and threads."""

    def __init__(
        self,
        root_dir: str,
        mode: str = "scripted",
        registry: Optional[AgentRegistry] = None,
        limits: Optional[SessionLimits] = None,
        browse_fixture: Optional[str] = None,
        recording_path: str = "",
        endpoint: str = "",
        api_key: str = "",
        model: str = "default",
    ):
        self.root_dir = os.path.abspath(root_dir)
        os.makedirs(self.root_dir, exist_ok=True)
        self.mode = mode
        self.registry = registry or default_registry()
        self.limits = limits or SessionLimits()
        self.browse_fixture = browse_fixture
        self.recording_path = recording_path
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self._sessions: dict[str, SessionHandle] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def _gateway(self, doc: dict):
        if self.mode == "scripted":
            responses = doc.get("scripted_responses", [])
            if not isinstance(responses, list):
                raise ValueError("scripted_responses must be a list of strings")
            return MeteredProvider(
                ScriptedProvider([str(r) for r in responses], model="default")
            )
        if "scripted_responses" in doc:
            raise ValueError("scripted_responses only allowed in scripted mode")
        if self.mode == "replay":
            path = doc.get("recording", self.recording_path)
            if not path or not os.path.isfile(path):
                raise ValueError(f"replay mode needs an existing recording, got {path!r}")
            return MeteredProvider(ReplayProvider(Recording.load(path)))
        live = LiveProvider(
            endpoint=self.endpoint, api_key=self.api_key, model=self.model
        )
        if self.mode == "live":
            return MeteredProvider(live)
        # record mode
        path = doc.get("recording", self.recording_path)
        if not path:
            raise ValueError("record mode needs a recording path")
        recording = Recording.load(path) if os.path.exists(path) else Recording()
        return MeteredProvider(RecordingProvider(live, recording, path=path))

    def create_session(self, doc: dict) -> SessionHandle:
        task = doc.get("task", "")
        if not task:
            raise ValueError("task text is required")
        agent = doc.get("agent", "codeact@1")
        limits = self.limits
        if "limits" in doc:
            body = doc["limits"]
            limits = SessionLimits(
                max_iterations=int(body.get("max_iterations", limits.max_iterations)),
                max_cost=float(body.get("max_cost", limits.max_cost)),
                max_delegation_depth=int(
                    body.get("max_delegation_depth", limits.max_delegation_depth)
                ),
            )
        gateway = self._gateway(doc)
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter}"
        workspace = os.path.join(self.root_dir, session_id)
        os.makedirs(workspace, exist_ok=True)
        backend = LocalBackend(workspace, browse_fixture=self.browse_fixture)
        controller = SessionController(
            agent_name=agent,
            backend=backend,
            gateway=gateway,
            registry=self.registry,
            limits=limits,
            session_id=session_id,
            headless=False,  # UI sessions keep running across user replies
        )
        handle = SessionHandle(session_id, controller, backend, task)
        with self._lock:
            self._sessions[session_id] = handle
        handle.thread.start()
        return handle

    def get(self, session_id: str) -> SessionHandle:
        with self._lock:
            if session_id not in self._sessions:
                raise KeyError(session_id)
            return self._sessions[session_id]

    def list_sessions(self) -> list[dict]:
        with self._lock:
            handles = sorted(self._sessions.values(), key=lambda h: h.session_id)
        return [h.describe() for h in handles]

    def close(self) -> None:
        with self._lock:
            handles = list(self._sessions.values())
        for handle in handles:
            handle.controller.abort()
        for handle in handles:
            handle.thread.join(timeout=10)
            handle.backend.close()


class UIServer:
    def __init__(self, hub: ControllerHub, host: str = "127.0.0.1", port: int = 0):
        self.hub = hub
        self.httpd = ThreadingHTTPServer((host, port), _make_handler(hub))
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self.address

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.hub.close()


def _make_handler(hub: ControllerHub):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args) -> None:
            pass

        def _send(self, code: int, doc: dict) -> None:
            body = json.dumps(doc, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_OPTIONS(self) -> None:
            # CORS preflight for UI clients served from another origin
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b"{}"
            doc = json.loads(raw.decode("utf-8"))
            if not isinstance(doc, dict):
                raise ValueError("request body must be a JSON object")
            return doc

        # -- routing -----------------------------------------------------

        def do_GET(self) -> None:
            parts = [p for p in self.path.split("/") if p]
            if parts == ["sessions"]:
                self._send(200, {"sessions": hub.list_sessions()})
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "events":
                self._feed(parts[1])
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self) -> None:
            try:
                doc = self._read_body()
            except (ValueError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"bad request body: {exc}"})
                return
            parts = [p for p in self.path.split("/") if p]
            if parts == ["sessions"]:
                self._create(doc)
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "message":
                self._message(parts[1], doc)
            else:
                self._send(404, {"error": f"no route {self.path}"})

        # -- handlers ----------------------------------------------------

        def _create(self, doc: dict) -> None:
            try:
                handle = hub.create_session(doc)
            except (ValueError, UnknownAgent) as exc:
                self._send(400, {"error": str(exc)})
                return
            self._send(
                200,
                {
                    "session_id": handle.session_id,
                    "agent": handle.controller.agent_name,
                },
            )

        def _message(self, session_id: str, doc: dict) -> None:
            try:
                handle = hub.get(session_id)
            except KeyError:
                self._send(404, {"error": f"no session {session_id}"})
                return
            text = doc.get("text", "")
            if not text:
                self._send(400, {"error": "text is required"})
                return
            try:
                event_id = handle.controller.inject_user_message(
                    text, interrupt=bool(doc.get("interrupt", False))
                )
            except SessionClosed:
                self._send(409, {"error": "session has ended"})
                return
            except TimeoutError as exc:
                self._send(504, {"error": str(exc)})
                return
            self._send(200, {"event_id": event_id})

        # -- event feed ----------------------------------------------------

        def _write_chunk(self, data: bytes) -> None:
            self.wfile.write(f"{len(data):X}\r\n".encode("ascii"))
            self.wfile.write(data)
            self.wfile.write(b"\r\n")

        def _feed(self, session_id: str) -> None:
            try:
                handle = hub.get(session_id)
            except KeyError:
                self._send(404, {"error": f"no session {session_id}"})
                return
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Transfer-Encoding", "chunked")
            self.send_header("Cache-Control", "no-store")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()

            stream = handle.controller.state.events
            next_id = 1
            try:
                while True:
                    snapshot = stream.snapshot()
                    while next_id <= len(snapshot):
                        line = encode_event(snapshot[next_id - 1]) + "\n"
                        self._write_chunk(line.encode("utf-8"))
                        next_id += 1
                    if stream.closed and next_id > len(snapshot):
                        break
                    with stream.changed:
                        if not stream.closed and len(stream) < next_id:
                            stream.changed.wait(timeout=0.25)
                if handle.controller.result is None:
                    # stream closes a hair before run() stores the result
                    handle.thread.join(timeout=5)
                result = handle.controller.result
                banner = {
                    "feed_end": {
                        "reason": result.reason if result else "unknown",
                        "summary": result.summary if result else "",
                        "events": next_id - 1,
                    }
                }
                self._write_chunk(
                    (json.dumps(banner, sort_keys=True) + "\n").encode("utf-8")
                )
                self.wfile.write(b"0\r\n\r\n")
            except (BrokenPipeError, ConnectionResetError):
                pass  # client went away; nothing to clean up

    return Handler
