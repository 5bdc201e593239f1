"""HTTP face of the execution backend, as served from inside the sandbox.

    POST /execute_action  {"session": id, "action": {"kind", "payload"}}
                          -> {"observation": {"kind", "payload"}}
    POST /cancel          {"session": id} -> {"cancelled": true}
    GET  /alive           -> {"status": "ok", "sessions": [...]}

Sessions are created on first use, each with its own workspace subdirectory
and persistent shell/cell state. Cancellation of an in-flight shell command
surfaces as an ActionCancelled error observation on the execute response.
"""

from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from ..events import CodecError, payload_from_doc, payload_to_doc
from .backend import ActionCancelled, LocalBackend, NotExecutable
from .images import RuntimeUnavailable


class RuntimeServer:
    def __init__(
        self,
        workspace_root: str,
        browse_fixture: Optional[str] = None,
        shell_timeout_s: float = 120.0,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.workspace_root = os.path.abspath(workspace_root)
        self.browse_fixture = browse_fixture
        self.shell_timeout_s = shell_timeout_s
        self._backends: dict[str, LocalBackend] = {}
        self._lock = threading.Lock()
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def backend(self, session_id: str) -> LocalBackend:
        with self._lock:
            if session_id not in self._backends:
                workspace = os.path.join(self.workspace_root, session_id)
                os.makedirs(workspace, exist_ok=True)
                self._backends[session_id] = LocalBackend(
                    workspace,
                    browse_fixture=self.browse_fixture,
                    shell_timeout_s=self.shell_timeout_s,
                )
            return self._backends[session_id]

    def sessions(self) -> list[str]:
        with self._lock:
            return sorted(self._backends)

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self.address

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        with self._lock:
            for backend in self._backends.values():
                backend.close()
            self._backends.clear()


def _make_handler(owner: RuntimeServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args) -> None:
            pass

        def _send(self, code: int, doc: dict) -> None:
            body = json.dumps(doc, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b"{}"
            doc = json.loads(raw.decode("utf-8"))
            if not isinstance(doc, dict):
                raise ValueError("request body must be a JSON object")
            return doc

        def do_GET(self) -> None:
            if self.path == "/alive":
                self._send(200, {"status": "ok", "sessions": owner.sessions()})
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self) -> None:
            try:
                doc = self._read_body()
            except (ValueError, json.JSONDecodeError) as exc:
                self._send(400, {"error": f"bad request body: {exc}"})
                return
            if self.path == "/execute_action":
                self._execute(doc)
            elif self.path == "/cancel":
                session = doc.get("session", "default")
                owner.backend(session).cancel()
                self._send(200, {"cancelled": True})
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def _execute(self, doc: dict) -> None:
            session = doc.get("session", "default")
            action_doc = doc.get("action") or {}
            try:
                action = payload_from_doc(
                    action_doc.get("kind", ""), action_doc.get("payload", {})
                )
            except CodecError as exc:
                self._send(400, {"error": str(exc)})
                return
            backend = owner.backend(session)
            try:
                observation = backend.dispatch_action(action)
            except NotExecutable as exc:
                self._send(409, {"error": str(exc)})
                return
            except RuntimeUnavailable as exc:
                self._send(503, {"error": str(exc)})
                return
            except ActionCancelled as exc:
                observation = _cancelled_observation(exc)
            self._send(
                200,
                {
                    "observation": {
                        "kind": observation.kind,
                        "payload": payload_to_doc(observation),
                    }
                },
            )

    return Handler


def _cancelled_observation(exc: ActionCancelled):
    from ..events import ErrorObservation

    return ErrorObservation(
        category="ActionCancelled",
        message=f"action cancelled; partial output: {exc.partial_output!r}",
    )
