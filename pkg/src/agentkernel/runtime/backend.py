"""Per-session execution backend: routes actions to shell, cells, or browser.

Controller-level actions (message, finish, delegate) are rejected here; the
runtime only executes environment-facing actions. One action runs at a time
per session; cancel() may interrupt an in-flight shell command out-of-band.
"""

from __future__ import annotations

import os
import threading
from typing import Optional, Union

from .. import browse
from ..events import (
    Action,
    BrowseAction,
    BrowseResultObservation,
    CellResultObservation,
    CodeCellAction,
    ErrorObservation,
    Observation,
    ShellCommandAction,
    ShellResultObservation,
)
from .cells import CellSession
from .images import RuntimeUnavailable
from .shell import CommandCancelled, ShellSession, ShellSessionError


class NotExecutable(Exception):
    """Action is controller-level and cannot run in the sandbox."""


class ActionCancelled(Exception):
    """In-flight action was cancelled by an out-of-band request."""

    def __init__(self, partial_output: str = ""):
        super().__init__("action cancelled")
        self.partial_output = partial_output


class LocalBackend:
    """Process-level sandbox: persistent shell + cell session + page simulator.

    Runs everything on the host, confined to the workspace by convention; it
    exists so the platform works with no container engine. Container-backed
    deployments swap this class behind the same dispatch interface.
    """

    def __init__(
        self,
        workspace: str,
        browse_fixture: Optional[str] = None,
        shell_timeout_s: float = 120.0,
        media_provider: Optional[object] = None,
    ):
        if not os.path.isdir(workspace):
            raise RuntimeUnavailable(f"workspace {workspace} does not exist")
        if not os.access(workspace, os.W_OK):
            raise RuntimeUnavailable(f"workspace {workspace} is not writable")
        self.workspace = os.path.abspath(workspace)
        self.shell = ShellSession(self.workspace, default_timeout_s=shell_timeout_s)
        self.cells = CellSession(self.workspace, media_provider=media_provider)
        if browse_fixture:
            self.browser = browse.load_site(browse_fixture)
        else:
            self.browser = browse.initial_state({})
        self._lock = threading.RLock()
        self._closed = False

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self.shell.close()

    def cancel(self) -> None:
        # deliberately not under the dispatch lock
        self.shell.cancel()

    def dispatch_action(self, action: Action) -> Observation:
        if action.kind in ("message", "finish", "delegate"):
            raise NotExecutable(f"{action.kind} actions are handled by the controller")
        with self._lock:
            if self._closed:
                raise RuntimeUnavailable("backend is closed")
            if isinstance(action, ShellCommandAction):
                return self._run_shell(action)
            if isinstance(action, CodeCellAction):
                return self._run_cell(action)
            if isinstance(action, BrowseAction):
                return self._run_browse(action)
        raise NotExecutable(f"no executor for action kind {action.kind!r}")

    # -- executors -----------------------------------------------------------

    def _run_shell(self, action: ShellCommandAction) -> Observation:
        try:
            result = self.shell.run(action.command, timeout_s=action.timeout_s)
        except CommandCancelled as exc:
            raise ActionCancelled(exc.partial_output) from exc
        except ShellSessionError as exc:
            return ErrorObservation(category="ShellSpawnFailure", message=str(exc))
        return ShellResultObservation(
            exit_code=result.exit_code,
            output=result.output,
            cwd=self._relative_cwd(result.cwd),
            timed_out=result.timed_out,
        )

    def _relative_cwd(self, cwd: str) -> str:
        # observations carry workspace-relative paths so recorded streams
        # compare equal across runs in different temp directories
        rel = os.path.relpath(cwd, self.workspace)
        return cwd if rel.startswith("..") else rel

    def _run_cell(self, action: CodeCellAction) -> Observation:
        result = self.cells.run(action.source)
        if result.restarted:
            return ErrorObservation(
                category="CellSessionRestarted", message=result.output
            )
        return CellResultObservation(output=result.output)

    def _run_browse(self, action: BrowseAction) -> Observation:
        try:
            program = browse.parse_action_program(action.program)
        except browse.ParseError as exc:
            return ErrorObservation(category="BrowseParseError", message=str(exc))
        state, statuses = browse.run_program(self.browser, program)
        self.browser = state
        failed = next((s for s in statuses if not s.ok), None)
        if state.infeasible:
            status = "infeasible"
        elif failed is not None:
            status = "error"
        else:
            status = "ok"
        page_text = browse.render_observation(state)
        if failed is not None:
            page_text += f"\n\nError: {failed.error}"
        return BrowseResultObservation(
            page=page_text,
            status=status,
            url=state.page.url,
            message_to_user=state.message_to_user,
            episode_over=state.episode_over,
        )
