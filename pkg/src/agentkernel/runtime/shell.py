"""Persistent bash session with sentinel-framed command execution.

One long-lived /bin/bash per session keeps cwd and environment across
commands. Each command is followed by a printf of a nonce marker plus the
exit code and cwd; the reader consumes output until the marker line appears.
Timeouts kill the command's process tree, never the session shell itself.
"""

from __future__ import annotations

import os
import re
import select
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Optional

import psutil

TIMEOUT_EXIT_CODE = 124  # matches coreutils timeout(1)
GRACE_AFTER_KILL_S = 5.0


class ShellSessionError(Exception):
    """The session shell could not be spawned or has become unusable."""


class CommandCancelled(Exception):
    """Raised when an in-flight command was cancelled out-of-band."""

    def __init__(self, partial_output: str):
        super().__init__("command cancelled")
        self.partial_output = partial_output


@dataclass
class ShellResult:
    exit_code: int
    output: str
    cwd: str
    timed_out: bool = False


class ShellSession:
    """Serialized persistent shell; one command in flight at a time."""

    def __init__(self, workspace: str, default_timeout_s: float = 120.0):
        self.workspace = os.path.abspath(workspace)
        self.default_timeout_s = default_timeout_s
        self.cwd = self.workspace
        self.last_exit_code = 0
        self._lock = threading.Lock()
        self._cancel = threading.Event()
        self._proc: Optional[subprocess.Popen] = None
        self._spawn()

    def _spawn(self) -> None:
        if not os.path.isdir(self.workspace):
            raise ShellSessionError(f"workspace {self.workspace} does not exist")
        env = dict(os.environ)
        env["PS1"] = ""
        env["TERM"] = "dumb"
        try:
            self._proc = subprocess.Popen(
                ["/bin/bash", "--noprofile", "--norc"],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                cwd=self.cwd if os.path.isdir(self.cwd) else self.workspace,
                env=env,
                start_new_session=True,
            )
        except OSError as exc:
            raise ShellSessionError(f"could not start bash: {exc}") from exc

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._kill_children()
                self._proc.kill()
                self._proc.wait(timeout=5)
            except (psutil.Error, OSError, subprocess.TimeoutExpired):
                pass
        self._proc = None

    def cancel(self) -> None:
        """Request cancellation of the in-flight command, if any."""
        self._cancel.set()

    def environ(self) -> dict[str, str]:
        """Snapshot of the live shell's exported environment."""
        result = self.run("env")
        out: dict[str, str] = {}
        for line in result.output.splitlines():
            key, sep, value = line.partition("=")
            if sep:
                out[key] = value
        return out

    # -- command execution ---------------------------------------------------

    def run(self, command: str, timeout_s: Optional[float] = None) -> ShellResult:
        with self._lock:
            self._cancel.clear()
            if not self.alive:
                self._spawn()
            try:
                return self._run_locked(command, timeout_s or self.default_timeout_s)
            except CommandCancelled:
                raise
            except ShellSessionError:
                raise
            except OSError as exc:
                raise ShellSessionError(f"shell I/O failed: {exc}") from exc

    def _run_locked(self, command: str, timeout_s: float) -> ShellResult:
        assert self._proc is not None
        marker = f"__AK_DONE_{uuid.uuid4().hex}"
        # Group keeps cwd/env mutations in the session shell; the stdin
        # redirect stops commands from swallowing the trailer lines.
        block = (
            "{\n"
            f"{command}\n"
            "} < /dev/null\n"
            "__ak_rc=$?\n"
            f"printf '\\n{marker} %d %s\\n' \"$__ak_rc\" \"$PWD\"\n"
        )
        self._proc.stdin.write(block.encode("utf-8"))
        self._proc.stdin.flush()

        pattern = re.compile(
            (re.escape(marker) + r" (\d+) (.*)\n").encode("utf-8")
        )
        buffered = bytearray()
        deadline = time.monotonic() + timeout_s
        killed = False
        cancelled = False
        grace_deadline = None

        while True:
            match = pattern.search(buffered)
            if match:
                raw = bytes(buffered[: match.start()])
                if raw.endswith(b"\n"):  # the newline printf injected
                    raw = raw[:-1]
                output = raw.decode("utf-8", errors="replace")
                reported = int(match.group(1))
                self.cwd = match.group(2).decode("utf-8", errors="replace")
                if cancelled:
                    raise CommandCancelled(output)
                if killed:
                    self.last_exit_code = TIMEOUT_EXIT_CODE
                    return ShellResult(
                        TIMEOUT_EXIT_CODE, output, self.cwd, timed_out=True
                    )
                self.last_exit_code = reported
                return ShellResult(reported, output, self.cwd)

            now = time.monotonic()
            if not killed and self._cancel.is_set():
                self._kill_children()
                killed = cancelled = True
                grace_deadline = now + GRACE_AFTER_KILL_S
            elif not killed and now >= deadline:
                self._kill_children()
                killed = True
                grace_deadline = now + GRACE_AFTER_KILL_S
            elif killed and now >= grace_deadline:
                # shell itself is stuck (e.g. unterminated quote); replace it
                partial = bytes(buffered).decode("utf-8", errors="replace")
                self.close()
                self._spawn()
                if cancelled:
                    raise CommandCancelled(partial)
                self.last_exit_code = TIMEOUT_EXIT_CODE
                return ShellResult(TIMEOUT_EXIT_CODE, partial, self.cwd, timed_out=True)

            if self._proc.poll() is not None:
                # the command exited the session shell; restart for next use
                partial = bytes(buffered).decode("utf-8", errors="replace")
                code = self._proc.returncode
                self._proc = None
                self._spawn()
                self.last_exit_code = code
                return ShellResult(code, partial, self.cwd)

            ready, _, _ = select.select([self._proc.stdout], [], [], 0.05)
            if ready:
                chunk = os.read(self._proc.stdout.fileno(), 65536)
                if chunk:
                    buffered.extend(chunk)

    def _kill_children(self) -> None:
        if self._proc is None:
            return
        try:
            parent = psutil.Process(self._proc.pid)
            children = parent.children(recursive=True)
        except psutil.Error:
            return
        for proc in children:
            try:
                proc.kill()
            except psutil.Error:
                pass
        psutil.wait_procs(children, timeout=2)
