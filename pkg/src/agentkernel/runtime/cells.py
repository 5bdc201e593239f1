"""Persistent in-process Python cell session with the skill library preloaded.

Cells share one namespace, so definitions persist. The last statement of a
cell echoes its repr when it is a bare non-None expression, mirroring
interactive interpreter behavior. A SystemExit (or other interpreter-level
escape) resets the namespace and reports the restart.
"""

from __future__ import annotations

import ast
import contextlib
import io
import traceback
from dataclasses import dataclass
from typing import Optional

from ..skills import SkillSession, StubMediaProvider


@dataclass
class CellResult:
    output: str
    error: bool = False
    restarted: bool = False


class CellSession:
    def __init__(self, workspace: str, media_provider: Optional[object] = None):
        self.workspace = workspace
        self.media_provider = media_provider or StubMediaProvider()
        self.skills: SkillSession = None  # set by _reset
        self._globals: dict = {}
        self._reset()

    def _reset(self) -> None:
        self.skills = SkillSession(root=self.workspace, media_provider=self.media_provider)
        self._globals = {"__name__": "__main__", "WORKSPACE": self.workspace}
        self._globals.update(self.skills.namespace())

    def run(self, source: str) -> CellResult:
        buffer = io.StringIO()
        try:
            tree = ast.parse(source, filename="<cell>", mode="exec")
        except SyntaxError:
            return CellResult(output=self._syntax_error_text(source), error=True)

        trailing_expr = None
        body = tree.body
        if body and isinstance(body[-1], ast.Expr):
            trailing_expr = ast.Expression(body[-1].value)
            body = body[:-1]

        try:
            with contextlib.redirect_stdout(buffer), contextlib.redirect_stderr(buffer):
                if body:
                    module = ast.Module(body=body, type_ignores=[])
                    exec(compile(module, "<cell>", "exec"), self._globals)
                if trailing_expr is not None:
                    value = eval(compile(trailing_expr, "<cell>", "eval"), self._globals)
                    if value is not None:
                        print(repr(value), file=buffer)
        except SystemExit:
            self._reset()
            return CellResult(
                output=buffer.getvalue() + "[cell session restarted]",
                error=True,
                restarted=True,
            )
        except KeyboardInterrupt:
            self._reset()
            return CellResult(
                output=buffer.getvalue() + "[cell session restarted]",
                error=True,
                restarted=True,
            )
        except BaseException:
            return CellResult(
                output=buffer.getvalue() + self._user_traceback(), error=True
            )
        return CellResult(output=buffer.getvalue())

    @staticmethod
    def _syntax_error_text(source: str) -> str:
        try:
            compile(source, "<cell>", "exec")
        except SyntaxError:
            return "".join(traceback.format_exc(limit=0))
        return "SyntaxError"

    @staticmethod
    def _user_traceback() -> str:
        # keep only frames from cell code; the runner's own frames are noise
        exc = traceback.TracebackException(*__import__("sys").exc_info())
        lines = ["Traceback (most recent call last):\n"]
        for frame in exc.stack:
            if frame.filename == "<cell>":
                lines.append(f'  File "<cell>", line {frame.lineno}\n')
        lines.extend(exc.format_exception_only())
        return "".join(lines)
