"""File-manipulation skill library preloaded into code-cell sessions.

The editor model is a 100-line window over one open file at a time. All
operations return the text they would print; the cell integration wraps them
in print() so agents see the output as cell output.

Rendered window format (stable; gold files depend on it):

    [File: <path> (<N> lines total)]
    1|first line
    2|second line

Lines are the result of splitting on "\\n" with a trailing empty piece
dropped, so "a\\nb\\n" and "a\\nb" are both two lines; whether the file ended
with a newline is remembered and preserved on save.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

WINDOW_SIZE = 100

MEDIA_KINDS = ("pdf", "docx", "latex", "audio", "image", "video", "pptx")


def split_lines(text: str) -> tuple[list[str], bool]:
    """Return (lines, had_final_newline)."""
    if text == "":
        return [], False
    lines = text.split("\n")
    if lines[-1] == "":
        return lines[:-1], True
    return lines, False


def join_lines(lines: list[str], final_newline: bool) -> str:
    if not lines:
        return ""
    return "\n".join(lines) + ("\n" if final_newline else "")


def window_bounds(cursor: int, total: int, window: int = WINDOW_SIZE) -> tuple[int, int]:
    """1-based inclusive [first, last] of the window centered on cursor,
    clamped to the file. Empty file yields (1, 0)."""
    if total <= 0:
        return 1, 0
    n = min(window, total)
    first = max(1, min(cursor - (window // 2 - 1), total - n + 1))
    return first, first + n - 1


@dataclass
class FileWindow:
    path: str
    display_path: str
    cursor: int
    total: int
    final_newline: bool
    window: int = WINDOW_SIZE


class StubMediaProvider:
    """Deterministic placeholder provider; real model backends plug in here."""

    def parse(self, path: str, kind: str, **options) -> str:
        return f"[stub {kind}: {path}]"


@dataclass
class SkillSession:
    """Editor state for one code-cell session: the open file and its window."""

    root: str = "."
    media_provider: object = field(default_factory=StubMediaProvider)
    current: Optional[FileWindow] = None

    def _resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.root, path)

    # -- rendering ---------------------------------------------------------

    def _render(self) -> str:
        assert self.current is not None
        fw = self.current
        with open(fw.path, encoding="utf-8", newline="") as fh:
            lines, _ = split_lines(fh.read())
        fw.total = len(lines)
        first, last = window_bounds(fw.cursor, fw.total, fw.window)
        # renormalize so repeated scrolls step through the file evenly
        if fw.total > 0:
            fw.cursor = (first + last) // 2
        out = [f"[File: {fw.display_path} ({fw.total} lines total)]"]
        for number in range(first, last + 1):
            out.append(f"{number}|{lines[number - 1]}")
        return "\n".join(out)

    # -- skills ------------------------------------------------------------

    def open_file(self, path: str, line_number: Optional[int] = None) -> str:
        """Open a file; the window moves to include line_number if given."""
        resolved = self._resolve(path)
        if not os.path.isfile(resolved):
            return f"File {path} not found"
        with open(resolved, encoding="utf-8", newline="") as fh:
            lines, final_newline = split_lines(fh.read())
        total = len(lines)
        if line_number is None:
            cursor = 1
        else:
            cursor = min(max(line_number, 1), max(total, 1))
        self.current = FileWindow(
            path=resolved,
            display_path=path,
            cursor=cursor,
            total=total,
            final_newline=final_newline,
        )
        return self._render()

    def goto_line(self, line_number: int) -> str:
        """Move the window to show the given line (clamped to the file)."""
        if self.current is None:
            return "No file open"
        self.current.cursor = min(max(line_number, 1), max(self.current.total, 1))
        return self._render()

    def scroll_down(self) -> str:
        """Move the window down by one window height."""
        if self.current is None:
            return "No file open"
        self.current.cursor += self.current.window
        return self._render()

    def scroll_up(self) -> str:
        """Move the window up by one window height."""
        if self.current is None:
            return "No file open"
        self.current.cursor -= self.current.window
        return self._render()

    def create_file(self, filename: str) -> str:
        """Create and open a new file containing a single empty line."""
        resolved = self._resolve(filename)
        if os.path.exists(resolved):
            return f"File already exists: {filename}"
        parent = os.path.dirname(resolved) or "."
        if not os.path.isdir(parent):
            return f"Directory {os.path.dirname(filename) or '.'} not found"
        with open(resolved, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n")
        return self.open_file(filename)

    def edit_file(self, start: int, end: int, content: str) -> str:
        """Replace lines start..end (inclusive, 1-based) with content."""
        if self.current is None:
            return "No file open"
        fw = self.current
        with open(fw.path, encoding="utf-8", newline="") as fh:
            lines, final_newline = split_lines(fh.read())
        total = len(lines)
        if not (1 <= start and start <= end and end <= total):
            return (
                f"Invalid line range: start={start}, end={end}; "
                f"must satisfy 1 <= start <= end <= {total}"
            )
        new_lines = lines[: start - 1] + content.split("\n") + lines[end:]
        with open(fw.path, "w", encoding="utf-8", newline="") as fh:
            fh.write(join_lines(new_lines, final_newline))
        fw.cursor = start
        fw.final_newline = final_newline
        return self._render()

    def search_file(self, search_term: str, file_path: Optional[str] = None) -> str:
        """Literal, case-sensitive search in a file (default: the open file)."""
        if file_path is None:
            if self.current is None:
                return "No file open"
            resolved, display = self.current.path, self.current.display_path
        else:
            resolved, display = self._resolve(file_path), file_path
        if not os.path.isfile(resolved):
            return f"File {display} not found"
        matches = self._scan(resolved, display, search_term)
        if not matches:
            return f'No matches found for "{search_term}"'
        return "\n".join(matches)

    def search_dir(self, search_term: str, dir_path: str = "./") -> str:
        """Literal search in every readable file under a directory."""
        resolved = self._resolve(dir_path)
        if not os.path.isdir(resolved):
            return f"Directory {dir_path} not found"
        matches: list[str] = []
        for base, _dirs, names in sorted(os.walk(resolved)):
            for name in sorted(names):
                full = os.path.join(base, name)
                rel = os.path.join(dir_path, os.path.relpath(full, resolved))
                matches.extend(self._scan(full, os.path.normpath(rel), search_term))
        if not matches:
            return f'No matches found for "{search_term}"'
        return "\n".join(matches)

    @staticmethod
    def _scan(resolved: str, display: str, term: str) -> list[str]:
        try:
            with open(resolved, encoding="utf-8", newline="") as fh:
                text = fh.read()
        except (OSError, UnicodeDecodeError):
            return []
        lines, _ = split_lines(text)
        return [
            f"{display}:{number}: {line}"
            for number, line in enumerate(lines, start=1)
            if term in line
        ]

    def find_file(self, file_name: str, dir_path: str = "./") -> str:
        """List every file under dir_path whose basename equals file_name."""
        resolved = self._resolve(dir_path)
        if not os.path.isdir(resolved):
            return f"Directory {dir_path} not found"
        hits = []
        for base, _dirs, names in sorted(os.walk(resolved)):
            for name in sorted(names):
                if name == file_name:
                    rel = os.path.join(dir_path, os.path.relpath(os.path.join(base, name), resolved))
                    hits.append(os.path.normpath(rel))
        if not hits:
            return f'No matches found for "{file_name}" in {dir_path}'
        return "\n".join(sorted(hits))

    def parse_media(self, file_path: str, kind: str, **options) -> str:
        """Route a media file to the configured provider (stub by default)."""
        if kind not in MEDIA_KINDS:
            return f"Unsupported media kind: {kind}"
        resolved = self._resolve(file_path)
        if not os.path.isfile(resolved):
            return f"File {file_path} not found"
        return self.media_provider.parse(file_path, kind, **options)

    # -- cell integration ----------------------------------------------------

    def namespace(self) -> dict[str, Callable]:
        """Callables injected into code cells; each prints its result."""

        def printing(fn):
            def wrapper(*args, **kwargs):
                print(fn(*args, **kwargs))

            wrapper.__name__ = fn.__name__
            wrapper.__doc__ = fn.__doc__
            return wrapper

        def media(kind, **defaults):
            def skill(file_path: str, **options):
                merged = {**defaults, **options}
                print(self.parse_media(file_path, kind, **merged))

            skill.__name__ = f"parse_{kind}"
            return skill

        names = {
            fn.__name__: printing(fn)
            for fn in (
                self.open_file,
                self.goto_line,
                self.scroll_down,
                self.scroll_up,
                self.create_file,
                self.edit_file,
                self.search_dir,
                self.search_file,
                self.find_file,
            )
        }
        names["parse_pdf"] = media("pdf")
        names["parse_docx"] = media("docx")
        names["parse_latex"] = media("latex")
        names["parse_audio"] = media("audio", model="whisper-1")
        names["parse_image"] = media(
            "image", task="Describe this image as detail as possible."
        )
        names["parse_video"] = media(
            "video", task="Describe this image as detail as possible.", frame_interval=30
        )
        names["parse_pptx"] = media("pptx")
        return names
