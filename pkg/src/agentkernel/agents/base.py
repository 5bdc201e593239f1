"""Agent interface, response grammar for fenced action blocks, prompt overlays.

An agent is a pure step function from session state to exactly one action.
The model's textual response is classified by fenced tags into finish, shell,
code-cell, or browse actions; anything without a block is a message to the
user. Specialist agents are built by overlaying extra system text and an
action-kind restriction onto a base config.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from ..events import (
    ACTION_KINDS,
    Action,
    BrowseAction,
    CodeCellAction,
    FinishAction,
    MessageAction,
    ShellCommandAction,
)


class MalformedResponse(Exception):
    """Model response does not fit the agent's grammar."""


class InvalidOverlay(Exception):
    """Overlay would leave the agent with no permitted actions."""


class UnknownAgent(KeyError):
    """No agent registered under the requested name."""


@dataclass(frozen=True)
class MicroOverlay:
    extra_system_text: str = ""
    allowed_action_kinds: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.allowed_action_kinds is not None and not self.allowed_action_kinds:
            raise InvalidOverlay("allowed_action_kinds must be nonempty when given")


@dataclass(frozen=True)
class AgentConfig:
    name: str
    system_message: str
    grammar: str = "codeact"  # codeact | browsing
    allowed_action_kinds: tuple[str, ...] = ACTION_KINDS
    delegate_browsing: bool = True
    browse_delegate: str = "browsing"
    finish_on_browse_episode: bool = False
    history_char_budget: int = 2000

    def __post_init__(self) -> None:
        if not self.system_message:
            raise ValueError("system_message must be nonempty")
        if self.grammar not in ("codeact", "browsing"):
            raise ValueError(f"unknown grammar {self.grammar!r}")

    def allows(self, kind: str) -> bool:
        return kind in self.allowed_action_kinds


def apply_micro_overlay(base: AgentConfig, overlay: MicroOverlay) -> AgentConfig:
    """Stack a specialist overlay on a base config; the base is unchanged."""
    system_message = base.system_message
    if overlay.extra_system_text:
        system_message = f"{system_message}\n{overlay.extra_system_text}"
    allowed = base.allowed_action_kinds
    if overlay.allowed_action_kinds is not None:
        allowed = tuple(
            kind for kind in base.allowed_action_kinds
            if kind in overlay.allowed_action_kinds
        )
        if not allowed:
            raise InvalidOverlay(
                f"overlay leaves no permitted actions (base {base.allowed_action_kinds},"
                f" overlay {overlay.allowed_action_kinds})"
            )
    return replace(base, system_message=system_message, allowed_action_kinds=allowed)


@dataclass(frozen=True)
class AgentStepOutput:
    action: Action
    thought: str = ""


# ---------------------------------------------------------------------------
# CodeAct response grammar

_BLOCK_TAGS = ("execute_bash", "execute_ipython", "execute_browse", "finish")

_BLOCK_RE = {
    tag: re.compile(rf"<{tag}>(.*?)</{tag}>", re.DOTALL) for tag in _BLOCK_TAGS
}
_OPEN_RE = {tag: re.compile(rf"<{tag}>") for tag in _BLOCK_TAGS}


def parse_codeact_response(text: str) -> AgentStepOutput:
    """Classify one model response into exactly one action.

    Grammar: at most one fenced block; leading prose becomes the thought;
    no block at all means the whole text is a message that waits for the
    user. Unbalanced or repeated blocks are malformed.
    """
    found: list[tuple[str, re.Match]] = []
    for tag in _BLOCK_TAGS:
        matches = list(_BLOCK_RE[tag].finditer(text))
        opens = len(_OPEN_RE[tag].findall(text))
        if opens != len(matches):
            raise MalformedResponse(f"unbalanced <{tag}> block")
        found.extend((tag, m) for m in matches)

    if not found:
        content = text.strip()
        if not content:
            raise MalformedResponse("empty response")
        return AgentStepOutput(
            action=MessageAction(content=content, wait_for_user=True)
        )
    if len(found) > 1:
        kinds = ", ".join(tag for tag, _ in found)
        raise MalformedResponse(f"expected one action block, got {len(found)} ({kinds})")

    tag, match = found[0]
    thought = text[: match.start()].strip()
    body = match.group(1)
    if tag == "finish":
        action: Action = FinishAction(summary=body.strip(), thought=thought)
    elif tag == "execute_bash":
        action = ShellCommandAction(command=body.strip("\n"), thought=thought)
    elif tag == "execute_ipython":
        action = CodeCellAction(source=body.strip("\n"), thought=thought)
    else:
        action = BrowseAction(program=body.strip("\n"), thought=thought)
    return AgentStepOutput(action=action, thought=thought)


# ---------------------------------------------------------------------------
# Registry


@dataclass(frozen=True)
class AgentSpec:
    config: AgentConfig
    step: Callable  # (state, config, gateway) -> AgentStepOutput


class AgentRegistry:
    def __init__(self) -> None:
        self._specs: dict[str, AgentSpec] = {}

    def register(self, spec: AgentSpec, aliases: tuple[str, ...] = ()) -> None:
        for name in (spec.config.name, *aliases):
            if name in self._specs:
                raise ValueError(f"agent {name!r} already registered")
            self._specs[name] = spec

    def get(self, name: str) -> AgentSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownAgent(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def names(self) -> list[str]:
        return sorted(self._specs)
