"""Browsing specialist: one accessibility-tree prompt per step.

The per-step prompt is assembled from fixed section text plus three variable
parts: the goal, the latest rendered page tree, and the programs already
executed. The action-space section is generated from the same signature
table the validator uses, so prompt and parser cannot drift apart. The
model answers with free-form reasoning ending in one triple-backtick block
holding the next program.
"""

from __future__ import annotations

import hashlib
import re

from ..browse.actions import AGENT_CONFIG, ActionSetConfig, Primitive
from ..browse.parser import ParseError, parse_action_program, print_program
from ..browse.sim import initial_state, render_observation
from ..events import (
    BrowseAction,
    BrowseResultObservation,
    SessionState,
    UserMessageObservation,
)
from ..llm import CompletionRequest, Message
from .base import AgentConfig, AgentStepOutput, MalformedResponse

_INSTRUCTIONS = (
    "# Instructions\n"
    "Review the current state of the page and all other information to find the "
    "best possible next action to accomplish your goal. Your answer will be "
    "interpreted and executed by a program, make sure to follow the formatting "
    "instructions.\n"
)

_MULTI_ACTION_NOTE = (
    "Multiple actions can be provided at once. Example:\n"
    "fill('a12', 'example with \"quotes\"')\n"
    "click('51')\n"
    "click('48', button='middle', modifiers=['Shift'])\n"
    "Multiple actions are meant to be executed sequentially without any feedback "
    "from the page.\n"
    "Don't execute multiple actions at once if you need feedback from the page.\n"
)

_CLICK_EXAMPLE = (
    "Here is an example with chain of thought of a valid action when clicking on "
    "a button:\n"
    '"\n'
    "In order to accomplish my goal I need to click on the button with bid 12\n"
    '```click("12")```\n'
    '"\n'
)

# Keeps answers to lookup-style goals terse enough for exact-match checking.
_CONCISE_ANSWER_EXAMPLE = (
    "Here is another example with chain of thought of a valid action when "
    "providing a concise answer to user:\n"
    '"\n'
    "In order to accomplish my goal I need to send the information asked back "
    "to the user. This page list the information of HP Inkjet Fax Machine, which "
    "is the product identified in the objective. Its price is $279.49. I will "
    "send a message back to user with the answer.\n"
    '```send_msg_to_user("$279.49")```\n'
    '"'
)


def render_primitive_entry(primitive: Primitive) -> str:
    examples = "\n\n".join(f"        {ex}" for ex in primitive.examples)
    return f"{primitive.signature}\n    Examples:\n{examples}\n"


def render_action_space(action_set: ActionSetConfig = AGENT_CONFIG) -> str:
    primitives = action_set.enabled_primitives()
    entries = "\n".join(render_primitive_entry(p) for p in primitives)
    return (
        "# Action Space\n"
        "\n"
        f"{len(primitives)} different types of actions are available.\n"
        "\n"
        f"{entries}"
        "\n"
        f"{_MULTI_ACTION_NOTE}"
    )


def build_step_prompt(
    goal: str,
    tree: str,
    previous_programs: list[str],
    action_set: ActionSetConfig = AGENT_CONFIG,
) -> str:
    previous = "".join(f"{line}\n" for line in previous_programs)
    return (
        f"{_INSTRUCTIONS}"
        "\n"
        "# Goal:\n"
        f"{goal}\n"
        "\n"
        f"{render_action_space(action_set)}"
        "\n"
        "# Current Accessibility Tree:\n"
        f"{tree}\n"
        "\n"
        "# Previous Actions\n"
        f"{previous}"
        "\n"
        f"{_CLICK_EXAMPLE}"
        "\n"
        f"{_CONCISE_ANSWER_EXAMPLE}"
    )


def step_inputs(state: SessionState) -> tuple[str, str, list[str]]:
    """Extract (goal, current tree, prior program lines) from the history."""
    goal = ""
    tree = render_observation(initial_state({}))
    programs: list[str] = []
    for ev in state.events:
        payload = ev.payload
        if isinstance(payload, UserMessageObservation) and not goal:
            goal = payload.content
        elif isinstance(payload, BrowseAction):
            # prior actions are echoed in canonical print form, however the
            # model quoted them
            try:
                printed = print_program(parse_action_program(payload.program))
            except ParseError:
                printed = payload.program
            programs.extend(printed.splitlines())
        elif isinstance(payload, BrowseResultObservation):
            tree = payload.page
    return goal, tree, programs


_TICK_BLOCK_RE = re.compile(r"```(.*?)```", re.DOTALL)


def parse_browsing_response(text: str) -> AgentStepOutput:
    """Final triple-backtick block is the program; the rest is thought."""
    blocks = list(_TICK_BLOCK_RE.finditer(text))
    if not blocks:
        raise MalformedResponse("no triple-backtick action block in response")
    last = blocks[-1]
    program = last.group(1).strip("\n")
    if not program.strip():
        raise MalformedResponse("empty action block")
    thought = text[: last.start()].strip()
    return AgentStepOutput(
        action=BrowseAction(program=program, thought=thought), thought=thought
    )


def browsing_step(state: SessionState, config: AgentConfig, gateway) -> AgentStepOutput:
    goal, tree, programs = step_inputs(state)
    prompt = build_step_prompt(goal, tree, programs)
    request = CompletionRequest(
        messages=(
            Message(role="system", content=config.system_message),
            Message(role="user", content=prompt),
        )
    )
    result = gateway.complete(request)
    return parse_browsing_response(result.text)


def prompt_fingerprint(config: AgentConfig) -> str:
    """Hash of the fixed prompt parts; stored in recordings to catch drift."""
    fixed = config.system_message + "\0" + build_step_prompt("", "", [])
    return hashlib.sha256(fixed.encode("utf-8")).hexdigest()
