"""General-purpose agent: one model call per step, fenced action blocks.

History is replayed to the model as alternating assistant/user messages.
Each past action is re-rendered in the same block syntax the model emitted,
so the transcript it sees is stable across record and replay runs. Long
observations are clipped to a head and tail around an elision marker.
"""

from __future__ import annotations

from importlib import resources

from ..events import (
    Action,
    BrowseAction,
    BrowseResultObservation,
    CellResultObservation,
    CodeCellAction,
    DelegateAction,
    DelegateResultObservation,
    ErrorObservation,
    FinishAction,
    MessageAction,
    Observation,
    SessionState,
    ShellCommandAction,
    ShellResultObservation,
    UserMessageObservation,
)
from ..llm import CompletionRequest, Message
from .base import AgentConfig, AgentStepOutput, MalformedResponse, parse_codeact_response

TRUNCATION_MARKER = "\n... [truncated] ...\n"


def load_prompt(name: str) -> str:
    return (
        resources.files("agentkernel").joinpath("prompts", name).read_text("utf-8")
    )


def truncate_middle(text: str, budget: int) -> str:
    """Keep the head and tail of an overlong text, eliding the middle."""
    if budget <= 0 or len(text) <= budget:
        return text
    head = budget // 2
    tail = budget - head
    return text[:head] + TRUNCATION_MARKER + text[-tail:]


def _with_thought(thought: str, block: str) -> str:
    return f"{thought}\n{block}" if thought else block


def render_action(action: Action) -> str:
    """Reconstruct the assistant-turn text that produced this action."""
    if isinstance(action, ShellCommandAction):
        return _with_thought(
            action.thought, f"<execute_bash>\n{action.command}\n</execute_bash>"
        )
    if isinstance(action, CodeCellAction):
        return _with_thought(
            action.thought, f"<execute_ipython>\n{action.source}\n</execute_ipython>"
        )
    if isinstance(action, BrowseAction):
        return _with_thought(
            action.thought, f"<execute_browse>\n{action.program}\n</execute_browse>"
        )
    if isinstance(action, DelegateAction):
        # Delegated browsing round-trips as the browse block it came from.
        return _with_thought(
            action.thought, f"<execute_browse>\n{action.subtask}\n</execute_browse>"
        )
    if isinstance(action, FinishAction):
        return _with_thought(action.thought, f"<finish>{action.summary}</finish>")
    if isinstance(action, MessageAction):
        return action.content
    raise TypeError(f"unrenderable action {type(action).__name__}")


def render_observation(obs: Observation, char_budget: int = 2000) -> str:
    if isinstance(obs, ShellResultObservation):
        suffix = " [timed out]" if obs.timed_out else ""
        body = truncate_middle(obs.output, char_budget)
        return f"OBSERVATION (exit code {obs.exit_code}{suffix}):\n{body}"
    if isinstance(obs, CellResultObservation):
        return f"OBSERVATION:\n{truncate_middle(obs.output, char_budget)}"
    if isinstance(obs, BrowseResultObservation):
        body = truncate_middle(obs.page, char_budget)
        return f"OBSERVATION (browser, {obs.status}):\n{body}"
    if isinstance(obs, DelegateResultObservation):
        return f"OBSERVATION (delegate finished):\n{truncate_middle(obs.summary, char_budget)}"
    if isinstance(obs, ErrorObservation):
        return f"ERROR ({obs.category}):\n{truncate_middle(obs.message, char_budget)}"
    if isinstance(obs, UserMessageObservation):
        return obs.content
    raise TypeError(f"unrenderable observation {type(obs).__name__}")


def build_messages(state: SessionState, config: AgentConfig) -> list[Message]:
    """System message plus the rendered action/observation history."""
    messages = [Message(role="system", content=config.system_message)]
    for action_ev, obs_ev in state.history:
        if action_ev is None and obs_ev is not None:
            messages.append(
                Message(role="user", content=render_observation(obs_ev.payload))
            )
            continue
        if action_ev is not None:
            messages.append(
                Message(role="assistant", content=render_action(action_ev.payload))
            )
        if obs_ev is not None:
            messages.append(
                Message(
                    role="user",
                    content=render_observation(
                        obs_ev.payload, config.history_char_budget
                    ),
                )
            )
    return messages


def codeact_step(state: SessionState, config: AgentConfig, gateway) -> AgentStepOutput:
    request = CompletionRequest(messages=tuple(build_messages(state, config)))
    result = gateway.complete(request)
    output = parse_codeact_response(result.text)
    action = output.action
    if isinstance(action, BrowseAction) and config.delegate_browsing:
        action = DelegateAction(
            agent=config.browse_delegate,
            subtask=action.program,
            thought=action.thought,
        )
        output = AgentStepOutput(action=action, thought=output.thought)
    if not config.allows(action.kind):
        raise MalformedResponse(
            f"action kind {action.kind!r} is not permitted for agent {config.name!r}"
        )
    return output


def default_codeact_config() -> AgentConfig:
    return AgentConfig(
        name="codeact@1",
        system_message=load_prompt("codeact_system.md"),
        grammar="codeact",
    )
