"""Session controller: drives the agent loop and owns the event stream.

Each turn: ask the agent for one action, append it, execute it (or handle
it at this level for message/finish/delegate), append the observation, and
charge any metered cost. The loop stops for one of six reasons:

    finished        agent emitted Finish, or a browse episode ended
    awaiting_user   agent messaged the user (headless), or gave up re-prompting
    max_iterations  iteration ceiling reached
    max_cost        cost ceiling reached
    user_abort      abort() was called
    runtime_error   sandbox or model gateway failed

Delegation is synchronous: the parent blocks while the child runs to
completion on the same backend and gateway, inheriting whatever iteration
and cost budget the parent has left. User messages may be injected at any
time; with interrupt=True an in-flight command is cancelled first and the
cancellation record always precedes the injected message in the stream.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from .agents import AgentRegistry, MalformedResponse, default_registry
from .events import (
    BrowseResultObservation,
    DelegateAction,
    ErrorObservation,
    FinishAction,
    MessageAction,
    SessionClosed,
    SessionLimits,
    SessionState,
    Source,
    UserMessageObservation,
)
from .llm import ProviderError, ReplayMiss
from .runtime import ActionCancelled, NotExecutable, RuntimeUnavailable

TERMINATION_REASONS = (
    "finished",
    "awaiting_user",
    "max_iterations",
    "max_cost",
    "user_abort",
    "runtime_error",
)

MAX_REPROMPTS = 3


class StepPurityError(AssertionError):
    """An agent step mutated session state; steps must be read-only."""


@dataclass
class SessionResult:
    reason: str
    summary: str
    state: SessionState

    def __post_init__(self) -> None:
        if self.reason not in TERMINATION_REASONS:
            raise ValueError(f"unknown termination reason {self.reason!r}")


class _Terminate(Exception):
    def __init__(self, reason: str, summary: str = ""):
        self.reason = reason
        self.summary = summary


@dataclass
class _PendingMessage:
    text: str
    done: threading.Event = field(default_factory=threading.Event)
    event_id: Optional[int] = None


class SessionController:
    def __init__(
        self,
        agent_name: str,
        backend,
        gateway,
        registry: Optional[AgentRegistry] = None,
        limits: Optional[SessionLimits] = None,
        session_id: str = "main",
        headless: bool = True,
        delegation_depth: int = 0,
        purity_checks: bool = True,
    ):
        self.registry = registry or default_registry()
        spec = self.registry.get(agent_name)
        self.agent_name = agent_name
        self.config = spec.config
        self._step = spec.step
        self.backend = backend
        self.gateway = gateway
        self.session_id = session_id
        self.headless = headless
        self.purity_checks = purity_checks
        self.state = SessionState(
            limits=limits or SessionLimits(), delegation_depth=delegation_depth
        )
        self.result: Optional[SessionResult] = None
        self._inject_lock = threading.Lock()
        self._pending: list[_PendingMessage] = []
        self._inflight = False
        self._abort = False

    # -- public API -----------------------------------------------------------

    def run(self, task_text: str) -> SessionResult:
        self.state.events.append(
            Source.USER, UserMessageObservation(content=task_text)
        )
        try:
            reason, summary = self._loop()
        finally:
            self.state.events.close()
            self._fail_pending()
        self.result = SessionResult(reason=reason, summary=summary, state=self.state)
        return self.result

    def abort(self) -> None:
        self._abort = True
        try:
            self.backend.cancel()
        except Exception:
            pass
        with self.state.events.changed:
            self.state.events.changed.notify_all()

    def inject_user_message(self, text: str, interrupt: bool = False) -> int:
        """Append a user message; returns its event id.

        With interrupt=True and a command in flight, the command is cancelled
        and this call blocks until the cancellation record and the message
        are both in the stream (message id strictly greater).
        """
        with self._inject_lock:
            if self.state.events.closed:
                raise SessionClosed("session has ended")
            if interrupt and self._inflight:
                pending = _PendingMessage(text=text)
                self._pending.append(pending)
                try:
                    self.backend.cancel()
                except Exception:
                    pass
            else:
                return self.state.events.append(
                    Source.USER, UserMessageObservation(content=text)
                )
        if not pending.done.wait(timeout=60.0):
            raise TimeoutError("interrupt was not acknowledged")
        if pending.event_id is None:
            raise SessionClosed("session ended before the message was delivered")
        return pending.event_id

    # -- main loop ------------------------------------------------------------

    def _loop(self) -> tuple[str, str]:
        limits = self.state.limits
        while True:
            if self._abort:
                return ("user_abort", "")
            if self.state.iteration >= limits.max_iterations:
                return ("max_iterations", "")
            if self.state.accumulated_cost >= limits.max_cost:
                return ("max_cost", "")
            self.state.iteration += 1
            try:
                output = self._step_with_reprompts()
            except _Terminate as term:
                return (term.reason, term.summary)

            action = output.action
            action_id = self.state.events.append(Source.AGENT, action)

            if isinstance(action, FinishAction):
                return ("finished", action.summary)
            if isinstance(action, MessageAction):
                if not action.wait_for_user:
                    continue
                if self.headless:
                    return ("awaiting_user", action.content)
                if not self._await_user(after_id=action_id):
                    return ("user_abort", "")
                continue
            if isinstance(action, DelegateAction):
                self._run_delegation(action, action_id)
                continue

            try:
                observation = self._dispatch(action)
            except RuntimeUnavailable as exc:
                self.state.events.append(
                    Source.ENVIRONMENT,
                    ErrorObservation(category="RuntimeUnavailable", message=str(exc)),
                    cause=action_id,
                )
                return ("runtime_error", str(exc))
            except NotExecutable as exc:
                observation = ErrorObservation(
                    category="NotExecutable", message=str(exc)
                )
            self.state.events.append(
                Source.ENVIRONMENT, observation, cause=action_id
            )
            self._deliver_pending()
            if (
                isinstance(observation, BrowseResultObservation)
                and observation.episode_over
                and self.config.finish_on_browse_episode
            ):
                return ("finished", observation.message_to_user)

    def _step_with_reprompts(self):
        reprompts = 0
        while True:
            before = self.state.snapshot_text() if self.purity_checks else None
            try:
                output = self._step(self.state, self.config, self.gateway)
            except MalformedResponse as exc:
                self._charge_gateway()
                reprompts += 1
                if reprompts > MAX_REPROMPTS:
                    self.state.events.append(
                        Source.ENVIRONMENT,
                        ErrorObservation(
                            category="MalformedResponse", message=str(exc)
                        ),
                    )
                    raise _Terminate("awaiting_user", str(exc)) from exc
                continue
            except (ProviderError, ReplayMiss) as exc:
                self.state.events.append(
                    Source.ENVIRONMENT,
                    ErrorObservation(category="AgentError", message=str(exc)),
                )
                raise _Terminate("runtime_error", str(exc)) from exc
            if before is not None and self.state.snapshot_text() != before:
                raise StepPurityError(
                    f"step of agent {self.agent_name!r} mutated session state"
                )
            self._charge_gateway()
            return output

    def _charge_gateway(self) -> None:
        drain = getattr(self.gateway, "drain", None)
        if drain is not None:
            self.state.add_cost(drain())

    def _dispatch(self, action):
        with self._inject_lock:
            self._inflight = True
        try:
            return self.backend.dispatch_action(action)
        except ActionCancelled as exc:
            message = "action cancelled by user"
            if exc.partial_output:
                message += f"; partial output:\n{exc.partial_output}"
            return ErrorObservation(category="ActionCancelled", message=message)
        finally:
            with self._inject_lock:
                self._inflight = False

    def _deliver_pending(self) -> None:
        with self._inject_lock:
            pending, self._pending = self._pending, []
        for item in pending:
            item.event_id = self.state.events.append(
                Source.USER, UserMessageObservation(content=item.text)
            )
            item.done.set()

    def _fail_pending(self) -> None:
        with self._inject_lock:
            pending, self._pending = self._pending, []
        for item in pending:
            item.done.set()

    def _await_user(self, after_id: int) -> bool:
        stream = self.state.events
        with stream.changed:
            while not self._abort:
                tail = stream.snapshot()[after_id:]
                if any(ev.kind == "user_message" for ev in tail):
                    return True
                stream.changed.wait(timeout=0.5)
        return False

    # -- delegation -----------------------------------------------------------

    def _run_delegation(self, action: DelegateAction, action_id: int) -> None:
        from .events import DelegateResultObservation

        limits = self.state.limits
        if self.state.delegation_depth >= limits.max_delegation_depth:
            self.state.events.append(
                Source.ENVIRONMENT,
                ErrorObservation(
                    category="DelegationDepthExceeded",
                    message=(
                        f"delegation depth {self.state.delegation_depth} is at the"
                        f" limit of {limits.max_delegation_depth}"
                    ),
                ),
                cause=action_id,
            )
            return
        if action.agent not in self.registry:
            self.state.events.append(
                Source.ENVIRONMENT,
                ErrorObservation(
                    category="UnknownAgent",
                    message=f"no agent registered under {action.agent!r}",
                ),
                cause=action_id,
            )
            return
        remaining_iterations = limits.max_iterations - self.state.iteration
        remaining_cost = limits.max_cost - self.state.accumulated_cost
        if remaining_iterations < 1 or remaining_cost <= 0:
            self.state.events.append(
                Source.ENVIRONMENT,
                ErrorObservation(
                    category="DelegationBudgetExhausted",
                    message="no iteration or cost budget left to delegate",
                ),
                cause=action_id,
            )
            return
        child = SessionController(
            agent_name=action.agent,
            backend=self.backend,
            gateway=self.gateway,
            registry=self.registry,
            limits=SessionLimits(
                max_iterations=remaining_iterations,
                max_cost=remaining_cost,
                max_delegation_depth=limits.max_delegation_depth,
            ),
            session_id=f"{self.session_id}.{action_id}",
            headless=True,
            delegation_depth=self.state.delegation_depth + 1,
            purity_checks=self.purity_checks,
        )
        result = child.run(action.subtask)
        child_cost = result.state.accumulated_cost
        self.state.add_cost(child_cost)
        summary = result.summary or f"[delegate terminated: {result.reason}]"
        self.state.events.append(
            Source.ENVIRONMENT,
            DelegateResultObservation(summary=summary, child_cost=child_cost),
            cause=action_id,
        )
        self._deliver_pending()


def run_session(
    task_text: str,
    agent_name: str,
    backend,
    gateway,
    registry: Optional[AgentRegistry] = None,
    limits: Optional[SessionLimits] = None,
    headless: bool = True,
) -> SessionResult:
    controller = SessionController(
        agent_name=agent_name,
        backend=backend,
        gateway=gateway,
        registry=registry,
        limits=limits,
        headless=headless,
    )
    return controller.run(task_text)
