"""Agent grammar, overlays, prompt construction, and the step functions."""

import dataclasses

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from agentkernel import browse
from agentkernel.agents import (
    AgentConfig,
    AgentSpec,
    InvalidOverlay,
    MalformedResponse,
    MicroOverlay,
    UnknownAgent,
    apply_micro_overlay,
    build_messages,
    build_step_prompt,
    codeact_step,
    default_browsing_config,
    default_codeact_config,
    default_registry,
    load_registry,
    parse_browsing_response,
    parse_codeact_response,
    render_action,
    render_observation,
    truncate_middle,
)
from agentkernel.agents.browsing import render_action_space, step_inputs
from agentkernel.agents.codeact import TRUNCATION_MARKER
from agentkernel.browse.actions import AGENT_CONFIG
from agentkernel.events import (
    ACTION_KINDS,
    BrowseAction,
    BrowseResultObservation,
    CodeCellAction,
    DelegateAction,
    FinishAction,
    MessageAction,
    SessionState,
    ShellCommandAction,
    ShellResultObservation,
    Source,
    UserMessageObservation,
)
from agentkernel.llm import MeteredProvider, ScriptedProvider


# ---------------------------------------------------------------------------
# response grammar


class TestResponseGrammar:
    def test_bash_block(self):
        out = parse_codeact_response("<execute_bash>\ncd /tmp\n</execute_bash>")
        assert out.action == ShellCommandAction(command="cd /tmp")
        assert out.thought == ""

    def test_leading_prose_becomes_thought(self):
        out = parse_codeact_response(
            "Let me check the directory.\n<execute_bash>\nls -la\n</execute_bash>"
        )
        assert out.action.command == "ls -la"
        assert out.action.thought == "Let me check the directory."
        assert out.thought == "Let me check the directory."

    def test_ipython_block(self):
        out = parse_codeact_response(
            "<execute_ipython>\nprint(1 + 1)\n</execute_ipython>"
        )
        assert out.action == CodeCellAction(source="print(1 + 1)")

    def test_ipython_preserves_internal_newlines(self):
        out = parse_codeact_response(
            "<execute_ipython>\nfor i in range(3):\n    print(i)\n</execute_ipython>"
        )
        assert out.action.source == "for i in range(3):\n    print(i)"

    def test_browse_block(self):
        out = parse_codeact_response(
            "<execute_browse>\ngoto('http://localhost:8000')\n</execute_browse>"
        )
        assert out.action == BrowseAction(program="goto('http://localhost:8000')")

    def test_finish_block(self):
        out = parse_codeact_response("Done.\n<finish>fixed the typo</finish>")
        assert out.action == FinishAction(summary="fixed the typo", thought="Done.")

    def test_empty_finish(self):
        out = parse_codeact_response("<finish></finish>")
        assert out.action == FinishAction(summary="")

    def test_plain_text_is_message_awaiting_user(self):
        out = parse_codeact_response("Hello, which file should I edit?")
        assert out.action == MessageAction(
            content="Hello, which file should I edit?", wait_for_user=True
        )

    def test_trailing_prose_is_dropped_from_thought(self):
        out = parse_codeact_response(
            "Before.\n<execute_bash>\nls\n</execute_bash>\nAfter."
        )
        assert out.action.thought == "Before."

    def test_two_blocks_same_kind_rejected(self):
        with pytest.raises(MalformedResponse):
            parse_codeact_response(
                "<execute_bash>\nls\n</execute_bash>\n"
                "<execute_bash>\npwd\n</execute_bash>"
            )

    def test_two_blocks_mixed_kind_rejected(self):
        with pytest.raises(MalformedResponse):
            parse_codeact_response(
                "<execute_bash>\nls\n</execute_bash>\n<finish>done</finish>"
            )

    def test_unclosed_tag_rejected(self):
        with pytest.raises(MalformedResponse):
            parse_codeact_response("<execute_bash>\nls")

    def test_empty_response_rejected(self):
        with pytest.raises(MalformedResponse):
            parse_codeact_response("   \n  ")

    @given(st.text(max_size=400))
    @example("<execute_bash><execute_bash>ls</execute_bash>")
    @example("<finish>")
    @example("</finish>text<finish>")
    @example("x <execute_ipython>1</execute_ipython> y <finish>z</finish>")
    @settings(max_examples=300)
    def test_grammar_total(self, text):
        # every string classifies or raises MalformedResponse, nothing else
        try:
            out = parse_codeact_response(text)
        except MalformedResponse:
            return
        assert out.action.kind in ACTION_KINDS

    @given(st.text(max_size=200))
    def test_rendered_action_reparses_to_itself(self, thought):
        # blocks survive a render/parse round trip as long as the thought
        # carries no block markup of its own
        try:
            probe = parse_codeact_response(thought) if thought.strip() else None
        except MalformedResponse:
            probe = None
        if probe is not None and not isinstance(probe.action, MessageAction):
            return  # thought text itself contains a block; skip
        if probe is None and thought.strip():
            return
        action = ShellCommandAction(command="echo hi", thought=thought.strip())
        reparsed = parse_codeact_response(render_action(action))
        assert reparsed.action.command == "echo hi"
        assert reparsed.action.thought == thought.strip()


# ---------------------------------------------------------------------------
# overlays


BASE = AgentConfig(name="base@1", system_message="You are terse.", grammar="codeact")


class TestOverlays:
    def test_extra_text_appended(self):
        out = apply_micro_overlay(BASE, MicroOverlay(extra_system_text="Only bash."))
        assert out.system_message == "You are terse.\nOnly bash."
        assert BASE.system_message == "You are terse."  # base untouched

    def test_restriction_intersects(self):
        out = apply_micro_overlay(
            BASE, MicroOverlay(allowed_action_kinds=("shell_command", "finish"))
        )
        assert out.allowed_action_kinds == ("shell_command", "finish")

    def test_base_order_preserved(self):
        out = apply_micro_overlay(
            BASE, MicroOverlay(allowed_action_kinds=("finish", "shell_command"))
        )
        # intersection keeps the base ordering, not the overlay's
        assert out.allowed_action_kinds == ("shell_command", "finish")

    def test_empty_intersection_rejected(self):
        narrowed = apply_micro_overlay(
            BASE, MicroOverlay(allowed_action_kinds=("shell_command",))
        )
        with pytest.raises(InvalidOverlay):
            apply_micro_overlay(narrowed, MicroOverlay(allowed_action_kinds=("browse",)))

    def test_empty_overlay_kind_list_rejected(self):
        with pytest.raises(InvalidOverlay):
            MicroOverlay(allowed_action_kinds=())

    @given(
        st.lists(st.sampled_from(ACTION_KINDS), min_size=1, unique=True),
        st.lists(st.sampled_from(ACTION_KINDS), min_size=1, unique=True),
    )
    def test_overlay_monotone(self, base_kinds, overlay_kinds):
        base = dataclasses.replace(BASE, allowed_action_kinds=tuple(base_kinds))
        overlay = MicroOverlay(allowed_action_kinds=tuple(overlay_kinds))
        try:
            out = apply_micro_overlay(base, overlay)
        except InvalidOverlay:
            assert not (set(base_kinds) & set(overlay_kinds))
            return
        assert set(out.allowed_action_kinds) == set(base_kinds) & set(overlay_kinds)
        assert set(out.allowed_action_kinds) <= set(base.allowed_action_kinds)


# ---------------------------------------------------------------------------
# codeact step


def _state_with_task(text="do the thing"):
    state = SessionState()
    state.events.append(Source.USER, UserMessageObservation(content=text))
    return state


def _gateway(*responses):
    return MeteredProvider(ScriptedProvider(list(responses)))


class TestCodeActStep:
    def test_scripted_bash_block(self):
        out = codeact_step(
            _state_with_task(),
            default_codeact_config(),
            _gateway("<execute_bash>\nls\n</execute_bash>"),
        )
        assert out.action == ShellCommandAction(command="ls")

    def test_scripted_plain_text(self):
        out = codeact_step(
            _state_with_task(), default_codeact_config(), _gateway("What next?")
        )
        assert out.action == MessageAction(content="What next?", wait_for_user=True)

    def test_browse_block_delegates_by_default(self):
        out = codeact_step(
            _state_with_task(),
            default_codeact_config(),
            _gateway(
                "<execute_browse>\ngoto('http://localhost:8000')\n</execute_browse>"
            ),
        )
        assert out.action == DelegateAction(
            agent="browsing", subtask="goto('http://localhost:8000')"
        )

    def test_browse_block_direct_when_delegation_off(self):
        config = dataclasses.replace(default_codeact_config(), delegate_browsing=False)
        out = codeact_step(
            _state_with_task(),
            config,
            _gateway(
                "<execute_browse>\ngoto('http://localhost:8000')\n</execute_browse>"
            ),
        )
        assert out.action == BrowseAction(program="goto('http://localhost:8000')")

    def test_disallowed_kind_is_malformed(self):
        config = dataclasses.replace(
            default_codeact_config(), allowed_action_kinds=("message", "finish")
        )
        with pytest.raises(MalformedResponse):
            codeact_step(
                _state_with_task(),
                config,
                _gateway("<execute_bash>\nls\n</execute_bash>"),
            )

    def test_step_does_not_mutate_state(self):
        state = _state_with_task()
        before = state.snapshot_text()
        codeact_step(
            state, default_codeact_config(), _gateway("<finish>ok</finish>")
        )
        assert state.snapshot_text() == before

    def test_messages_start_with_system_and_alternate(self):
        state = _state_with_task("fix it")
        aid = state.events.append(Source.AGENT, ShellCommandAction(command="ls"))
        state.events.append(
            Source.ENVIRONMENT,
            ShellResultObservation(exit_code=0, output="a.txt\n", cwd="/w"),
            cause=aid,
        )
        messages = build_messages(state, default_codeact_config())
        assert [m.role for m in messages] == ["system", "user", "assistant", "user"]
        assert messages[1].content == "fix it"
        assert messages[2].content == "<execute_bash>\nls\n</execute_bash>"
        assert messages[3].content == "OBSERVATION (exit code 0):\na.txt\n"

    def test_delegate_action_renders_as_browse_block(self):
        text = render_action(DelegateAction(agent="browsing", subtask="find the price"))
        assert text == "<execute_browse>\nfind the price\n</execute_browse>"


class TestTruncation:
    def test_short_text_unchanged(self):
        assert truncate_middle("abc", 2000) == "abc"

    def test_exact_budget_unchanged(self):
        text = "x" * 2000
        assert truncate_middle(text, 2000) == text

    def test_long_text_keeps_head_and_tail(self):
        text = "H" * 1500 + "TAIL" + "T" * 1500
        out = truncate_middle(text, 2000)
        assert out.startswith("H" * 1000)
        assert out.endswith("T" * 1000)
        assert TRUNCATION_MARKER in out

    @given(st.text(min_size=0, max_size=5000), st.integers(min_value=2, max_value=3000))
    def test_budget_respected(self, text, budget):
        out = truncate_middle(text, budget)
        if len(text) <= budget:
            assert out == text
        else:
            assert len(out) == budget + len(TRUNCATION_MARKER)
            assert out.startswith(text[: budget // 2])
            assert out.endswith(text[-(budget - budget // 2):])

    def test_observation_rendering_truncates(self):
        obs = ShellResultObservation(exit_code=0, output="z" * 9000, cwd="/w")
        rendered = render_observation(obs, char_budget=2000)
        assert TRUNCATION_MARKER in rendered
        assert len(rendered) < 9000


# ---------------------------------------------------------------------------
# browsing prompt


GOAL = (
    "Browse localhost:8000, and tell me the ultimate answer to life. "
    "Do not ask me for confirmation at any point."
)

PRE_CLICK_TREE = (
    "RootWebArea 'The Ultimate Answer', focused\n"
    "\t[8] heading 'The Ultimate Answer'\n"
    "\t[9] paragraph ''\n"
    "\t\tStaticText 'Click the button to reveal the answer to life, the universe, "
    "and everything.'\n"
    "\t[10] button 'Click me', clickable"
)

BENCHMARK_DENYLIST = (
    "SWE-bench",
    "HumanEval",
    "WebArena",
    "MiniWoB",
    "GAIA",
    "GPQA",
    "AgentBench",
    "MINT",
    "ToolQA",
    "ML-Bench",
    "BIRD",
    "ProofWriter",
)


class TestBrowsingPrompt:
    def test_prompt_sections_in_order(self):
        prompt = build_step_prompt(GOAL, PRE_CLICK_TREE, [])
        headers = [
            "# Instructions",
            "# Goal:",
            "# Action Space",
            "# Current Accessibility Tree:",
            "# Previous Actions",
        ]
        positions = [prompt.index(h) for h in headers]
        assert positions == sorted(positions)

    def test_action_count_line(self):
        prompt = build_step_prompt(GOAL, PRE_CLICK_TREE, [])
        assert "16 different types of actions are available." in prompt

    def test_tree_embedded_verbatim(self):
        prompt = build_step_prompt(GOAL, PRE_CLICK_TREE, [])
        assert "# Current Accessibility Tree:\n" + PRE_CLICK_TREE + "\n" in prompt
        assert "[10] button 'Click me', clickable" in prompt

    def test_previous_actions_listed(self):
        prompt = build_step_prompt(GOAL, PRE_CLICK_TREE, ["goto('http://localhost:8000')"])
        assert "# Previous Actions\ngoto('http://localhost:8000')\n" in prompt

    def test_prompt_deterministic(self):
        a = build_step_prompt(GOAL, PRE_CLICK_TREE, ["click('3')"])
        b = build_step_prompt(GOAL, PRE_CLICK_TREE, ["click('3')"])
        assert a == b

    def test_worked_examples_present(self):
        prompt = build_step_prompt(GOAL, PRE_CLICK_TREE, [])
        assert '```click("12")```' in prompt
        assert '```send_msg_to_user("$279.49")```' in prompt

    def test_action_space_single_source_of_truth(self):
        # every enabled primitive appears with its exact signature line, and
        # every example shown to the model parses under the same validator
        space = render_action_space()
        for primitive in AGENT_CONFIG.enabled_primitives():
            assert f"{primitive.signature}\n    Examples:" in space
            for ex in primitive.examples:
                call = browse.parse_call(ex)
                assert call.name == primitive.name

    def test_multi_action_note_examples_parse(self):
        program = browse.parse_action_program(
            "fill('a12', 'example with \"quotes\"')\n"
            "click('51')\n"
            "click('48', button='middle', modifiers=['Shift'])"
        )
        assert [c.name for c in program.calls] == ["fill", "click", "click"]

    def test_no_benchmark_names_in_prompts(self):
        texts = [
            default_codeact_config().system_message,
            default_browsing_config().system_message,
            build_step_prompt("", "", []),
        ]
        for text in texts:
            lowered = text.lower()
            for name in BENCHMARK_DENYLIST:
                assert name.lower() not in lowered


class TestBrowsingResponseParsing:
    def test_thought_plus_block(self):
        out = parse_browsing_response(
            "In order to accomplish my goal, I need to click on the button with "
            'bid 10 to reveal the answer to life, the universe, and everything.\n'
            '```click("10")```'
        )
        assert out.action.program == 'click("10")'
        assert out.thought.startswith("In order to accomplish my goal")

    def test_multi_call_block(self):
        out = parse_browsing_response(
            "Filling the login form.\n"
            "```\nfill('a12', 'user')\nfill('a13', 'pass')\nclick('51')\n```"
        )
        program = browse.parse_action_program(out.action.program)
        assert len(program.calls) == 3

    def test_last_block_wins(self):
        out = parse_browsing_response(
            "First I thought ```noop()``` but actually:\n```go_back()```"
        )
        assert out.action.program == "go_back()"

    def test_no_block_is_malformed(self):
        with pytest.raises(MalformedResponse):
            parse_browsing_response("I am not sure what to do.")

    def test_empty_block_is_malformed(self):
        with pytest.raises(MalformedResponse):
            parse_browsing_response("Hmm.\n``````")


class TestBrowsingStepInputs:
    def test_goal_tree_and_programs_extracted(self):
        state = SessionState()
        state.events.append(Source.USER, UserMessageObservation(content=GOAL))
        aid = state.events.append(
            Source.AGENT, BrowseAction(program='goto("http://localhost:8000")')
        )
        state.events.append(
            Source.ENVIRONMENT,
            BrowseResultObservation(
                page=PRE_CLICK_TREE, status="ok", url="http://localhost:8000"
            ),
            cause=aid,
        )
        goal, tree, programs = step_inputs(state)
        assert goal == GOAL
        assert tree == PRE_CLICK_TREE
        # canonical echo: double-quoted model output prints single-quoted
        assert programs == ["goto('http://localhost:8000')"]

    def test_initial_step_uses_blank_tree(self):
        state = SessionState()
        state.events.append(Source.USER, UserMessageObservation(content="go"))
        goal, tree, programs = step_inputs(state)
        assert goal == "go"
        assert tree == "RootWebArea '', focused"
        assert programs == []


# ---------------------------------------------------------------------------
# registry


class TestRegistry:
    def test_builtin_names(self):
        registry = default_registry()
        assert "codeact@1" in registry
        assert "browsing@1" in registry
        assert registry.get("codeact") is registry.get("codeact@1")

    def test_unknown_agent(self):
        with pytest.raises(UnknownAgent):
            default_registry().get("nonexistent@9")

    def test_duplicate_registration_rejected(self):
        registry = default_registry()
        spec = AgentSpec(config=default_codeact_config(), step=codeact_step)
        with pytest.raises(ValueError):
            registry.register(spec)

    def test_load_registry_overlay_agent(self, tmp_path):
        toml = tmp_path / "agents.toml"
        toml.write_text(
            "[agents.shellonly]\n"
            'base = "codeact@1"\n'
            'extra_system_text = "Use only shell commands."\n'
            'allowed_action_kinds = ["shell_command", "message", "finish"]\n'
            "delegate_browsing = false\n",
            encoding="utf-8",
        )
        registry = load_registry(str(toml))
        spec = registry.get("shellonly@1")
        assert spec.config.system_message.endswith("Use only shell commands.")
        assert spec.config.allowed_action_kinds == (
            "shell_command",
            "message",
            "finish",
        )
        assert spec.config.delegate_browsing is False
        assert registry.get("shellonly") is spec
        # built-ins still present
        assert "codeact@1" in registry

    def test_load_registry_standalone_agent(self, tmp_path):
        prompt = tmp_path / "myprompt.md"
        prompt.write_text("You answer in haiku.", encoding="utf-8")
        toml = tmp_path / "agents.toml"
        toml.write_text(
            "[agents.haiku]\n"
            "version = 2\n"
            'grammar = "codeact"\n'
            'system_prompt = "myprompt.md"\n',
            encoding="utf-8",
        )
        registry = load_registry(str(toml))
        spec = registry.get("haiku@2")
        assert spec.config.system_message == "You answer in haiku."
        assert spec.config.grammar == "codeact"
