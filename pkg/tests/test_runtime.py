"""Image tagging, persistent shell, cell sessions, dispatch, HTTP server."""

import hashlib
import json
import threading
import time

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentkernel import events as E
from agentkernel import runtime as R


def reference_build_hash(manifest):
    """Independent oracle: md5 over path\\0content\\0 in sorted path order,
    assembled as one byte string."""
    stream = b"".join(
        path.encode() + b"\x00" + content + b"\x00"
        for path, content in sorted(manifest.items())
    )
    return hashlib.md5(stream).hexdigest()


manifests = st.dictionaries(
    st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), min_size=1, max_size=12),
    st.binary(max_size=40),
    max_size=6,
)


class TestBuildHash:
    def test_empty_manifest_is_canonical_md5(self):
        assert R.compute_build_hash({}) == "d41d8cd98f00b204e9800998ecf8427e"
        assert R.compute_build_hash({}) == R.EMPTY_CONTEXT_DIGEST

    def test_deterministic(self):
        manifest = {"a": b"x"}
        assert R.compute_build_hash(manifest) == R.compute_build_hash({"a": b"x"})

    @given(manifests)
    @settings(max_examples=150, deadline=None)
    def test_matches_reference_stream(self, manifest):
        assert R.compute_build_hash(manifest) == reference_build_hash(manifest)

    @given(manifests)
    @settings(max_examples=80, deadline=None)
    def test_enumeration_order_is_irrelevant(self, manifest):
        forward = dict(sorted(manifest.items()))
        backward = dict(sorted(manifest.items(), reverse=True))
        assert R.compute_build_hash(forward) == R.compute_build_hash(backward)

    def test_single_byte_sensitivity(self):
        base = {"Dockerfile": b"FROM ubuntu\n", "src/app.py": b"print(1)\n"}
        flipped = dict(base)
        flipped["src/app.py"] = b"print(2)\n"
        assert R.compute_build_hash(base) != R.compute_build_hash(flipped)

    def test_rejects_non_bytes(self):
        with pytest.raises(R.BuildContextError):
            R.compute_build_hash({"a": 42})


class TestImageTags:
    def test_documented_generic_tag(self):
        assert (
            R.generic_tag("ubuntu:22.04", "0.9.3")
            == "runtime:oh_v0.9.3_ubuntu_tag_22.04"
        )

    def test_base_image_parsing(self):
        assert R.parse_base_image("ubuntu") == ("ubuntu", "latest")
        assert R.parse_base_image("ubuntu:22.04") == ("ubuntu", "22.04")
        assert R.parse_base_image("registry.local:5000/team/img") == (
            "registry.local:5000/team/img",
            "latest",
        )
        assert R.parse_base_image("registry.local:5000/team/img:v2") == (
            "registry.local:5000/team/img",
            "v2",
        )

    def test_unsafe_characters_become_underscores(self):
        tag = R.generic_tag("docker.io/library/ubuntu:22.04", "0.9.3")
        assert tag == "runtime:oh_v0.9.3_docker.io_library_ubuntu_tag_22.04"

    def test_hash_tag_depends_only_on_context(self):
        a = R.image_ref("ubuntu:22.04", "0.9.3", {"f": b"1"})
        b = R.image_ref("debian:12", "0.9.4", {"f": b"1"})
        assert a.hash_tag == b.hash_tag
        assert a.generic_tag != b.generic_tag


class TestReuseDecision:
    CONTEXT = {"Dockerfile": b"FROM x\n"}

    def ref(self):
        return R.image_ref("ubuntu:22.04", "0.9.3", self.CONTEXT)

    def test_rule_a_hash_exists(self):
        ref = self.ref()
        registry = R.ImageRegistry({ref.hash_tag: ref.source_digest})
        out, decision = R.resolve_runtime_image(
            "ubuntu:22.04", "0.9.3", self.CONTEXT, registry
        )
        assert decision == R.REUSE
        assert registry.builds == []  # nothing was built

    def test_rule_b_generic_exists(self):
        ref = self.ref()
        registry = R.ImageRegistry({ref.generic_tag: "older-digest"})
        changed = dict(self.CONTEXT, extra=b"new dep\n")
        out, decision = R.resolve_runtime_image(
            "ubuntu:22.04", "0.9.3", changed, registry
        )
        assert decision == R.REBUILD_FROM_GENERIC
        assert out.hash_tag != ref.hash_tag
        assert registry.digest_of(out.generic_tag) == out.source_digest  # re-pointed

    def test_rule_c_nothing_exists(self):
        registry = R.ImageRegistry()
        out, decision = R.resolve_runtime_image(
            "ubuntu:22.04", "0.9.3", self.CONTEXT, registry
        )
        assert decision == R.BUILD_FROM_SCRATCH
        assert registry.exists(out.hash_tag) and registry.exists(out.generic_tag)

    def test_decision_function_is_total(self):
        # every combination of (hash present, generic present) maps to one rule
        ref = self.ref()
        combos = {
            (True, True): R.REUSE,
            (True, False): R.REUSE,
            (False, True): R.REBUILD_FROM_GENERIC,
            (False, False): R.BUILD_FROM_SCRATCH,
        }
        for (has_hash, has_generic), expected in combos.items():
            tags = {}
            if has_hash:
                tags[ref.hash_tag] = ref.source_digest
            if has_generic:
                tags[ref.generic_tag] = "whatever"
            _, decision = R.resolve_runtime_image(
                "ubuntu:22.04", "0.9.3", self.CONTEXT, R.ImageRegistry(tags)
            )
            assert decision == expected, (has_hash, has_generic)


@pytest.fixture
def shell(tmp_path):
    session = R.ShellSession(str(tmp_path), default_timeout_s=10.0)
    yield session
    session.close()


class TestShellSession:
    def test_exit_codes(self, shell):
        assert shell.run("true").exit_code == 0
        assert shell.run("false").exit_code == 1
        assert shell.last_exit_code == 1

    def test_cwd_persists(self, shell, tmp_path):
        sub = tmp_path / "inner"
        sub.mkdir()
        shell.run(f"cd {sub}")
        result = shell.run("pwd")
        assert result.output.strip() == str(sub)
        assert result.cwd == str(sub)

    def test_env_persists(self, shell):
        shell.run("export AK_TEST_VALUE=hello42")
        assert shell.run("echo $AK_TEST_VALUE").output.strip() == "hello42"
        assert shell.environ().get("AK_TEST_VALUE") == "hello42"

    def test_stderr_merged(self, shell):
        out = shell.run("echo oops >&2").output
        assert "oops" in out

    def test_multiline_command(self, shell):
        result = shell.run("for i in 1 2 3; do\necho line$i\ndone")
        assert result.output == "line1\nline2\nline3\n"

    def test_output_without_trailing_newline(self, shell):
        assert shell.run("printf ab").output == "ab"

    def test_timeout_kills_command_not_session(self, shell):
        started = time.monotonic()
        result = shell.run("sleep 60", timeout_s=1.0)
        elapsed = time.monotonic() - started
        assert result.exit_code == 124 and result.timed_out
        assert elapsed < 3.0  # wall-clock bound
        # the session shell survived
        assert shell.run("echo alive").output.strip() == "alive"

    def test_timeout_keeps_partial_output(self, shell):
        result = shell.run("echo early; sleep 60", timeout_s=1.0)
        assert result.timed_out and "early" in result.output

    def test_cancel_from_other_thread(self, shell):
        box = {}

        def target():
            try:
                shell.run("sleep 30", timeout_s=60.0)
            except R.CommandCancelled as exc:
                box["cancelled"] = exc

        worker = threading.Thread(target=target)
        worker.start()
        time.sleep(0.3)
        shell.cancel()
        worker.join(timeout=10)
        assert not worker.is_alive() and "cancelled" in box
        assert shell.run("echo back").output.strip() == "back"

    def test_exiting_shell_respawns(self, shell):
        result = shell.run("exit 7")
        assert result.exit_code == 7
        assert shell.run("echo again").output.strip() == "again"

    def test_two_sessions_are_isolated(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        a_dir.mkdir()
        b_dir.mkdir()
        a = R.ShellSession(str(tmp_path))
        b = R.ShellSession(str(tmp_path))
        try:
            a.run(f"cd {a_dir}")
            b.run(f"cd {b_dir}")
            a.run("export WHOAMI=a")
            b.run("export WHOAMI=b")
            assert a.run("pwd").output.strip() == str(a_dir)
            assert b.run("pwd").output.strip() == str(b_dir)
            assert a.run("echo $WHOAMI").output.strip() == "a"
            assert b.run("echo $WHOAMI").output.strip() == "b"
        finally:
            a.close()
            b.close()

    def test_pure_command_repeats_identically(self, shell):
        results = [shell.run("printf 'x%d\\n' 1 2 3").output for _ in range(3)]
        assert results[0] == results[1] == results[2]


class TestCellSession:
    def test_print(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        assert cells.run("print(1+1)").output == "2\n"

    def test_definitions_persist(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        cells.run("x = 5")
        assert cells.run("print(x)").output == "5\n"

    def test_trailing_expression_echo(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        assert cells.run("2 + 3").output == "5\n"
        assert cells.run("None").output == ""

    def test_exception_keeps_session(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        cells.run("y = 10")
        result = cells.run("1/0")
        assert result.error and "ZeroDivisionError" in result.output
        assert cells.run("print(y)").output == "10\n"

    def test_system_exit_restarts(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        cells.run("z = 1")
        result = cells.run("raise SystemExit")
        assert result.restarted and "restarted" in result.output
        after = cells.run("print(z)")
        assert "NameError" in after.output  # namespace was reset

    def test_skills_preloaded(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        out = cells.run("open_file('missing.txt')").output
        assert out == "File missing.txt not found\n"
        (tmp_path / "hello.txt").write_text("first\n")
        assert "1|first" in cells.run("open_file('hello.txt')").output

    def test_syntax_error_reported(self, tmp_path):
        cells = R.CellSession(str(tmp_path))
        result = cells.run("def broken(:\n  pass")
        assert result.error and "SyntaxError" in result.output


class TestDispatch:
    def test_controller_actions_rejected(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        for payload in (
            E.FinishAction(),
            E.MessageAction(content="hi"),
            E.DelegateAction(agent="x", subtask="y"),
        ):
            with pytest.raises(R.NotExecutable):
                backend.dispatch_action(payload)
        backend.close()

    def test_shell_route(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        obs = backend.dispatch_action(E.ShellCommandAction("true"))
        assert isinstance(obs, E.ShellResultObservation) and obs.exit_code == 0
        backend.close()

    def test_browse_noop_keeps_page(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        before = backend.browser
        obs = backend.dispatch_action(E.BrowseAction(program="noop()"))
        assert isinstance(obs, E.BrowseResultObservation)
        assert obs.status == "ok" and backend.browser == before
        backend.close()

    def test_browse_parse_error(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        obs = backend.dispatch_action(E.BrowseAction(program="warp(9)"))
        assert isinstance(obs, E.ErrorObservation)
        assert obs.category == "BrowseParseError"
        backend.close()

    def test_browse_failed_call_reports_error_status(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        obs = backend.dispatch_action(E.BrowseAction(program="click('404')"))
        assert obs.status == "error" and "no element with bid 404" in obs.page
        backend.close()

    def test_cell_route(self, tmp_path):
        backend = R.LocalBackend(str(tmp_path))
        obs = backend.dispatch_action(E.CodeCellAction(source="print('cells ok')"))
        assert isinstance(obs, E.CellResultObservation)
        assert obs.output == "cells ok\n"
        backend.close()


@pytest.fixture
def server(tmp_path):
    srv = R.RuntimeServer(str(tmp_path))
    host, port = srv.start()
    yield f"http://{host}:{port}", srv
    srv.stop()


def execute(base_url, action, session="default"):
    doc = {
        "session": session,
        "action": {"kind": action.kind, "payload": E.payload_to_doc(action)},
    }
    return httpx.post(f"{base_url}/execute_action", json=doc, timeout=30.0)


class TestServer:
    def test_alive(self, server):
        base_url, _ = server
        response = httpx.get(f"{base_url}/alive")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_execute_shell(self, server):
        base_url, _ = server
        response = execute(base_url, E.ShellCommandAction("echo remote"))
        assert response.status_code == 200
        obs = response.json()["observation"]
        assert obs["kind"] == "shell_result"
        assert obs["payload"]["output"] == "remote\n"

    def test_sessions_are_separate_workspaces(self, server):
        base_url, _ = server
        execute(base_url, E.ShellCommandAction("touch here.txt"), session="s1")
        response = execute(base_url, E.ShellCommandAction("ls"), session="s2")
        assert "here.txt" not in response.json()["observation"]["payload"]["output"]

    def test_controller_action_is_409(self, server):
        base_url, _ = server
        response = execute(base_url, E.FinishAction())
        assert response.status_code == 409

    def test_cancel_inflight_command(self, server):
        base_url, _ = server
        box = {}

        def long_call():
            box["response"] = execute(
                base_url, E.ShellCommandAction("sleep 30", timeout_s=60.0)
            )

        worker = threading.Thread(target=long_call)
        worker.start()
        time.sleep(0.5)
        cancel = httpx.post(f"{base_url}/cancel", json={"session": "default"}, timeout=10.0)
        assert cancel.status_code == 200
        worker.join(timeout=10)
        assert not worker.is_alive()
        obs = box["response"].json()["observation"]
        assert obs["kind"] == "error"
        assert obs["payload"]["category"] == "ActionCancelled"

    def test_bad_action_is_400(self, server):
        base_url, _ = server
        response = httpx.post(
            f"{base_url}/execute_action",
            json={"action": {"kind": "nope", "payload": {}}},
            timeout=10.0,
        )
        assert response.status_code == 400
