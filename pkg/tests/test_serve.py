"""Session API over HTTP: create/list/message endpoints and the event feed."""

import json
import threading
import time

import httpx
import pytest

from agentkernel.serve import ControllerHub, UIServer


@pytest.fixture
def server(tmp_path):
    hub = ControllerHub(str(tmp_path / "sessions"), mode="scripted")
    srv = UIServer(hub)
    host, port = srv.start()
    yield f"http://{host}:{port}"
    srv.stop()


def create_session(base_url, task, responses, agent="codeact@1", **extra):
    doc = {"task": task, "agent": agent, "scripted_responses": responses}
    doc.update(extra)
    return httpx.post(f"{base_url}/sessions", json=doc, timeout=10.0)


def read_feed(base_url, session_id, timeout=20.0):
    """Consume the NDJSON feed to completion; returns (event docs, banner)."""
    events, banner = [], None
    with httpx.stream(
        "GET", f"{base_url}/sessions/{session_id}/events", timeout=timeout
    ) as resp:
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "application/x-ndjson"
        for line in resp.iter_lines():
            if not line.strip():
                continue
            doc = json.loads(line)
            if "feed_end" in doc:
                banner = doc["feed_end"]
            else:
                events.append(doc)
    return events, banner


def wait_for(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


class TestSessionEndpoints:
    def test_create_and_finish(self, server):
        resp = create_session(server, "finish now", ["<finish>done</finish>"])
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["session_id"] == "s1"
        assert doc["agent"] == "codeact@1"
        events, banner = read_feed(server, "s1")
        assert banner == {"reason": "finished", "summary": "done", "events": 2}

    def test_session_ids_are_sequential(self, server):
        for expect in ("s1", "s2", "s3"):
            resp = create_session(server, "go", ["<finish>ok</finish>"])
            assert resp.json()["session_id"] == expect

    def test_list_sessions(self, server):
        create_session(server, "task one", ["<finish>one</finish>"])
        create_session(server, "task two", ["<finish>two</finish>"])
        read_feed(server, "s1")
        read_feed(server, "s2")

        listing = httpx.get(f"{server}/sessions", timeout=10.0).json()["sessions"]
        assert [s["session_id"] for s in listing] == ["s1", "s2"]
        by_id = {s["session_id"]: s for s in listing}
        assert by_id["s1"]["task"] == "task one"
        assert by_id["s1"]["status"] == "done"
        assert by_id["s1"]["reason"] == "finished"
        assert by_id["s2"]["summary"] == "two"

    def test_missing_task_rejected(self, server):
        resp = httpx.post(f"{server}/sessions", json={"agent": "codeact@1"})
        assert resp.status_code == 400

    def test_unknown_agent_rejected(self, server):
        resp = create_session(server, "go", [], agent="nonexistent@9")
        assert resp.status_code == 400
        assert "nonexistent" in resp.json()["error"]

    def test_unknown_session_404(self, server):
        assert httpx.get(f"{server}/sessions/s99/events").status_code == 404
        resp = httpx.post(f"{server}/sessions/s99/message", json={"text": "hi"})
        assert resp.status_code == 404

    def test_malformed_body_rejected(self, server):
        resp = httpx.post(
            f"{server}/sessions",
            content=b"not json",
            headers={"Content-Type": "application/json"},
        )
        assert resp.status_code == 400

    def test_scripted_responses_refused_outside_scripted_mode(self, tmp_path):
        hub = ControllerHub(str(tmp_path / "s"), mode="replay")
        srv = UIServer(hub)
        host, port = srv.start()
        try:
            resp = create_session(f"http://{host}:{port}", "go", ["<finish>x</finish>"])
            assert resp.status_code == 400
            assert "scripted" in resp.json()["error"]
        finally:
            srv.stop()


class TestEventFeed:
    def test_ids_contiguous_from_one(self, server):
        responses = [
            "<execute_bash>\necho step1\n</execute_bash>",
            "<execute_bash>\necho step2\n</execute_bash>",
            "<finish>two steps</finish>",
        ]
        sid = create_session(server, "run two commands", responses).json()["session_id"]
        events, banner = read_feed(server, sid)
        assert [e["id"] for e in events] == list(range(1, len(events) + 1))
        assert events[0]["kind"] == "user_message"
        assert banner["reason"] == "finished"
        assert banner["events"] == len(events)

    def test_mid_session_connect_replays_from_start(self, server):
        responses = [
            "<execute_bash>\nsleep 0.4\n</execute_bash>",
            "<finish>slow done</finish>",
        ]
        sid = create_session(server, "slow task", responses).json()["session_id"]
        time.sleep(0.15)  # connect while the shell command is still running
        events, banner = read_feed(server, sid)
        assert [e["id"] for e in events] == list(range(1, len(events) + 1))
        assert events[0]["payload"]["content"] == "slow task"
        assert banner["summary"] == "slow done"

    def test_two_readers_see_identical_frames(self, server):
        sid = create_session(
            server, "go", ["<finish>same</finish>"]
        ).json()["session_id"]
        first, _ = read_feed(server, sid)
        second, _ = read_feed(server, sid)
        assert first == second

    def test_resumed_conversation_stays_contiguous(self, server):
        responses = [
            "What color should the widget be?",
            "Noted.\n<finish>made it blue</finish>",
        ]
        sid = create_session(server, "build a widget", responses).json()["session_id"]

        collected = {}

        def reader():
            collected["events"], collected["banner"] = read_feed(server, sid)

        t = threading.Thread(target=reader)
        t.start()
        assert wait_for(
            lambda: httpx.get(f"{server}/sessions").json()["sessions"][0]["events"] >= 2
        )
        resp = httpx.post(f"{server}/sessions/{sid}/message", json={"text": "Blue."})
        assert resp.status_code == 200
        assert resp.json()["event_id"] == 3
        t.join(timeout=15)
        assert not t.is_alive()
        kinds = [e["kind"] for e in collected["events"]]
        assert kinds == ["user_message", "message", "user_message", "finish"]
        assert collected["banner"]["reason"] == "finished"


class TestInterruptOverHTTP:
    def test_interrupt_orders_error_before_message(self, server):
        responses = [
            "<execute_bash>\nsleep 30\n</execute_bash>",
            "Stopping as asked.\n<finish>stopped early</finish>",
        ]
        sid = create_session(server, "run something slow", responses).json()[
            "session_id"
        ]
        # wait until the shell command is actually in flight
        assert wait_for(
            lambda: httpx.get(f"{server}/sessions").json()["sessions"][0]["events"]
            >= 2
        )
        time.sleep(0.2)
        resp = httpx.post(
            f"{server}/sessions/{sid}/message",
            json={"text": "stop, do something else", "interrupt": True},
            timeout=30.0,
        )
        assert resp.status_code == 200
        msg_id = resp.json()["event_id"]

        events, banner = read_feed(server, sid)
        assert banner["reason"] == "finished"
        by_id = {e["id"]: e for e in events}
        cancel = next(
            e
            for e in events
            if e["kind"] == "error"
            and e["payload"]["category"] == "ActionCancelled"
        )
        assert cancel["id"] < msg_id
        assert by_id[msg_id]["kind"] == "user_message"
        assert by_id[msg_id]["payload"]["content"] == "stop, do something else"
        # ids stay gap-free through the cancellation
        assert [e["id"] for e in events] == list(range(1, len(events) + 1))

    def test_message_after_end_conflicts(self, server):
        sid = create_session(server, "go", ["<finish>x</finish>"]).json()["session_id"]
        read_feed(server, sid)  # drain to completion
        resp = httpx.post(f"{server}/sessions/{sid}/message", json={"text": "more"})
        assert resp.status_code == 409
