#!/usr/bin/env python3
"""Exercise the session API end to end against a scripted agent.

    python3 scripts/serve_demo.py

Starts the server on a free port, creates a session whose model turns are
scripted inline, answers the agent's question over POST /message, and tails
GET /events until the feed_end banner arrives. This is the same wire contract
the web UI consumes.
"""

import http.client
import json
import os
import sys
import tempfile
import threading

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "src"))

from agentkernel.serve import ControllerHub, UIServer

RESPONSES = [
    "<execute_bash>\nls -a\n</execute_bash>",
    "Should the greeting file be plain text or markdown?",
    "Good, plain text it is.\n"
    "<execute_bash>\nprintf 'hello from the demo\\n' > greeting.txt\n</execute_bash>",
    "<finish>wrote greeting.txt</finish>",
]


def post(host, port, path, body):
    conn = http.client.HTTPConnection(host, port, timeout=10)
    payload = json.dumps(body).encode("utf-8")
    conn.request("POST", path, body=payload, headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    doc = json.loads(resp.read().decode("utf-8"))
    conn.close()
    if resp.status != 200:
        raise RuntimeError(f"{path} -> {resp.status}: {doc}")
    return doc


def tail_events(host, port, session_id, on_line):
    conn = http.client.HTTPConnection(host, port, timeout=60)
    conn.request("GET", f"/sessions/{session_id}/events")
    resp = conn.getresponse()
    buffer = b""
    while True:
        chunk = resp.read1(8192)
        if not chunk:
            break
        buffer += chunk
        while b"\n" in buffer:
            line, buffer = buffer.split(b"\n", 1)
            if line.strip():
                on_line(json.loads(line))
    conn.close()


def main() -> int:
    root = tempfile.mkdtemp(prefix="serve-demo-")
    hub = ControllerHub(root, mode="scripted")
    server = UIServer(hub)
    host, port = server.start()
    print(f"server up on http://{host}:{port}")

    created = post(host, port, "/sessions", {
        "task": "Create a greeting file in the workspace.",
        "agent": "codeact@1",
        "scripted_responses": RESPONSES,
    })
    sid = created["session_id"]
    print(f"session {sid} created")

    seen_question = threading.Event()

    def on_line(doc):
        if "feed_end" in doc:
            print(f"feed_end: {doc['feed_end']}")
            return
        kind = doc["kind"]
        print(f"  [{doc['id']:>2}] {kind:<14} {json.dumps(doc['payload'])[:90]}")
        if kind == "message" and doc["payload"].get("wait_for_user"):
            seen_question.set()

    tail = threading.Thread(target=tail_events, args=(host, port, sid, on_line))
    tail.start()

    if not seen_question.wait(timeout=15):
        print("agent never asked its question", file=sys.stderr)
        server.stop()
        return 1
    reply = post(host, port, f"/sessions/{sid}/message", {"text": "Plain text, please."})
    print(f"replied as user (event {reply['event_id']})")

    tail.join(timeout=30)
    server.stop()
    print("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
