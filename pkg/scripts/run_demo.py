#!/usr/bin/env python3
"""Replay one shipped task and print its full event stream.

    python3 scripts/run_demo.py [task-id]

Defaults to the delegated browsing task, which shows most event kinds in one
session: the user message, delegation, the child's browse actions and page
observations, the delegate result with its metered cost, and the finish.
"""

import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "src"))

from agentkernel.controller import SessionController
from agentkernel.events import encode_event
from agentkernel.harness import (
    _register_workspace,
    _seed_workspace,
    load_task,
    replay_gateway,
)
from agentkernel.runtime import LocalBackend


def main() -> int:
    task_id = sys.argv[1] if len(sys.argv) > 1 else "ultimate-answer"
    spec = load_task(os.path.join(REPO, "suites", "core", f"{task_id}.toml"))

    gateway = replay_gateway(spec)
    workspace = tempfile.mkdtemp(prefix=f"demo-{spec.id}-")
    try:
        _register_workspace(gateway, workspace)
        _seed_workspace(spec, workspace)
        backend = LocalBackend(workspace, browse_fixture=spec.browse_fixture or None)
        try:
            controller = SessionController(
                spec.agent, backend, gateway, limits=spec.limits, session_id=spec.id
            )
            result = controller.run(spec.instruction)
        finally:
            backend.close()
    finally:
        shutil.rmtree(workspace, ignore_errors=True)

    for event in result.state.events:
        print(encode_event(event))
    print()
    print(
        f"task={spec.id} reason={result.reason} iterations={result.state.iteration}"
        f" cost={result.state.accumulated_cost:.4f} summary={result.summary!r}"
    )
    return 0 if result.reason in ("finished", "awaiting_user") else 1


if __name__ == "__main__":
    sys.exit(main())
