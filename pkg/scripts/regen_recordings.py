#!/usr/bin/env python3
"""Regenerate the committed recordings for the shipped suites.

Every task's model turns are scripted below. Running a task through a
recording gateway captures the exact prompts the agents build plus these
responses, so CI replays the whole suite with no model access. Rerun this
script whenever prompt rendering, agent behavior, or the task files change:

    python3 scripts/regen_recordings.py [--suite suites/core] [--only TASK_ID]

Note: a recording keyed by normalized prompt stores one response per unique
prompt, so scripted flows here must not expect two different responses to
byte-identical prompts.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

from agentkernel import __version__
from agentkernel.agents import (
    default_browsing_config,
    default_codeact_config,
    prompt_fingerprint,
)
from agentkernel.harness import load_suite, run_task
from agentkernel.llm import (
    MeteredProvider,
    Recording,
    RecordingProvider,
    ScriptedProvider,
)

GOAL = (
    "Browse localhost:8000, and tell me the ultimate answer to life. "
    "Do not ask me for confirmation at any point."
)

SCRIPTS: dict[str, list[str]] = {
    "typo-fix": [
        "I'll open bad.txt to find the misspelling.\n"
        "<execute_ipython>\nopen_file('bad.txt')\n</execute_ipython>",
        "Line 1 spells 'documment' with a doubled m. Fixing just that word.\n"
        "<execute_ipython>\nedit_file(1, 1, 'This document has a typo.')\n</execute_ipython>",
        "The spelling is corrected and nothing else changed.\n"
        "<finish>fixed 'documment' -> 'document' in bad.txt</finish>",
    ],
    "hello-shell": [
        "<execute_bash>\nprintf 'hello world\\n' > greeting.txt\n</execute_bash>",
        "<finish>wrote greeting.txt</finish>",
    ],
    "ultimate-answer": [
        "The task needs a browser, so I'm delegating it.\n"
        f"<execute_browse>\n{GOAL}\n</execute_browse>",
        "In order to accomplish my goal, I need to navigate to the requested "
        'page first.\n```goto("http://localhost:8000")```',
        "In order to accomplish my goal, I need to click on the button with "
        "bid 10 to reveal the answer to life, the universe, and everything.\n"
        '```click("10")```',
        "In order to accomplish my goal I need to send the information asked "
        "back to the user. The page now shows that the answer to life, the "
        "universe, and everything is 42. I will send a message back to user "
        'with the answer.\n```send_msg_to_user("42")```',
        "The browsing agent reported the answer.\n<finish>42</finish>",
    ],
    "browse-direct": [
        "In order to accomplish my goal, I need to navigate to the requested "
        'page first.\n```goto("http://localhost:8000")```',
        "In order to accomplish my goal, I need to click on the button with "
        'bid 10 to reveal the answer.\n```click("10")```',
        "In order to accomplish my goal I need to send the information asked "
        'back to the user.\n```send_msg_to_user("42")```',
    ],
    "python-calc": [
        "<execute_ipython>\ntotal = sum(range(100))\nprint(total)\n</execute_ipython>",
        "The interpreter reports 4950.\n<finish>4950</finish>",
    ],
    "ask-user": [
        "I don't see a settings file in the workspace. Which file should I update?",
    ],
    "cwd-persistence": [
        "<execute_bash>\nmkdir -p sub && cd sub\n</execute_bash>",
        "Now writing the marker from inside sub.\n"
        "<execute_bash>\nprintf 'here\\n' > marker.txt\n</execute_bash>",
        "<finish>created sub/marker.txt</finish>",
    ],
    "search-skills": [
        "<execute_ipython>\ncreate_file('notes/todo.txt')\n</execute_ipython>",
        "<execute_ipython>\n"
        "edit_file(1, 1, 'TODO: water the plants\\nTODO: file taxes')\n"
        "</execute_ipython>",
        "<execute_ipython>\nprint(search_dir('TODO', 'notes'))\n</execute_ipython>",
        "Both entries are present.\n"
        "<finish>notes/todo.txt created with both TODO entries</finish>",
    ],
    "delegate-depth": [
        "<execute_browse>\ngoto('http://localhost:8000')\n</execute_browse>",
        "Delegation was refused at this depth, so I'll report that.\n"
        "<finish>browsing unavailable at this delegation depth</finish>",
    ],
    "line-edit": [
        "<execute_ipython>\nopen_file('bigfile.txt', 20)\n</execute_ipython>",
        "<execute_ipython>\nedit_file(20, 20, 'LINE 20 PATCHED')\n</execute_ipython>",
        "<finish>patched line 20</finish>",
    ],
}


def recording_metadata(agent: str, task_id: str) -> dict:
    return {
        "model": "scripted",
        "platform_version": __version__,
        "agent": agent,
        "task": task_id,
        "prompt_sha256": {
            "codeact@1": hashlib.sha256(
                default_codeact_config().system_message.encode("utf-8")
            ).hexdigest(),
            "browsing@1": prompt_fingerprint(default_browsing_config()),
        },
    }


def record_task(spec) -> bool:
    if spec.id not in SCRIPTS:
        print(f"{spec.id:20s} SKIP (no script defined)")
        return False
    os.makedirs(os.path.dirname(spec.recording), exist_ok=True)
    gateway = MeteredProvider(
        RecordingProvider(
            ScriptedProvider(SCRIPTS[spec.id], model="default"),
            Recording(recording_metadata(spec.agent, spec.id)),
            path=spec.recording,
        )
    )
    result = run_task(spec, gateway=gateway)
    status = "ok " if result.success else "FAIL"
    print(
        f"{spec.id:20s} {status} reason={result.reason:14s}"
        f" steps={result.steps} cost={result.cost:.4f} {result.detail}"
    )
    return result.success


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--suite", default="suites/core")
    parser.add_argument("--only", default="", help="regenerate a single task id")
    args = parser.parse_args()

    specs = load_suite(args.suite)
    if args.only:
        specs = [s for s in specs if s.id == args.only]
        if not specs:
            print(f"no task named {args.only!r} in {args.suite}", file=sys.stderr)
            return 2
    ok = True
    for spec in specs:
        ok = record_task(spec) and ok
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
