"""Command-line entry point.

Subcommands:
    run             run one task to termination in the foreground
    serve           start the session API + event feed for UI clients
    replay          re-emit a stored trajectory, verifying stream invariants
    eval            run a task suite and write a report
    images resolve  compute runtime image tags and the build/reuse decision

Settings resolve as flag > AK_* environment variable > agentkernel.toml >
built-in default. Exit codes: 0 success, 1 runtime failure (reason on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import __version__
from .agents import default_registry, load_registry
from .config import KernelConfig, load_config
from .controller import SessionController
from .events import (
    CausalityError,
    CodecError,
    encode_event,
    read_trajectory,
    verify_stream_invariants,
    write_trajectory,
)
from .harness import TaskError, format_table, run_suite
from .llm import (
    LiveProvider,
    MeteredProvider,
    Recording,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
)
from .runtime import LocalBackend
from .runtime.images import ImageRegistry, image_ref, resolve_runtime_image
from .serve import ControllerHub, UIServer


def _registry_from(config: KernelConfig):
    registry = default_registry()
    if config.agents_file:
        registry = load_registry(config.agents_file, registry)
    return registry


def _gateway_from(config: KernelConfig, scripted_responses=()):
    if config.mode == "scripted":
        return MeteredProvider(
            ScriptedProvider(list(scripted_responses), model="default")
        )
    if config.mode == "replay":
        if not config.recording_path:
            raise ValueError("replay mode needs --recording (or AK_RECORDING_PATH)")
        return MeteredProvider(ReplayProvider(Recording.load(config.recording_path)))
    live = LiveProvider(
        endpoint=config.endpoint, api_key=config.api_key, model=config.model
    )
    if config.mode == "live":
        if not live.endpoint:
            raise ValueError("live mode needs --endpoint (or AK_LLM_ENDPOINT)")
        return MeteredProvider(live)
    # record
    if not config.recording_path:
        raise ValueError("record mode needs --recording (or AK_RECORDING_PATH)")
    recording = (
        Recording.load(config.recording_path)
        if os.path.exists(config.recording_path)
        else Recording()
    )
    return MeteredProvider(
        RecordingProvider(live, recording, path=config.recording_path)
    )


def _load_cli_config(args) -> KernelConfig:
    overrides = {
        "agent": getattr(args, "agent", None),
        "mode": getattr(args, "mode", None),
        "endpoint": getattr(args, "endpoint", None),
        "model": getattr(args, "model", None),
        "recording_path": getattr(args, "recording", None),
        "workspace": getattr(args, "workspace", None),
        "browse_fixture": getattr(args, "browse_fixture", None),
        "agents_file": getattr(args, "agents_file", None),
        "max_iterations": getattr(args, "max_iterations", None),
        "max_cost": getattr(args, "max_cost", None),
        "port": getattr(args, "port", None),
    }
    return load_config(path=getattr(args, "config", None), overrides=overrides)


# -- run ----------------------------------------------------------------------


def cmd_run(args) -> int:
    config = _load_cli_config(args)
    gateway = _gateway_from(config, scripted_responses=args.scripted_response or [])
    workspace = os.path.abspath(config.workspace)
    os.makedirs(workspace, exist_ok=True)
    backend = LocalBackend(workspace, browse_fixture=config.browse_fixture or None)
    controller = SessionController(
        agent_name=config.agent,
        backend=backend,
        gateway=gateway,
        registry=_registry_from(config),
        limits=config.limits(),
        headless=True,
    )
    try:
        result = controller.run(args.task)
    finally:
        backend.close()
    if not args.quiet:
        for event in result.state.events:
            print(encode_event(event))
    if args.save_trajectory:
        parent = os.path.dirname(os.path.abspath(args.save_trajectory))
        os.makedirs(parent, exist_ok=True)
        write_trajectory(
            args.save_trajectory,
            result.state.events.snapshot(),
            metadata={
                "agent": config.agent,
                "reason": result.reason,
                "cost": round(result.state.accumulated_cost, 8),
                "platform_version": __version__,
            },
        )
    print(
        f"reason={result.reason} steps={result.state.iteration}"
        f" cost={result.state.accumulated_cost:.6f} summary={result.summary!r}"
    )
    if result.reason == "finished":
        return 0
    print(f"session ended without finishing: {result.reason}", file=sys.stderr)
    return 1


# -- serve --------------------------------------------------------------------


def cmd_serve(args) -> int:
    config = _load_cli_config(args)
    root = os.path.abspath(config.workspace)
    hub = ControllerHub(
        root_dir=root,
        mode=config.mode,
        registry=_registry_from(config),
        limits=config.limits(),
        browse_fixture=config.browse_fixture or None,
        recording_path=config.recording_path,
        endpoint=config.endpoint,
        api_key=config.api_key,
        model=config.model,
    )
    server = UIServer(hub, host=args.host, port=config.port)
    host, port = server.start()
    print(f"agentkernel serving on http://{host}:{port} (mode={config.mode})")
    print(f"workspaces under {root}")
    try:
        server._thread.join()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.stop()
    return 0


# -- replay -------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        metadata, events = read_trajectory(args.trajectory)
        verify_stream_invariants(events)
    except (CausalityError, CodecError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"unreadable trajectory: {exc}", file=sys.stderr)
        return 1
    if metadata and not args.quiet:
        print(f"# {json.dumps(metadata, sort_keys=True)}")
    for event in events:
        print(encode_event(event))
    print(f"ok: {len(events)} events, invariants hold", file=sys.stderr)
    return 0


# -- eval ---------------------------------------------------------------------


def cmd_eval(args) -> int:
    suite_dir = args.suite
    if not os.path.isdir(suite_dir):
        candidate = os.path.join(args.suites_dir, args.suite)
        if not os.path.isdir(candidate):
            print(f"no suite at {suite_dir!r} or {candidate!r}", file=sys.stderr)
            return 2
        suite_dir = candidate
    try:
        results, summary, prefix = run_suite(
            suite_dir,
            report_dir=args.report_dir,
            max_workers=args.workers,
        )
    except TaskError as exc:
        print(f"TaskError: {exc}", file=sys.stderr)
        return 1
    print(format_table(results, summary))
    print(f"report written to {prefix}.txt / {prefix}.jsonl")
    return 0 if summary.successes == summary.total else 1


# -- images -------------------------------------------------------------------


def _context_from_dir(path: Optional[str]) -> dict[str, bytes]:
    if not path:
        return {}
    manifest: dict[str, bytes] = {}
    for dirpath, _dirnames, filenames in os.walk(path):
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            rel = os.path.relpath(full, path).replace(os.sep, "/")
            with open(full, "rb") as fh:
                manifest[rel] = fh.read()
    return manifest


def cmd_images_resolve(args) -> int:
    context = _context_from_dir(args.context)
    version = args.platform_version or __version__
    if args.dry_run_tags:
        ref = image_ref(args.base, version, context)
        decision = "not_evaluated"
    else:
        ref, decision = resolve_runtime_image(
            args.base, version, context, ImageRegistry()
        )
    print(f"generic_tag {ref.generic_tag}")
    print(f"hash_tag    {ref.hash_tag}")
    print(f"decision    {decision}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentkernel",
        description="Event-stream agent platform: run, serve, replay, evaluate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to agentkernel.toml")
        p.add_argument("--mode", choices=("scripted", "replay", "record", "live"))
        p.add_argument("--recording", help="recording file for replay/record modes")
        p.add_argument("--workspace", help="workspace directory")
        p.add_argument("--browse-fixture", dest="browse_fixture")
        p.add_argument("--agents-file", dest="agents_file")
        p.add_argument("--endpoint")
        p.add_argument("--model")
        p.add_argument("--max-iterations", dest="max_iterations", type=int)
        p.add_argument("--max-cost", dest="max_cost", type=float)

    run_p = sub.add_parser("run", help="run one task to termination")
    run_p.add_argument("-t", "--task", required=True, help="task instruction text")
    run_p.add_argument("-a", "--agent", help="agent name (default from config)")
    run_p.add_argument(
        "--scripted-response",
        action="append",
        help="queue a scripted model response (repeatable; scripted mode)",
    )
    run_p.add_argument("--save-trajectory", help="write the event stream to FILE")
    run_p.add_argument("-q", "--quiet", action="store_true")
    common(run_p)
    run_p.set_defaults(fn=cmd_run)

    serve_p = sub.add_parser("serve", help="serve the session API for UI clients")
    serve_p.add_argument("--port", type=int, help="listen port (default from config)")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("-a", "--agent", help=argparse.SUPPRESS)
    common(serve_p)
    serve_p.set_defaults(fn=cmd_serve)

    replay_p = sub.add_parser("replay", help="verify and re-emit a trajectory")
    replay_p.add_argument("--trajectory", required=True)
    replay_p.add_argument("-q", "--quiet", action="store_true")
    replay_p.set_defaults(fn=cmd_replay)

    eval_p = sub.add_parser("eval", help="run a task suite in replay mode")
    eval_p.add_argument("--suite", required=True, help="suite name or directory")
    eval_p.add_argument("--suites-dir", default="suites")
    eval_p.add_argument("--report-dir", default="reports")
    eval_p.add_argument("--workers", type=int, default=1)
    eval_p.set_defaults(fn=cmd_eval)

    images_p = sub.add_parser("images", help="runtime image tag utilities")
    images_sub = images_p.add_subparsers(dest="images_command", required=True)
    resolve_p = images_sub.add_parser(
        "resolve", help="compute image tags and the build/reuse decision"
    )
    resolve_p.add_argument("--base", required=True, help="base image, name[:tag]")
    resolve_p.add_argument(
        "--platform-version",
        dest="platform_version",
        help=f"platform version for the generic tag (default {__version__})",
    )
    resolve_p.add_argument("--context", help="build-context directory to hash")
    resolve_p.add_argument(
        "--dry-run-tags",
        action="store_true",
        help="print tags without consulting a registry",
    )
    resolve_p.set_defaults(fn=cmd_images_resolve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
