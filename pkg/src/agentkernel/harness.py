"""Declarative task runner: seed a workspace, replay a session, verify.

A task is one TOML file: instruction, seeded workspace files, optional
simulated site, a recording of the model's responses, and a checker that
decides success (byte-exact gold files, an exact final message, or a named
predicate). Suites are directories of task files; runs produce an aligned
text table plus a JSONL report that the table can be recomputed from.

Replay is the only implicit mode. If a task's recording is missing the run
fails hard rather than silently calling a live model.
"""

from __future__ import annotations

import json
import os
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from .agents import AgentRegistry, default_registry
from .controller import SessionController, SessionResult
from .events import SessionLimits
from .llm import MeteredProvider, Recording, ReplayProvider
from .runtime import LocalBackend


class TaskError(Exception):
    """Task definition or run-precondition problem (not a task failure)."""


@dataclass(frozen=True)
class TaskSpec:
    id: str
    instruction: str
    agent: str = "codeact@1"
    recording: str = ""  # absolute path after loading
    workspace_files: dict[str, str] = field(default_factory=dict)
    browse_fixture: str = ""
    limits: SessionLimits = field(default_factory=SessionLimits)
    checker_kind: str = "predicate"  # gold_files | message_exact | predicate
    gold_files: dict[str, str] = field(default_factory=dict)
    expected_message: str = ""
    predicate: str = "finished"

    def __post_init__(self) -> None:
        if not self.id:
            raise TaskError("task id must be nonempty")
        if self.checker_kind not in ("gold_files", "message_exact", "predicate"):
            raise TaskError(f"unknown checker kind {self.checker_kind!r}")
        if self.checker_kind == "gold_files" and not self.gold_files:
            raise TaskError(f"task {self.id}: gold_files checker needs a manifest")
        if self.checker_kind == "predicate" and self.predicate not in PREDICATES:
            raise TaskError(
                f"task {self.id}: unknown predicate {self.predicate!r};"
                f" known: {sorted(PREDICATES)}"
            )


@dataclass(frozen=True)
class TaskResult:
    id: str
    success: bool
    reason: str
    steps: int
    cost: float
    duration_s: float
    detail: str = ""

    def __post_init__(self) -> None:
        if self.success and self.reason not in ("finished", "awaiting_user"):
            raise ValueError(
                f"task {self.id}: success with termination reason {self.reason!r}"
            )

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "success": self.success,
            "reason": self.reason,
            "steps": self.steps,
            "cost": round(self.cost, 8),
            "duration_s": round(self.duration_s, 4),
            "detail": self.detail,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TaskResult":
        return cls(
            id=doc["id"],
            success=bool(doc["success"]),
            reason=doc["reason"],
            steps=int(doc["steps"]),
            cost=float(doc["cost"]),
            duration_s=float(doc["duration_s"]),
            detail=doc.get("detail", ""),
        )


PREDICATES: dict[str, Callable[[SessionResult], bool]] = {
    "finished": lambda r: r.reason == "finished",
    "finished_or_waiting": lambda r: r.reason in ("finished", "awaiting_user"),
    "no_errors": lambda r: r.reason == "finished"
    and not any(ev.kind == "error" for ev in r.state.events),
}


# ---------------------------------------------------------------------------
# task loading


def load_task(path: str) -> TaskSpec:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))

    recording = doc.get("recording", "")
    if recording and not os.path.isabs(recording):
        recording = os.path.join(base_dir, recording)

    fixture = doc.get("browse", {}).get("fixture", "")
    if fixture:
        local = os.path.join(base_dir, fixture)
        if os.path.isfile(local):
            fixture = local
        else:
            import importlib.resources as resources

            packaged = resources.files("agentkernel") / "browse" / "fixtures" / fixture
            if not packaged.is_file():
                raise TaskError(f"task {doc.get('id')}: fixture {fixture!r} not found")
            fixture = str(packaged)

    limits_doc = doc.get("limits", {})
    limits = SessionLimits(
        max_iterations=int(limits_doc.get("max_iterations", 30)),
        max_cost=float(limits_doc.get("max_cost", 10.0)),
        max_delegation_depth=int(limits_doc.get("max_delegation_depth", 2)),
    )

    checker = doc.get("checker", {})
    return TaskSpec(
        id=doc["id"],
        instruction=doc["instruction"],
        agent=doc.get("agent", "codeact@1"),
        recording=recording,
        workspace_files=dict(doc.get("workspace", {}).get("files", {})),
        browse_fixture=fixture,
        limits=limits,
        checker_kind=checker.get("kind", "predicate"),
        gold_files=dict(checker.get("gold", {})),
        expected_message=checker.get("text", ""),
        predicate=checker.get("predicate", "finished"),
    )


def load_suite(suite_dir: str) -> list[TaskSpec]:
    if not os.path.isdir(suite_dir):
        raise TaskError(f"suite directory {suite_dir} does not exist")
    specs = []
    for name in sorted(os.listdir(suite_dir)):
        if name.endswith(".toml"):
            specs.append(load_task(os.path.join(suite_dir, name)))
    if not specs:
        raise TaskError(f"suite {suite_dir} contains no task files")
    seen: set[str] = set()
    for spec in specs:
        if spec.id in seen:
            raise TaskError(f"duplicate task id {spec.id!r} in suite")
        seen.add(spec.id)
    return specs


# ---------------------------------------------------------------------------
# gold comparison


@dataclass(frozen=True)
class GoldComparison:
    match: bool
    diffs: tuple[str, ...]
    extra_files: tuple[str, ...]


def _first_diff_offset(a: bytes, b: bytes) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def compare_gold(workspace: str, gold_manifest: dict[str, str]) -> GoldComparison:
    """Byte-exact comparison of each manifest path against the workspace."""
    diffs: list[str] = []
    for rel_path, expected_text in sorted(gold_manifest.items()):
        actual_path = os.path.join(workspace, rel_path)
        if not os.path.isfile(actual_path):
            diffs.append(f"{rel_path}: missing from workspace")
            continue
        with open(actual_path, "rb") as fh:
            actual = fh.read()
        expected = expected_text.encode("utf-8")
        if actual != expected:
            offset = _first_diff_offset(actual, expected)
            diffs.append(
                f"{rel_path}: differs at byte {offset}"
                f" (expected {expected[offset:offset + 16]!r},"
                f" got {actual[offset:offset + 16]!r})"
            )
    manifest_set = set(gold_manifest)
    extra = []
    for root, _dirs, files in os.walk(workspace):
        for name in files:
            rel = os.path.relpath(os.path.join(root, name), workspace)
            if rel not in manifest_set:
                extra.append(rel)
    return GoldComparison(
        match=not diffs, diffs=tuple(diffs), extra_files=tuple(sorted(extra))
    )


# ---------------------------------------------------------------------------
# running


def _seed_workspace(spec: TaskSpec, workspace: str) -> None:
    for rel_path, content in spec.workspace_files.items():
        target = os.path.join(workspace, rel_path)
        os.makedirs(os.path.dirname(target) or workspace, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)


def _check(spec: TaskSpec, result: SessionResult, workspace: str) -> tuple[bool, str]:
    if result.reason not in ("finished", "awaiting_user"):
        return False, f"terminated with {result.reason}"
    if spec.checker_kind == "gold_files":
        comparison = compare_gold(workspace, spec.gold_files)
        detail = "; ".join(comparison.diffs) if comparison.diffs else "gold match"
        return comparison.match, detail
    if spec.checker_kind == "message_exact":
        got = result.summary
        if got == spec.expected_message:
            return True, "message match"
        return False, f"expected message {spec.expected_message!r}, got {got!r}"
    ok = PREDICATES[spec.predicate](result)
    return ok, f"predicate {spec.predicate} -> {ok}"


def replay_gateway(spec: TaskSpec) -> MeteredProvider:
    if not spec.recording:
        raise TaskError(f"task {spec.id}: no recording declared")
    if not os.path.isfile(spec.recording):
        raise TaskError(
            f"task {spec.id}: recording {spec.recording} is missing;"
            " refusing to fall back to a live model"
        )
    return MeteredProvider(ReplayProvider(Recording.load(spec.recording)))


def _register_workspace(gateway, workspace: str) -> None:
    # temp workspace paths are volatile between record and replay runs; make
    # sure every normalizer in the provider chain drops lines containing them
    seen: set[int] = set()
    obj = gateway
    while obj is not None and id(obj) not in seen:
        seen.add(id(obj))
        normalizer = getattr(obj, "normalizer", None)
        if normalizer is not None:
            normalizer.register_path(workspace)
        obj = getattr(obj, "inner", None)


def run_task(
    spec: TaskSpec,
    agent_name: Optional[str] = None,
    registry: Optional[AgentRegistry] = None,
    gateway=None,
    keep_workspace: bool = False,
) -> TaskResult:
    registry = registry or default_registry()
    gateway = gateway or replay_gateway(spec)
    workspace = tempfile.mkdtemp(prefix=f"ak-task-{spec.id}-")
    backend = None
    started = time.monotonic()
    try:
        _register_workspace(gateway, workspace)
        _seed_workspace(spec, workspace)
        backend = LocalBackend(workspace, browse_fixture=spec.browse_fixture or None)
        controller = SessionController(
            agent_name=agent_name or spec.agent,
            backend=backend,
            gateway=gateway,
            registry=registry,
            limits=spec.limits,
            session_id=spec.id,
        )
        result = controller.run(spec.instruction)
        success, detail = _check(spec, result, workspace)
        return TaskResult(
            id=spec.id,
            success=success,
            reason=result.reason,
            steps=result.state.iteration,
            cost=result.state.accumulated_cost,
            duration_s=time.monotonic() - started,
            detail=detail,
        )
    finally:
        if backend is not None:
            backend.close()
        if not keep_workspace:
            shutil.rmtree(workspace, ignore_errors=True)


@dataclass(frozen=True)
class SuiteSummary:
    total: int
    successes: int
    success_rate: float
    mean_cost: float
    mean_steps: float

    def to_doc(self) -> dict:
        return {
            "total": self.total,
            "successes": self.successes,
            "success_rate": round(self.success_rate, 4),
            "mean_cost": round(self.mean_cost, 8),
            "mean_steps": round(self.mean_steps, 4),
        }


def summarize(results: list[TaskResult]) -> SuiteSummary:
    if not results:
        raise TaskError("cannot summarize an empty result list")
    successes = sum(1 for r in results if r.success)
    return SuiteSummary(
        total=len(results),
        successes=successes,
        success_rate=100.0 * successes / len(results),
        mean_cost=sum(r.cost for r in results) / len(results),
        mean_steps=sum(r.steps for r in results) / len(results),
    )


def format_table(results: list[TaskResult], summary: SuiteSummary) -> str:
    headers = ("task", "ok", "reason", "steps", "cost", "detail")
    rows = [
        (
            r.id,
            "yes" if r.success else "NO",
            r.reason,
            str(r.steps),
            f"{r.cost:.4f}",
            r.detail[:60],
        )
        for r in results
    ]
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)) for row in rows]
    lines.append("")
    lines.append(
        f"success rate: {summary.success_rate:.1f}%"
        f" ({summary.successes}/{summary.total})"
        f"  mean cost: {summary.mean_cost:.4f}"
        f"  mean steps: {summary.mean_steps:.1f}"
    )
    return "\n".join(lines)


def run_suite(
    suite_dir: str,
    report_dir: str = "reports",
    registry: Optional[AgentRegistry] = None,
    max_workers: int = 1,
    suite_name: Optional[str] = None,
) -> tuple[list[TaskResult], SuiteSummary, str]:
    """Run every task in the suite; write text and JSONL reports.

    Returns (results, summary, report_path_prefix).
    """
    specs = load_suite(suite_dir)
    if max_workers <= 1:
        results = [run_task(spec, registry=registry) for spec in specs]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda s: run_task(s, registry=registry), specs))
    summary = summarize(results)

    suite_name = suite_name or os.path.basename(os.path.normpath(suite_dir))
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    os.makedirs(report_dir, exist_ok=True)
    prefix = os.path.join(report_dir, f"{suite_name}-{stamp}")
    with open(prefix + ".txt", "w", encoding="utf-8") as fh:
        fh.write(format_table(results, summary) + "\n")
    with open(prefix + ".jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"suite_summary": summary.to_doc()}, sort_keys=True) + "\n")
        for result in results:
            fh.write(json.dumps(result.to_doc(), sort_keys=True) + "\n")
    return results, summary, prefix


def read_report(jsonl_path: str) -> tuple[list[TaskResult], SuiteSummary]:
    """Load a machine-readable report back; used to recheck table numbers."""
    results: list[TaskResult] = []
    summary_doc: Optional[dict] = None
    with open(jsonl_path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            if "suite_summary" in doc:
                summary_doc = doc["suite_summary"]
            else:
                results.append(TaskResult.from_doc(doc))
    if summary_doc is None:
        raise TaskError(f"{jsonl_path} has no summary line")
    summary = SuiteSummary(
        total=summary_doc["total"],
        successes=summary_doc["successes"],
        success_rate=summary_doc["success_rate"],
        mean_cost=summary_doc["mean_cost"],
        mean_steps=summary_doc["mean_steps"],
    )
    return results, summary
