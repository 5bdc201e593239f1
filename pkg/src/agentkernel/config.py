"""Layered runtime configuration.

Precedence, highest first: explicit overrides (CLI flags), AK_* environment
variables, the [kernel] table of agentkernel.toml, then built-in defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from .events import SessionLimits
from .llm import MODES

CONFIG_FILE_NAME = "agentkernel.toml"


@dataclass(frozen=True)
class KernelConfig:
    agent: str = "codeact@1"
    mode: str = "replay"  # live | record | replay | scripted
    endpoint: str = ""
    api_key: str = ""
    model: str = "default"
    recording_path: str = ""
    workspace: str = "workspace"
    browse_fixture: str = ""
    agents_file: str = ""
    max_iterations: int = 30
    max_cost: float = 10.0
    max_delegation_depth: int = 2
    port: int = 8777

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def limits(self) -> SessionLimits:
        return SessionLimits(
            max_iterations=self.max_iterations,
            max_cost=self.max_cost,
            max_delegation_depth=self.max_delegation_depth,
        )


ENV_VARS = {
    "agent": "AK_AGENT",
    "mode": "AK_LLM_MODE",
    "endpoint": "AK_LLM_ENDPOINT",
    "api_key": "AK_LLM_API_KEY",
    "model": "AK_LLM_MODEL",
    "recording_path": "AK_RECORDING_PATH",
    "workspace": "AK_WORKSPACE",
    "browse_fixture": "AK_BROWSE_FIXTURE",
    "agents_file": "AK_AGENTS_FILE",
    "max_iterations": "AK_MAX_ITERATIONS",
    "max_cost": "AK_MAX_COST",
    "max_delegation_depth": "AK_MAX_DELEGATION_DEPTH",
    "port": "AK_PORT",
}

_FIELD_TYPES = {f.name: f.type for f in fields(KernelConfig)}


def _coerce(name: str, raw: Any) -> Any:
    target = _FIELD_TYPES[name]
    if target in ("int", int):
        return int(raw)
    if target in ("float", float):
        return float(raw)
    return str(raw)


def load_config(
    path: Optional[str] = None,
    env: Optional[dict] = None,
    overrides: Optional[dict] = None,
) -> KernelConfig:
    """Resolve the effective config; unknown file keys are rejected."""
    values: dict[str, Any] = {}

    if path is None and os.path.isfile(CONFIG_FILE_NAME):
        path = CONFIG_FILE_NAME
    if path:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        table = doc.get("kernel", {})
        unknown = sorted(set(table) - set(_FIELD_TYPES))
        if unknown:
            raise ValueError(f"unknown keys in {path}: {unknown}")
        for key, value in table.items():
            values[key] = _coerce(key, value)

    env = os.environ if env is None else env
    for field_name, var in ENV_VARS.items():
        if var in env:
            values[field_name] = _coerce(field_name, env[var])

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config override {key!r}")
        values[key] = _coerce(key, value)

    return KernelConfig(**values)
