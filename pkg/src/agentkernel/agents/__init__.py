"""Agent registry: built-in generalist and browsing specialist, TOML loading.

Agents register under versioned names ("codeact@1") plus a bare alias; the
version shows up in recordings so stale recordings fail loudly when a prompt
format changes. An agents.toml file can add entries, either standalone
(grammar + system prompt) or stacked on a built-in via an overlay.
"""

from __future__ import annotations

import os
from typing import Callable, Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from .base import (
    AgentConfig,
    AgentRegistry,
    AgentSpec,
    AgentStepOutput,
    InvalidOverlay,
    MalformedResponse,
    MicroOverlay,
    UnknownAgent,
    apply_micro_overlay,
    parse_codeact_response,
)
from .browsing import browsing_step, build_step_prompt, parse_browsing_response, prompt_fingerprint
from .codeact import (
    build_messages,
    codeact_step,
    default_codeact_config,
    load_prompt,
    render_action,
    render_observation,
    truncate_middle,
)

STEP_FNS: dict[str, Callable] = {"codeact": codeact_step, "browsing": browsing_step}


def default_browsing_config() -> AgentConfig:
    return AgentConfig(
        name="browsing@1",
        system_message=load_prompt("browsing_system.md"),
        grammar="browsing",
        allowed_action_kinds=("browse",),
        delegate_browsing=False,
        finish_on_browse_episode=True,
    )


def default_registry() -> AgentRegistry:
    registry = AgentRegistry()
    registry.register(
        AgentSpec(config=default_codeact_config(), step=codeact_step),
        aliases=("codeact",),
    )
    registry.register(
        AgentSpec(config=default_browsing_config(), step=browsing_step),
        aliases=("browsing",),
    )
    return registry


_CONFIG_FIELDS = (
    "delegate_browsing",
    "browse_delegate",
    "finish_on_browse_episode",
    "history_char_budget",
)


def _read_prompt(name: str, base_dir: str) -> str:
    local = os.path.join(base_dir, name)
    if os.path.isfile(local):
        with open(local, encoding="utf-8") as fh:
            return fh.read()
    return load_prompt(name)


def load_registry(path: str, registry: Optional[AgentRegistry] = None) -> AgentRegistry:
    """Extend the built-in registry with entries from an agents.toml file."""
    registry = registry or default_registry()
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))
    for short_name, entry in doc.get("agents", {}).items():
        version = int(entry.get("version", 1))
        full_name = f"{short_name}@{version}"
        if full_name in registry:
            continue  # built-ins keep priority
        base_name = entry.get("base")
        if base_name:
            parent = registry.get(base_name)
            overlay = MicroOverlay(
                extra_system_text=entry.get("extra_system_text", ""),
                allowed_action_kinds=(
                    tuple(entry["allowed_action_kinds"])
                    if "allowed_action_kinds" in entry
                    else None
                ),
            )
            config = apply_micro_overlay(parent.config, overlay)
            for field in _CONFIG_FIELDS:
                if field in entry:
                    config = _replace_field(config, field, entry[field])
            config = _replace_field(config, "name", full_name)
            step = parent.step
        else:
            grammar = entry["grammar"]
            kwargs = {f: entry[f] for f in _CONFIG_FIELDS if f in entry}
            if "allowed_action_kinds" in entry:
                kwargs["allowed_action_kinds"] = tuple(entry["allowed_action_kinds"])
            config = AgentConfig(
                name=full_name,
                system_message=_read_prompt(entry["system_prompt"], base_dir),
                grammar=grammar,
                **kwargs,
            )
            step = STEP_FNS[grammar]
        aliases = () if short_name in registry else (short_name,)
        registry.register(AgentSpec(config=config, step=step), aliases=aliases)
    return registry


def _replace_field(config: AgentConfig, field: str, value) -> AgentConfig:
    from dataclasses import replace

    return replace(config, **{field: value})


__all__ = [
    "AgentConfig",
    "AgentRegistry",
    "AgentSpec",
    "AgentStepOutput",
    "InvalidOverlay",
    "MalformedResponse",
    "MicroOverlay",
    "UnknownAgent",
    "apply_micro_overlay",
    "browsing_step",
    "build_messages",
    "build_step_prompt",
    "codeact_step",
    "default_browsing_config",
    "default_codeact_config",
    "default_registry",
    "load_prompt",
    "load_registry",
    "parse_browsing_response",
    "parse_codeact_response",
    "prompt_fingerprint",
    "render_action",
    "render_observation",
    "truncate_middle",
]
