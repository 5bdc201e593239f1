"""Action execution service: shell, cells, browser, and image machinery."""

from .backend import ActionCancelled, LocalBackend, NotExecutable
from .cells import CellResult, CellSession
from .images import (
    BUILD_FROM_SCRATCH,
    DECISIONS,
    EMPTY_CONTEXT_DIGEST,
    REBUILD_FROM_GENERIC,
    REUSE,
    BuildContextError,
    ImageRegistry,
    RuntimeImageRef,
    RuntimeUnavailable,
    compute_build_hash,
    generic_tag,
    hash_tag,
    image_ref,
    parse_base_image,
    resolve_runtime_image,
)
from .server import RuntimeServer
from .shell import CommandCancelled, ShellResult, ShellSession, ShellSessionError

__all__ = [
    "ActionCancelled",
    "LocalBackend",
    "NotExecutable",
    "CellResult",
    "CellSession",
    "BUILD_FROM_SCRATCH",
    "DECISIONS",
    "EMPTY_CONTEXT_DIGEST",
    "REBUILD_FROM_GENERIC",
    "REUSE",
    "BuildContextError",
    "ImageRegistry",
    "RuntimeImageRef",
    "RuntimeUnavailable",
    "compute_build_hash",
    "generic_tag",
    "hash_tag",
    "image_ref",
    "parse_base_image",
    "resolve_runtime_image",
    "RuntimeServer",
    "CommandCancelled",
    "ShellResult",
    "ShellSession",
    "ShellSessionError",
]
