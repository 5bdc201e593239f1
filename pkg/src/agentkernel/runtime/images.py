"""Sandbox image identity: content-hash tags, generic version tags, reuse rules.

Every runtime image carries two tags. The hash tag pins the exact build
context (any byte change produces a new tag); the generic tag names the
(platform version, base image) pair and is re-pointed on every successful
build so later builds can start from it instead of the raw base image.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Mapping, Optional


class BuildContextError(Exception):
    """Build context manifest could not be read or is malformed."""


class RuntimeUnavailable(Exception):
    """The requested execution backend cannot be reached."""


REUSE = "reuse"
REBUILD_FROM_GENERIC = "rebuild_from_generic"
BUILD_FROM_SCRATCH = "build_from_scratch"

DECISIONS = (REUSE, REBUILD_FROM_GENERIC, BUILD_FROM_SCRATCH)

EMPTY_CONTEXT_DIGEST = "d41d8cd98f00b204e9800998ecf8427e"


@dataclass(frozen=True)
class RuntimeImageRef:
    hash_tag: str
    generic_tag: str
    source_digest: str


def compute_build_hash(build_context: Mapping[str, bytes]) -> str:
    """MD5 over the canonical serialization of a directory manifest.

    Entries sorted by path; each contributes path bytes, NUL, content bytes,
    NUL. The NUL separators keep (path, content) boundaries unambiguous.
    """
    digest = hashlib.md5()
    for path in sorted(build_context):
        content = build_context[path]
        if isinstance(content, str):
            content = content.encode("utf-8")
        if not isinstance(content, bytes):
            raise BuildContextError(f"manifest entry {path!r} is not bytes")
        digest.update(path.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(content)
        digest.update(b"\x00")
    return digest.hexdigest()


def parse_base_image(base_image: str) -> tuple[str, str]:
    """Split name[:tag], defaulting the tag to 'latest'.

    The last colon is the tag separator only if the segment after it has no
    slash (otherwise it is a registry port).
    """
    if ":" in base_image:
        name, _, tag = base_image.rpartition(":")
        if "/" not in tag:
            return name, tag or "latest"
    return base_image, "latest"


def _sanitize(segment: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", segment)


def generic_tag(base_image: str, platform_version: str) -> str:
    name, tag = parse_base_image(base_image)
    return f"runtime:oh_v{platform_version}_{_sanitize(name)}_tag_{_sanitize(tag)}"


def hash_tag(source_digest: str) -> str:
    return f"runtime:{source_digest}"


def image_ref(
    base_image: str, platform_version: str, build_context: Mapping[str, bytes]
) -> RuntimeImageRef:
    digest = compute_build_hash(build_context)
    return RuntimeImageRef(
        hash_tag=hash_tag(digest),
        generic_tag=generic_tag(base_image, platform_version),
        source_digest=digest,
    )


class ImageRegistry:
    """Tag → source digest map; dry-run stand-in for a container engine."""

    def __init__(self, tags: Optional[dict[str, str]] = None):
        self._tags: dict[str, str] = dict(tags or {})
        self.builds: list[tuple[str, str]] = []  # (decision, hash_tag)

    def exists(self, tag: str) -> bool:
        return tag in self._tags

    def digest_of(self, tag: str) -> Optional[str]:
        return self._tags.get(tag)

    def record_build(self, decision: str, ref: RuntimeImageRef) -> None:
        self.builds.append((decision, ref.hash_tag))
        self._tags[ref.hash_tag] = ref.source_digest
        # generic tag is re-pointed on every build
        self._tags[ref.generic_tag] = ref.source_digest


def resolve_runtime_image(
    base_image: str,
    platform_version: str,
    build_context: Mapping[str, bytes],
    registry: ImageRegistry,
) -> tuple[RuntimeImageRef, str]:
    """Apply the reuse decision table and record the outcome in the registry.

    (a) image with this hash tag exists: reuse it, nothing is built;
    (b) else if the generic tag exists: rebuild starting from that image;
    (c) else: build from scratch from the base image.
    """
    ref = image_ref(base_image, platform_version, build_context)
    if registry.exists(ref.hash_tag):
        return ref, REUSE
    if registry.exists(ref.generic_tag):
        registry.record_build(REBUILD_FROM_GENERIC, ref)
        return ref, REBUILD_FROM_GENERIC
    registry.record_build(BUILD_FROM_SCRATCH, ref)
    return ref, BUILD_FROM_SCRATCH
