"""Event-stream agent platform with sandboxed execution and deterministic replay."""

__version__ = "0.9.3"
