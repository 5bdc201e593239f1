"""Parser, typechecker, and canonical printer for browsing action programs.

A program is one call per line in Python call syntax with literal arguments
only. Parsing binds every argument against the primitive's declared signature
(defaults resolved), so two programs are equal iff their bound forms are.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Any, Union

from .actions import SIGNATURES, ActionSetConfig, Param, Primitive

Value = Union[str, float, int, tuple]


class ParseError(Exception):
    """Syntax or binding failure, with 1-based line and 0-based column."""

    def __init__(self, message: str, line: int = 1, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.bare_message = message


class DisabledAction(Exception):
    """Primitive exists but is not in the active action-set config."""


class BrowseTypeError(TypeError):
    """Argument value does not conform to the primitive's signature."""


@dataclass(frozen=True)
class BrowseCall:
    """One bound primitive call: every parameter resolved, defaults included."""

    name: str
    args: tuple[tuple[str, Value], ...]

    def arg(self, name: str) -> Value:
        for key, value in self.args:
            if key == name:
                return value
        raise KeyError(name)

    @property
    def primitive(self) -> Primitive:
        return SIGNATURES[self.name]


@dataclass(frozen=True)
class ActionProgram:
    """Ordered nonempty sequence of calls, executed until the first failure."""

    calls: tuple[BrowseCall, ...]

    def __post_init__(self) -> None:
        if not self.calls:
            raise ValueError("an action program must contain at least one call")

    def __iter__(self):
        return iter(self.calls)

    def __len__(self) -> int:
        return len(self.calls)


# ---------------------------------------------------------------------------
# Argument coercion


def _coerce(param: Param, value: Any, line: int, strict_types: bool = False) -> Value:
    def fail(expected: str):
        exc = BrowseTypeError(
            f"{param.name}: expected {expected}, got {value!r}"
        )
        if strict_types:
            raise exc
        raise ParseError(str(exc), line) from exc

    kind = param.kind
    if kind == "str":
        if not isinstance(value, str):
            fail("a string")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if kind == "str_or_list":
        if isinstance(value, str):
            return value
        if isinstance(value, (list, tuple)) and all(
            isinstance(v, str) for v in value
        ):
            return tuple(value)
        fail("a string or list of strings")
    if kind == "enum":
        if value not in param.choices:
            fail(f"one of {list(param.choices)}")
        return value
    if kind == "enum_list":
        if isinstance(value, (list, tuple)) and all(
            v in param.choices for v in value
        ):
            return tuple(value)
        fail(f"a list drawn from {list(param.choices)}")
    raise AssertionError(f"unhandled param kind {kind}")


def bind_call(
    name: str,
    positional: list[Any],
    keyword: dict[str, Any],
    line: int = 1,
    strict_types: bool = False,
) -> BrowseCall:
    """Bind raw argument values against a signature, resolving defaults."""
    if name not in SIGNATURES:
        raise ParseError(f"unknown primitive '{name}'", line)
    prim = SIGNATURES[name]
    if len(positional) > len(prim.params):
        raise ParseError(
            f"{name} takes at most {len(prim.params)} arguments, got {len(positional)}",
            line,
        )
    bound: dict[str, Any] = {}
    for param, value in zip(prim.params, positional):
        bound[param.name] = value
    for key, value in keyword.items():
        try:
            prim.param(key)
        except KeyError:
            raise ParseError(f"{name} has no parameter '{key}'", line) from None
        if key in bound:
            raise ParseError(f"duplicate argument '{key}' for {name}", line)
        bound[key] = value
    args = []
    for param in prim.params:
        if param.name in bound:
            args.append((param.name, _coerce(param, bound[param.name], line, strict_types)))
        elif param.required:
            raise ParseError(f"{name} missing required argument '{param.name}'", line)
        else:
            default = param.default
            args.append((param.name, tuple(default) if isinstance(default, (list, tuple)) else default))
    return BrowseCall(name=name, args=tuple(args))


# ---------------------------------------------------------------------------
# Parsing


def _literal(node: ast.expr, line: int) -> Any:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or node.value is None:
            raise ParseError(f"unsupported literal {node.value!r}", line, node.col_offset)
        if isinstance(node.value, (str, int, float)):
            return node.value
        raise ParseError(f"unsupported literal {node.value!r}", line, node.col_offset)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        inner = _literal(node.operand, line)
        if isinstance(inner, (int, float)):
            return -inner
        raise ParseError("unary minus only applies to numbers", line, node.col_offset)
    if isinstance(node, ast.List):
        return [_literal(el, line) for el in node.elts]
    raise ParseError("arguments must be literals", line, node.col_offset)


def parse_call(text: str, line: int = 1) -> BrowseCall:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(
            f"invalid syntax: {exc.msg}", line, (exc.offset or 1) - 1
        ) from exc
    node = tree.body
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ParseError("each line must be a single primitive call", line)
    positional = [_literal(arg, line) for arg in node.args]
    keyword = {}
    for kw in node.keywords:
        if kw.arg is None:
            raise ParseError("**kwargs is not allowed", line, kw.value.col_offset)
        if kw.arg in keyword:
            raise ParseError(f"duplicate argument '{kw.arg}'", line, kw.value.col_offset)
        keyword[kw.arg] = _literal(kw.value, line)
    return bind_call(node.func.id, positional, keyword, line)


def parse_action_program(text: str) -> ActionProgram:
    """Parse one call per line; blank lines are ignored."""
    calls = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        calls.append(parse_call(raw, lineno))
    if not calls:
        raise ParseError("empty action program", 1)
    return ActionProgram(calls=tuple(calls))


def typecheck_call(call: BrowseCall, config: ActionSetConfig) -> BrowseCall:
    """Validate a call against an action-set config; returns the call."""
    if call.name not in SIGNATURES:
        raise BrowseTypeError(f"unknown primitive '{call.name}'")
    if not config.allows(call.name):
        raise DisabledAction(f"{call.name} is not enabled by this action set")
    prim = SIGNATURES[call.name]
    names = [key for key, _ in call.args]
    if names != [p.name for p in prim.params]:
        raise BrowseTypeError(
            f"{call.name} arguments {names} do not match signature {prim.signature}"
        )
    for param, (_, value) in zip(prim.params, call.args):
        _coerce(param, list(value) if isinstance(value, tuple) else value, 1, strict_types=True)
    return call


def typecheck_program(program: ActionProgram, config: ActionSetConfig) -> ActionProgram:
    for call in program:
        typecheck_call(call, config)
    return program


# ---------------------------------------------------------------------------
# Canonical printer


def _fmt_value(value: Value) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return repr(value)


def print_call(call: BrowseCall) -> str:
    prim = SIGNATURES[call.name]
    parts = []
    for param, (_, value) in zip(prim.params, call.args):
        if param.required:
            parts.append(_fmt_value(value))
        else:
            default = param.default
            if isinstance(default, (list, tuple)):
                default = tuple(default)
            current = value
            if isinstance(current, float) and isinstance(default, (int, float)):
                unchanged = current == float(default)
            else:
                unchanged = current == default
            if not unchanged:
                parts.append(f"{param.name}={_fmt_value(value)}")
    return f"{call.name}({', '.join(parts)})"


def print_program(program: ActionProgram) -> str:
    return "\n".join(print_call(call) for call in program)
