"""Deterministic element-level page simulator and accessibility-tree renderer.

State is a tree of typed nodes per page, a history stack per tab, and a tab
list. Interaction effects (what a click on a given element does) are authored
declaratively with each fixture rather than scripted, which keeps transitions
pure and replayable.

Fixture file format (JSON):

    {
      "start_url": "http://localhost:8000",        # optional; blank tab if absent
      "pages": {
        "<url>": {
          "title": "...",
          "nodes": [ {"bid": "8", "role": "heading", "name": "..."},
                     {"role": "StaticText", "name": "..."},
                     {"bid": "10", "role": "button", "name": "...",
                      "clickable": true, "children": [...]} ],
          "effects": {
            "click:10": [ {"op": "append_node",
                           "node": {"bid": "11", "role": "paragraph", ...}},
                          {"op": "set_name", "bid": "8", "name": "..."} ]
          }
        }
      }
    }

Effect ops: append_node (under optional "parent" bid), remove_node, set_name,
set_value, set_checked, focus, navigate (push the page at "url").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .parser import ActionProgram, BrowseCall

# Roles the simulator knows how to interact with. Anything else renders but
# only supports generic actions (click with scripted effect, hover, focus).
FILLABLE_ROLES = ("textbox", "searchbox", "combobox")
CHECKABLE_ROLES = ("checkbox", "radio", "switch")

BLANK_URL = "about:blank"


@dataclass(frozen=True)
class Node:
    role: str
    bid: Optional[str] = None
    name: str = ""
    value: str = ""
    checked: Optional[bool] = None
    clickable: bool = False
    options: tuple[str, ...] = ()
    children: tuple["Node", ...] = ()


@dataclass(frozen=True)
class PageDoc:
    url: str
    title: str
    children: tuple[Node, ...] = ()
    focused: Optional[str] = None
    # effect key "click:10" -> tuple of op documents
    effects: tuple[tuple[str, tuple], ...] = ()


@dataclass(frozen=True)
class TabState:
    history: tuple[PageDoc, ...]
    cursor: int

    @property
    def page(self) -> PageDoc:
        return self.history[self.cursor]


@dataclass(frozen=True)
class SimPage:
    """Whole simulated browser: tabs, the site map, and episode flags."""

    tabs: tuple[TabState, ...]
    active: int = 0
    site: tuple[tuple[str, PageDoc], ...] = ()
    message_to_user: str = ""
    episode_over: bool = False
    infeasible: bool = False

    @property
    def page(self) -> PageDoc:
        return self.tabs[self.active].page

    def lookup(self, url: str) -> Optional[PageDoc]:
        for site_url, doc in self.site:
            if site_url == url:
                return doc
        return None


@dataclass(frozen=True)
class CallStatus:
    ok: bool
    error: str = ""
    note: str = ""


def status_ok(note: str = "") -> CallStatus:
    return CallStatus(ok=True, note=note)


def status_error(error: str) -> CallStatus:
    return CallStatus(ok=False, error=error)


def blank_page() -> PageDoc:
    return PageDoc(url=BLANK_URL, title="")


def initial_state(
    site: dict[str, PageDoc], start_url: Optional[str] = None
) -> SimPage:
    start = site.get(start_url) if start_url else None
    first = start if start is not None else blank_page()
    return SimPage(
        tabs=(TabState(history=(first,), cursor=0),),
        active=0,
        site=tuple(sorted(site.items())),
    )


# ---------------------------------------------------------------------------
# Tree helpers (all pure)


def walk(nodes: tuple[Node, ...]):
    for node in nodes:
        yield node
        yield from walk(node.children)


def find_node(page: PageDoc, bid: str) -> Optional[Node]:
    for node in walk(page.children):
        if node.bid == bid:
            return node
    return None


def _map_tree(
    nodes: tuple[Node, ...], bid: str, fn: Callable[[Node], Optional[Node]]
) -> tuple[tuple[Node, ...], bool]:
    out = []
    hit = False
    for node in nodes:
        if node.bid == bid and not hit:
            hit = True
            mapped = fn(node)
            if mapped is not None:
                out.append(mapped)
            continue
        kids, child_hit = _map_tree(node.children, bid, fn)
        hit = hit or child_hit
        out.append(replace(node, children=kids) if child_hit else node)
    return tuple(out), hit


def update_node(page: PageDoc, bid: str, fn: Callable[[Node], Optional[Node]]) -> PageDoc:
    children, hit = _map_tree(page.children, bid, fn)
    if not hit:
        raise KeyError(bid)
    return replace(page, children=children)


def _with_page(state: SimPage, page: PageDoc) -> SimPage:
    tab = state.tabs[state.active]
    history = tab.history[: tab.cursor] + (page,) + tab.history[tab.cursor + 1 :]
    tabs = (
        state.tabs[: state.active]
        + (replace(tab, history=history),)
        + state.tabs[state.active + 1 :]
    )
    return replace(state, tabs=tabs)


def _push_page(state: SimPage, page: PageDoc) -> SimPage:
    tab = state.tabs[state.active]
    history = tab.history[: tab.cursor + 1] + (page,)
    new_tab = TabState(history=history, cursor=len(history) - 1)
    tabs = state.tabs[: state.active] + (new_tab,) + state.tabs[state.active + 1 :]
    return replace(state, tabs=tabs)


# ---------------------------------------------------------------------------
# Effects


def node_from_doc(doc: dict) -> Node:
    return Node(
        role=doc["role"],
        bid=doc.get("bid"),
        name=doc.get("name", ""),
        value=doc.get("value", ""),
        checked=doc.get("checked"),
        clickable=doc.get("clickable", False),
        options=tuple(doc.get("options", ())),
        children=tuple(node_from_doc(c) for c in doc.get("children", ())),
    )


def _apply_effect_op(state: SimPage, op: dict) -> SimPage:
    page = state.page
    kind = op["op"]
    if kind == "append_node":
        new = node_from_doc(op["node"])
        parent = op.get("parent")
        if parent is None:
            return _with_page(state, replace(page, children=page.children + (new,)))
        return _with_page(
            state,
            update_node(page, parent, lambda n: replace(n, children=n.children + (new,))),
        )
    if kind == "remove_node":
        return _with_page(state, update_node(page, op["bid"], lambda n: None))
    if kind == "set_name":
        return _with_page(
            state, update_node(page, op["bid"], lambda n: replace(n, name=op["name"]))
        )
    if kind == "set_value":
        return _with_page(
            state, update_node(page, op["bid"], lambda n: replace(n, value=op["value"]))
        )
    if kind == "set_checked":
        return _with_page(
            state,
            update_node(page, op["bid"], lambda n: replace(n, checked=bool(op["checked"]))),
        )
    if kind == "focus":
        return _with_page(state, replace(page, focused=op["bid"]))
    if kind == "navigate":
        target = state.lookup(op["url"])
        if target is None:
            return state
        return _push_page(state, target)
    raise ValueError(f"unknown effect op {kind!r}")


def _run_effects(state: SimPage, key: str) -> SimPage:
    for effect_key, ops in state.page.effects:
        if effect_key == key:
            for op in ops:
                state = _apply_effect_op(state, op)
            return state
    return state


# ---------------------------------------------------------------------------
# Execution


def sim_execute(state: SimPage, call: BrowseCall) -> tuple[SimPage, CallStatus]:
    """Apply one validated call; returns the new state and a status.

    Never mutates its input. Failed calls return the input state unchanged.
    """
    name = call.name
    page = state.page

    def need(bid: str) -> Optional[Node]:
        return find_node(page, bid)

    if name == "noop":
        return state, status_ok(f"noop({call.arg('wait_ms'):g}ms)")

    if name == "send_msg_to_user":
        text = call.arg("text")
        return (
            replace(state, message_to_user=text, episode_over=True),
            status_ok("message sent"),
        )

    if name == "report_infeasible":
        return (
            replace(
                state,
                message_to_user=call.arg("reason"),
                episode_over=True,
                infeasible=True,
            ),
            status_ok("reported infeasible"),
        )

    if name in ("fill", "clear"):
        bid = call.arg("bid")
        node = need(bid)
        if node is None:
            return state, status_error(f"no element with bid {bid}")
        if node.role not in FILLABLE_ROLES:
            return state, status_error(f"cannot {name} a {node.role}")
        value = call.arg("value") if name == "fill" else ""
        new_page = update_node(page, bid, lambda n: replace(n, value=value))
        return _with_page(state, replace(new_page, focused=bid)), status_ok()

    if name in ("check", "uncheck"):
        bid = call.arg("bid")
        node = need(bid)
        if node is None:
            return state, status_error(f"no element with bid {bid}")
        if node.role not in CHECKABLE_ROLES:
            return state, status_error(f"cannot {name} a {node.role}")
        target = name == "check"
        new_page = update_node(page, bid, lambda n: replace(n, checked=target))
        return _with_page(state, new_page), status_ok()

    if name == "select_option":
        bid = call.arg("bid")
        node = need(bid)
        if node is None:
            return state, status_error(f"no element with bid {bid}")
        if node.role not in ("select", "combobox", "listbox"):
            return state, status_error(f"cannot select options in a {node.role}")
        wanted = call.arg("options")
        wanted = (wanted,) if isinstance(wanted, str) else wanted
        for option in wanted:
            if option not in node.options:
                return state, status_error(f"no option {option!r} in element {bid}")
        new_page = update_node(
            page, bid, lambda n: replace(n, value="; ".join(wanted))
        )
        return _with_page(state, new_page), status_ok()

    if name in ("click", "dblclick"):
        bid = call.arg("bid")
        node = need(bid)
        if node is None:
            return state, status_error(f"no element with bid {bid}")
        new_state = _with_page(state, replace(page, focused=bid))
        if node.role in CHECKABLE_ROLES and name == "click":
            new_page = update_node(
                new_state.page, bid, lambda n: replace(n, checked=not bool(n.checked))
            )
            new_state = _with_page(new_state, new_page)
        new_state = _run_effects(new_state, f"{name}:{bid}")
        return new_state, status_ok()

    if name in ("hover", "focus", "press"):
        bid = call.arg("bid")
        node = need(bid)
        if node is None:
            return state, status_error(f"no element with bid {bid}")
        if name == "focus":
            return _with_page(state, replace(page, focused=bid)), status_ok()
        if name == "press":
            new_state = _with_page(state, replace(page, focused=bid))
            new_state = _run_effects(new_state, f"press:{bid}")
            return new_state, status_ok(f"press {call.arg('key_comb')}")
        return state, status_ok(f"hover {bid}")

    if name == "drag_and_drop":
        for key in ("from_bid", "to_bid"):
            if need(call.arg(key)) is None:
                return state, status_error(f"no element with bid {call.arg(key)}")
        new_state = _run_effects(state, f"drag:{call.arg('from_bid')}:{call.arg('to_bid')}")
        return new_state, status_ok("drag and drop")

    if name == "upload_file":
        bid = call.arg("bid")
        if need(bid) is None:
            return state, status_error(f"no element with bid {bid}")
        files = call.arg("file")
        files = (files,) if isinstance(files, str) else files
        return state, status_ok(f"selected {len(files)} file(s) for {bid}")

    if name == "goto":
        url = call.arg("url")
        target = state.lookup(url)
        if target is None:
            return state, status_error(f"no page at {url}")
        return _push_page(state, target), status_ok()

    if name == "go_back":
        tab = state.tabs[state.active]
        if tab.cursor == 0:
            return state, status_error("no earlier page in history")
        new_tab = replace(tab, cursor=tab.cursor - 1)
        tabs = state.tabs[: state.active] + (new_tab,) + state.tabs[state.active + 1 :]
        return replace(state, tabs=tabs), status_ok()

    if name == "go_forward":
        tab = state.tabs[state.active]
        if tab.cursor == len(tab.history) - 1:
            return state, status_error("no later page in history")
        new_tab = replace(tab, cursor=tab.cursor + 1)
        tabs = state.tabs[: state.active] + (new_tab,) + state.tabs[state.active + 1 :]
        return replace(state, tabs=tabs), status_ok()

    if name == "new_tab":
        tab = TabState(history=(blank_page(),), cursor=0)
        return (
            replace(state, tabs=state.tabs + (tab,), active=len(state.tabs)),
            status_ok(),
        )

    if name == "tab_close":
        tabs = state.tabs[: state.active] + state.tabs[state.active + 1 :]
        if not tabs:
            # closing the last tab leaves one blank tab rather than no browser
            tabs = (TabState(history=(blank_page(),), cursor=0),)
        return replace(state, tabs=tabs, active=max(0, state.active - 1)), status_ok()

    if name == "tab_focus":
        index = call.arg("index")
        if not 0 <= index < len(state.tabs):
            return state, status_error(f"no tab with index {index}")
        return replace(state, active=index), status_ok()

    # Coordinate and raw-keyboard primitives are accepted and recorded, but the
    # simulator is element-level so they leave the page unchanged.
    trace = {
        "scroll": lambda: f"scroll({call.arg('delta_x'):g}, {call.arg('delta_y'):g})",
        "mouse_move": lambda: "mouse_move",
        "mouse_up": lambda: "mouse_up",
        "mouse_down": lambda: "mouse_down",
        "mouse_click": lambda: "mouse_click",
        "mouse_dblclick": lambda: "mouse_dblclick",
        "mouse_drag_and_drop": lambda: "mouse_drag_and_drop",
        "mouse_upload_file": lambda: "mouse_upload_file",
        "keyboard_press": lambda: f"keyboard_press {call.arg('key')}",
        "keyboard_up": lambda: f"keyboard_up {call.arg('key')}",
        "keyboard_down": lambda: f"keyboard_down {call.arg('key')}",
        "keyboard_type": lambda: "keyboard_type",
        "keyboard_insert_text": lambda: "keyboard_insert_text",
    }
    if name in trace:
        return state, status_ok(trace[name]())

    raise ValueError(f"sim_execute has no handler for {name!r}")


def run_program(
    state: SimPage, program: ActionProgram
) -> tuple[SimPage, list[CallStatus]]:
    """Fold sim_execute over the program, stopping at the first failure or
    at episode end."""
    statuses: list[CallStatus] = []
    for call in program:
        if state.episode_over:
            break
        state, status = sim_execute(state, call)
        statuses.append(status)
        if not status.ok:
            break
    return state, statuses


# ---------------------------------------------------------------------------
# Observation rendering


def _quote(text: str) -> str:
    return "'" + text.replace("'", "\\'") + "'"


def _render_node(node: Node, focused: Optional[str], depth: int, out: list[str]) -> None:
    indent = "\t" * depth
    if node.role == "StaticText":
        out.append(f"{indent}StaticText {_quote(node.name)}")
    else:
        line = f"{indent}[{node.bid}] {node.role} {_quote(node.name)}"
        if node.value:
            line += f" value={_quote(node.value)}"
        if node.bid is not None and node.bid == focused:
            line += ", focused"
        if node.clickable:
            line += ", clickable"
        if node.checked is not None:
            line += ", checked" if node.checked else ", not checked"
        out.append(line)
    for child in node.children:
        _render_node(child, focused, depth + 1, out)


def render_observation(state: SimPage) -> str:
    """Render the active page as a tab-indented accessibility tree.

    Byte-stable: equal states render to equal strings.
    """
    page = state.page
    root = f"RootWebArea {_quote(page.title)}"
    if page.focused is None:
        root += ", focused"
    lines = [root]
    for node in page.children:
        _render_node(node, page.focused, 1, lines)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Fixture loading


def page_from_doc(url: str, doc: dict) -> PageDoc:
    nodes = tuple(node_from_doc(n) for n in doc.get("nodes", ()))
    effects = tuple(
        (key, tuple(ops)) for key, ops in sorted(doc.get("effects", {}).items())
    )
    page = PageDoc(
        url=url,
        title=doc.get("title", ""),
        children=nodes,
        focused=doc.get("focused"),
        effects=effects,
    )
    seen: set[str] = set()
    for node in walk(page.children):
        if node.bid is not None:
            if node.bid in seen:
                raise ValueError(f"duplicate bid {node.bid!r} in page {url}")
            seen.add(node.bid)
    return page


def load_site(path: str) -> SimPage:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    site = {url: page_from_doc(url, page) for url, page in doc.get("pages", {}).items()}
    return initial_state(site, doc.get("start_url"))
