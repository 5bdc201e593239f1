"""Signature table for the browsing action primitives.

Each primitive is declared once, with typed parameters for the checker and a
verbatim signature/example block for prompt rendering. The set of names here
is the whole action language; the parser rejects anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

MISSING = object()

BUTTONS = ("left", "middle", "right")
MODIFIERS = ("Alt", "Control", "Meta", "Shift")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # str | float | int | str_or_list | enum | enum_list
    default: Any = MISSING
    choices: tuple[str, ...] = ()

    @property
    def required(self) -> bool:
        return self.default is MISSING


@dataclass(frozen=True)
class Primitive:
    name: str
    params: tuple[Param, ...]
    category: str  # control | element | viewport | coordinate | keyboard | nav | tab
    signature: str
    examples: tuple[str, ...] = ()
    summary: str = ""

    def param(self, name: str) -> Param:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


def _p(name: str, params: tuple[Param, ...], category: str, signature: str,
       examples: tuple[str, ...] = (), summary: str = "") -> Primitive:
    return Primitive(name, params, category, signature, examples, summary)


_BUTTON = Param("button", "enum", default="left", choices=BUTTONS)
_MODS = Param("modifiers", "enum_list", default=(), choices=MODIFIERS)

SIGNATURES: dict[str, Primitive] = {
    prim.name: prim
    for prim in [
        _p("noop", (Param("wait_ms", "float", default=1000.0),), "control",
           "noop(wait_ms: float = 1000)",
           ("noop()", "noop(500)"),
           "Do nothing, and optionally wait for the given time (in milliseconds)."),
        _p("send_msg_to_user", (Param("text", "str"),), "control",
           "send_msg_to_user(text: str)",
           ("send_msg_to_user('Based on the results of my search, the city was built in 1751.')",),
           "Sends a message to the user."),
        _p("report_infeasible", (Param("reason", "str"),), "control",
           "report_infeasible(reason: str)",
           ("report_infeasible('I cannot follow these instructions because there is no email field in this form.')",),
           "Notifies the user that their instructions are infeasible."),
        _p("fill", (Param("bid", "str"), Param("value", "str")), "element",
           "fill(bid: str, value: str)",
           ("fill('237', 'example value')",
            "fill('45', 'multi-line\\nexample')",
            "fill('a12', 'example with \"quotes\"')"),
           "Fill out a form field. It focuses the element and triggers an input event with the entered text."),
        _p("check", (Param("bid", "str"),), "element",
           "check(bid: str)", ("check('55')",),
           "Ensure a checkbox or radio element is checked."),
        _p("uncheck", (Param("bid", "str"),), "element",
           "uncheck(bid: str)", ("uncheck('a5289')",),
           "Ensure a checkbox or radio element is unchecked."),
        _p("select_option", (Param("bid", "str"), Param("options", "str_or_list")), "element",
           "select_option(bid: str, options: str | list[str])",
           ("select_option('48', 'blue')", "select_option('48', ['red', 'green', 'blue'])"),
           "Select one or multiple options in a <select> element."),
        _p("click", (Param("bid", "str"), _BUTTON, _MODS), "element",
           "click(bid: str, button: Literal['left', 'middle', 'right'] = 'left', "
           "modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])",
           ("click('51')", "click('b22', button='right')",
            "click('48', button='middle', modifiers=['Shift'])"),
           "Click an element."),
        _p("dblclick", (Param("bid", "str"), _BUTTON, _MODS), "element",
           "dblclick(bid: str, button: Literal['left', 'middle', 'right'] = 'left', "
           "modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])",
           ("dblclick('12')", "dblclick('ca42', button='right')",
            "dblclick('178', button='middle', modifiers=['Shift'])"),
           "Double click an element."),
        _p("hover", (Param("bid", "str"),), "element",
           "hover(bid: str)", ("hover('b8')",),
           "Hover over an element."),
        _p("press", (Param("bid", "str"), Param("key_comb", "str")), "element",
           "press(bid: str, key_comb: str)",
           ("press('88', 'Backspace')", "press('a26', 'Control+a')", "press('a61', 'Meta+Shift+t')"),
           "Focus the matching element and press a combination of keys."),
        _p("focus", (Param("bid", "str"),), "element",
           "focus(bid: str)", ("focus('b455')",),
           "Focus the matching element."),
        _p("clear", (Param("bid", "str"),), "element",
           "clear(bid: str)", ("clear('996')",),
           "Clear the input field."),
        _p("drag_and_drop", (Param("from_bid", "str"), Param("to_bid", "str")), "element",
           "drag_and_drop(from_bid: str, to_bid: str)", ("drag_and_drop('56', '498')",),
           "Perform a drag & drop from one element to another."),
        _p("scroll", (Param("delta_x", "float"), Param("delta_y", "float")), "viewport",
           "scroll(delta_x: float, delta_y: float)",
           ("scroll(0, 200)", "scroll(-50.2, -100.5)"),
           "Scroll horizontally and vertically. Amounts in pixels."),
        _p("mouse_move", (Param("x", "float"), Param("y", "float")), "coordinate",
           "mouse_move(x: float, y: float)", ("mouse_move(65.2, 158.5)",),
           "Move the mouse to a location."),
        _p("mouse_up", (Param("x", "float"), Param("y", "float"), _BUTTON), "coordinate",
           "mouse_up(x: float, y: float, button: Literal['left', 'middle', 'right'] = 'left')",
           ("mouse_up(250, 120)", "mouse_up(47, 252, 'right')"),
           "Move the mouse to a location then release a mouse button."),
        _p("mouse_down", (Param("x", "float"), Param("y", "float"), _BUTTON), "coordinate",
           "mouse_down(x: float, y: float, button: Literal['left', 'middle', 'right'] = 'left')",
           ("mouse_down(140.2, 580.1)", "mouse_down(458, 254.5, 'middle')"),
           "Move the mouse to a location then press and hold a mouse button."),
        _p("mouse_click", (Param("x", "float"), Param("y", "float"), _BUTTON), "coordinate",
           "mouse_click(x: float, y: float, button: Literal['left', 'middle', 'right'] = 'left')",
           ("mouse_click(887.2, 68)", "mouse_click(56, 712.56, 'right')"),
           "Move the mouse to a location and click a mouse button."),
        _p("mouse_dblclick", (Param("x", "float"), Param("y", "float"), _BUTTON), "coordinate",
           "mouse_dblclick(x: float, y: float, button: Literal['left', 'middle', 'right'] = 'left')",
           ("mouse_dblclick(5, 236)", "mouse_dblclick(87.5, 354, 'right')"),
           "Move the mouse to a location and double click a mouse button."),
        _p("mouse_drag_and_drop",
           (Param("from_x", "float"), Param("from_y", "float"),
            Param("to_x", "float"), Param("to_y", "float")), "coordinate",
           "mouse_drag_and_drop(from_x: float, from_y: float, to_x: float, to_y: float)",
           ("mouse_drag_and_drop(10.7, 325, 235.6, 24.54)",),
           "Drag and drop from a location to a location."),
        _p("mouse_upload_file",
           (Param("x", "float"), Param("y", "float"), Param("file", "str_or_list")), "coordinate",
           "mouse_upload_file(x: float, y: float, file: str | list[str])",
           ("mouse_upload_file(132.1, 547, 'my_receipt.pdf')",),
           "Click a location and select one or multiple input files for upload."),
        _p("keyboard_press", (Param("key", "str"),), "keyboard",
           "keyboard_press(key: str)",
           ("keyboard_press('Backspace')", "keyboard_press('Control+a')", "keyboard_press('Meta+Shift+t')"),
           "Press a combination of keys."),
        _p("keyboard_up", (Param("key", "str"),), "keyboard",
           "keyboard_up(key: str)", ("keyboard_up('Shift')", "keyboard_up('c')"),
           "Release a keyboard key."),
        _p("keyboard_down", (Param("key", "str"),), "keyboard",
           "keyboard_down(key: str)", ("keyboard_down('Shift')", "keyboard_down('c')"),
           "Press and holds a keyboard key."),
        _p("keyboard_type", (Param("text", "str"),), "keyboard",
           "keyboard_type(text: str)", ("keyboard_type('Hello world!')",),
           "Types a string of text through the keyboard."),
        _p("keyboard_insert_text", (Param("text", "str"),), "keyboard",
           "keyboard_insert_text(text: str)", ("keyboard_insert_text('Hello world!')",),
           "Insert a string of text in the currently focused element."),
        _p("goto", (Param("url", "str"),), "nav",
           "goto(url: str)", ("goto('http://www.example.com')",),
           "Navigate to a url."),
        _p("go_back", (), "nav",
           "go_back()", ("go_back()",),
           "Navigate to the previous page in history."),
        _p("go_forward", (), "nav",
           "go_forward()", ("go_forward()",),
           "Navigate to the next page in history."),
        _p("new_tab", (), "tab",
           "new_tab()", ("new_tab()",),
           "Open a new tab. It will become the active one."),
        _p("tab_close", (), "tab",
           "tab_close()", ("tab_close()",),
           "Close the current tab."),
        _p("tab_focus", (Param("index", "int"),), "tab",
           "tab_focus(index: int)", ("tab_focus(2)",),
           "Bring tab to front (activate tab)."),
        _p("upload_file", (Param("bid", "str"), Param("file", "str_or_list")), "element",
           "upload_file(bid: str, file: str | list[str])",
           ("upload_file('572', 'my_receipt.pdf')",
            "upload_file('63', ['/home/bob/Documents/image.jpg', '/home/bob/Documents/file.zip'])"),
           "Click an element and select one or multiple input files for upload."),
    ]
}

ALL_PRIMITIVES = tuple(SIGNATURES)

# The element-level action space rendered into the browsing agent prompt,
# in its documented order.
DEFAULT_AGENT_SET = (
    "noop",
    "send_msg_to_user",
    "scroll",
    "fill",
    "select_option",
    "click",
    "dblclick",
    "hover",
    "press",
    "focus",
    "clear",
    "drag_and_drop",
    "upload_file",
    "go_back",
    "go_forward",
    "goto",
)


@dataclass(frozen=True)
class ActionSetConfig:
    """Which primitives an agent or benchmark enables."""

    enabled: tuple[str, ...] = ALL_PRIMITIVES

    def __post_init__(self) -> None:
        unknown = [n for n in self.enabled if n not in SIGNATURES]
        if unknown:
            raise ValueError(f"unknown primitives in config: {unknown}")

    def allows(self, name: str) -> bool:
        return name in self.enabled

    def enabled_primitives(self) -> tuple[Primitive, ...]:
        return tuple(SIGNATURES[name] for name in self.enabled)


FULL_CONFIG = ActionSetConfig()
AGENT_CONFIG = ActionSetConfig(enabled=DEFAULT_AGENT_SET)
