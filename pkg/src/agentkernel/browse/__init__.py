"""Browsing action language: signatures, parser, and page simulator."""

from .actions import (
    AGENT_CONFIG,
    ALL_PRIMITIVES,
    DEFAULT_AGENT_SET,
    FULL_CONFIG,
    SIGNATURES,
    ActionSetConfig,
)
from .parser import (
    ActionProgram,
    BrowseCall,
    BrowseTypeError,
    DisabledAction,
    ParseError,
    bind_call,
    parse_action_program,
    parse_call,
    print_call,
    print_program,
    typecheck_call,
    typecheck_program,
)
from .sim import (
    CallStatus,
    Node,
    PageDoc,
    SimPage,
    TabState,
    blank_page,
    find_node,
    initial_state,
    load_site,
    render_observation,
    run_program,
    sim_execute,
)

__all__ = [
    "AGENT_CONFIG",
    "ALL_PRIMITIVES",
    "DEFAULT_AGENT_SET",
    "FULL_CONFIG",
    "SIGNATURES",
    "ActionSetConfig",
    "ActionProgram",
    "BrowseCall",
    "BrowseTypeError",
    "DisabledAction",
    "ParseError",
    "bind_call",
    "parse_action_program",
    "parse_call",
    "print_call",
    "print_program",
    "typecheck_call",
    "typecheck_program",
    "CallStatus",
    "Node",
    "PageDoc",
    "SimPage",
    "TabState",
    "blank_page",
    "find_node",
    "initial_state",
    "load_site",
    "render_observation",
    "run_program",
    "sim_execute",
]
