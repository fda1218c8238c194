"""Python bindings for the lambdapack runtime."""

from ._lambdapack import (
    Analyzer,
    builtin_names,
    builtin_source,
    desired_launches,
    enumerate_edges,
    enumerate_nodes,
    format_node,
    parse_node,
    program_info,
    run,
    validate,
)

__all__ = [
    "Analyzer",
    "builtin_names",
    "builtin_source",
    "desired_launches",
    "enumerate_edges",
    "enumerate_nodes",
    "format_node",
    "parse_node",
    "program_info",
    "run",
    "validate",
]
