"""Command-line front end: run configuration, subcommands and exit-code mapping."""

from .commands import (
    CHECKS,
    COMMANDS,
    RunConfig,
    cmd_check,
    cmd_cost,
    cmd_example,
    cmd_solve,
    cmd_transform,
    cmd_validate,
    cmd_verify_extremal,
    dispatch,
    error_report,
    execute,
    load_config_problem,
)

__all__ = [
    "CHECKS",
    "COMMANDS",
    "RunConfig",
    "cmd_check",
    "cmd_cost",
    "cmd_example",
    "cmd_solve",
    "cmd_transform",
    "cmd_validate",
    "cmd_verify_extremal",
    "dispatch",
    "error_report",
    "execute",
    "load_config_problem",
]
