"""Python access to the EV charging simulator core."""

import json

from ._core import (
    EvattackError,
    compare_command,
    max_interest,
    project_feasible,
    run_command,
    shrink_project,
    validate,
)
from . import _core

__all__ = [
    "EvattackError",
    "compare_command",
    "max_interest",
    "project_feasible",
    "reference",
    "run",
    "run_command",
    "shrink_project",
    "validate",
]


def run(config, workers=0):
    """Run a scenario and return the report as a dict."""
    return json.loads(_core.run_json(str(config), workers))


def reference(config, tol=1e-9, accept_unconverged=False):
    """Solve the scenario's problem with the reference oracle."""
    return json.loads(_core.reference_json(str(config), tol, accept_unconverged))
