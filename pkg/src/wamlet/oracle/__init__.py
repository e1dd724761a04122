"""Independent reference implementations used by the test drivers.

Nothing here imports the engine: the only shared module is the host term
model in :mod:`wamlet.syntax`.
"""

from .candidates import candidate_oracle, unifiable_subset
from .naive import DepthExceeded, NaiveResult, Skip, naive_solve
from .snapshot import SUB_LIMIT, linear_script, script_goal, snapshot_dyn_oracle

__all__ = [
    "DepthExceeded", "NaiveResult", "SUB_LIMIT", "Skip", "candidate_oracle",
    "linear_script", "naive_solve", "script_goal", "snapshot_dyn_oracle",
    "unifiable_subset",
]
