"""Figure rendering for equibandits result bundles."""

__version__ = "0.1.0"

from .bundle import EmptyResults, MissingColumns, ResultsBundle, SchemaMismatch
from .capacity import plot_capacity
from .gini_reward import plot_gini_reward
from .group_bars import plot_group_bars
from .pareto import plot_pareto

__all__ = [
    "EmptyResults",
    "MissingColumns",
    "ResultsBundle",
    "SchemaMismatch",
    "plot_capacity",
    "plot_gini_reward",
    "plot_group_bars",
    "plot_pareto",
]
