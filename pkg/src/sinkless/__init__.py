"""LOCAL-model laboratory for sinkless orientation, sinkless colouring and the LLL."""

from .errors import (FormatError, GirthError, PreconditionError, ResourceError, RoundBudgetExceeded,
                     SinklessError)
from .graph_core import (EdgeColouredGraph, GirthReport, bipartite_double_cover, generate_regular_high_girth,
                         girth, konig_edge_colour, validate)
from .problems import (Assignment, Colouring, LllInstance, Orientation, check_assignment, check_lll_criterion,
                       dependency_graph, verify_colouring, verify_orientation)

__all__ = [
    "SinklessError", "FormatError", "GirthError", "PreconditionError", "ResourceError", "RoundBudgetExceeded",
    "EdgeColouredGraph", "GirthReport", "bipartite_double_cover", "generate_regular_high_girth", "girth",
    "konig_edge_colour", "validate",
    "Assignment", "Colouring", "LllInstance", "Orientation", "check_assignment", "check_lll_criterion",
    "dependency_graph", "verify_colouring", "verify_orientation",
]

__version__ = "0.1.0"
