"""Bond percolation on ladder graphs G x Z with inhomogeneous edge classes.

Submodules: :mod:`graph` (ladders, classes, blocks), :mod:`percolation`
(sampling and connectivity), :mod:`coupling` (anchored couplings),
:mod:`estimator` (Monte Carlo and critical points), :mod:`oracle` (exact
enumeration) and :mod:`cli` (experiment runner).
"""

from .errors import (BudgetExceededError, HardAssertionError, InfeasibleCouplingError,
                     LadderPercError, ValidationError)
from .graph import (BaseGraph, BlockGeometry, EdgeClassMap, GeometryError, GraphError,
                    LadderWindow, build_block_geometry, build_ladder, classify_edges,
                    integer_segment, load_base_graph)
from .percolation import (Configuration, ParamSet, ReachQuery, reach_indicator,
                          sample_configuration)
from .estimator import CriticalCurvePoint, Estimate, estimate_pc, estimate_reach, sweep_q
from .oracle import (EnumerationBudget, exact_coupling_audit, exact_reach_probability,
                     exhaustive_containment_check)

__version__ = "0.1.0"
