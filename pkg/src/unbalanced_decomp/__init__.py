"""Decomposition planning and redistribution modelling for 5-D spectral data layouts."""
from .decomposition import (DEFAULT_MAX_IMBALANCE, DecompositionPlan, IdleReport, PlanKind,
                            SweetSpots, balanced_blocksize, balanced_plan, idle_report,
                            make_plan, sweetspots, unbalanced_plan)
from .grid import (GlobalCoordinate, GridShape, Layout, Space, compound_index, coordinate_of,
                   geometry, total_size)
from .redistribution import (SharedDomain, SizeGuardError, TransferEstimate, TransferMap,
                             Transform, analytic_estimate, compare_estimate, exact_transfer_map,
                             shared_domain)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAX_IMBALANCE", "DecompositionPlan", "GlobalCoordinate", "GridShape", "IdleReport",
    "Layout", "PlanKind", "SharedDomain", "SizeGuardError", "Space", "SweetSpots",
    "TransferEstimate", "TransferMap", "Transform", "analytic_estimate", "balanced_blocksize",
    "balanced_plan", "compare_estimate", "compound_index", "coordinate_of",
    "exact_transfer_map", "geometry", "idle_report", "make_plan", "shared_domain",
    "sweetspots", "total_size", "unbalanced_plan",
]
