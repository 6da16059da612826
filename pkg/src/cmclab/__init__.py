"""cmclab: a numerical laboratory for free-boundary constant-mean-curvature disks.

Modules
-------
implicit_domains
    Level-set container domains; boundary normal, shape operator, mean
    curvature H, its surface gradient, normal jets, critical points of H.
disk_maps
    Discrete calculus on sampled disk maps: H-system residuals, conformality
    and orthogonality defects, energies, traces, boundary straightening and
    the reflection extension; the DMAP file format.
bubbles
    Exact rational sphere/hemisphere bubbles: evaluation, gradient formula,
    energy quantization, simplicity tests, synthetic concentrating maps.
extraction
    The bubble-extraction loop: weighted-gradient candidate statistic,
    limit-domain classification, Gauss-Newton fitting, separation and
    concentration statistics, image coverage.
balance
    The flux (balancing) identity, its second-order reduction at a boundary
    point, the Gauss-map identity, and the reduced force collinear with
    grad H.
wente
    Disk Poisson solver (geometer's sign) and the sharp Wente inequalities
    plus the trilinear estimate feeding extraction thresholds.
cli
    Batch commands with stable exit codes; see ``cmclab --help``.
"""

from . import balance, bubbles, cli, disk_maps, extraction, implicit_domains, polar_grid, wente
from .errors import (BelowThreshold, BoundaryMismatch, BoundaryOffDomain,
                     BudgetExceeded, ChartTooLarge, CmcLabError, DegenerateGradient,
                     FitDiverged, FormatError, NonConvergence, PoleInput,
                     ReducibleFraction, SingularSystem)

__all__ = [
    "balance", "bubbles", "cli", "disk_maps", "extraction", "implicit_domains",
    "polar_grid", "wente",
    "BelowThreshold", "BoundaryMismatch", "BoundaryOffDomain", "BudgetExceeded",
    "ChartTooLarge", "CmcLabError", "DegenerateGradient", "FitDiverged",
    "FormatError", "NonConvergence", "PoleInput", "ReducibleFraction",
    "SingularSystem",
]

__version__ = "0.1.0"
