"""Joint Tikhonov-Lavrentiev regularization of box- and state-constrained
linear inverse/optimal-control problems, with empirical verification of the
associated error estimates and activity thresholds."""

__version__ = "0.1.0"

from . import admissible, experiments, grid, manufacture, operators, qp, solver
from .errors import TiklavError
