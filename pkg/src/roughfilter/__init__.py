"""roughfilter: nonlinear filtering for signal-observation systems driven
by Volterra Gaussian rough paths.

Modules: tensor (truncated tensor algebra), variation (p-variation / Young
integration), volterra (kernels and joint simulation), lift (geometric and
Ito-hybrid rough-path lifts), rde (controlled paths and RDE solvers),
filtering (robust Monte-Carlo filter), zakai (1-D rough Zakai PDE),
kalman (reference filter), cli (command line).
"""

__version__ = "0.1.0"

from .filtering import Phi, Scenario  # noqa: F401
from .volterra import VolterraKernel  # noqa: F401
