"""Covariance steering for linear stochastic systems.

Finite-horizon steering (convex program or matched-channel Riccati pair),
stationary covariance assignment, a terminal-cost LQG baseline and
Monte Carlo validation.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    GaussianState,
    LinearSystem,
    StationaryProblem,
    SteeringProblem,
    TimeGrid,
)
from .steering import SteeringPlan, steer_schrodinger, steer_sdp  # noqa: E402
from .stationary import (  # noqa: E402
    StationaryPolicy,
    check_admissible,
    min_power_gain,
    relax_epsilon,
)

__all__ = [
    "GaussianState",
    "LinearSystem",
    "StationaryPolicy",
    "StationaryProblem",
    "SteeringPlan",
    "SteeringProblem",
    "TimeGrid",
    "check_admissible",
    "min_power_gain",
    "relax_epsilon",
    "steer_schrodinger",
    "steer_sdp",
]
