"""drivelab: 9-DoF vehicle simulation, learned inverse-dynamics control and
closed-loop trajectory tracking evaluation."""

__version__ = "0.1.0"

from .dynamics import ControlInput, VehicleState, derivatives, simulate_rollout
from .params import TireCoeffs, VehicleParams
from .track import default_track, kinematic_speed_limit

__all__ = [
    "ControlInput", "TireCoeffs", "VehicleParams", "VehicleState",
    "default_track", "derivatives", "kinematic_speed_limit",
    "simulate_rollout", "__version__",
]
