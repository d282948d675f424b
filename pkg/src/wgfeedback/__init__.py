"""Atoms coupled to a semi-infinite waveguide: delay dynamics, feedback and checks."""

__version__ = "0.1.0"

from .network import AtomSpec, DelaySystem, NetworkError, NetworkSpec, uniform_network  # noqa: E402
from .dde import AmplitudeTrajectory, integrate_dde  # noqa: E402

__all__ = [
    "AmplitudeTrajectory",
    "AtomSpec",
    "DelaySystem",
    "NetworkError",
    "NetworkSpec",
    "__version__",
    "integrate_dde",
    "uniform_network",
]
