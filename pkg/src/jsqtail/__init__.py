"""Numerical certification of the geometric tail decay of the minimum queue
length in a join-the-shortest-queue system, via its reflecting-random-walk /
quasi-birth-and-death representation."""

__version__ = "0.1.0"

from .model import QueueParams, normalize, check_stability  # noqa: F401
from .statespace import (  # noqa: F401
    BackgroundIndex, FaceLabel, enumerate_background, face_of,
)
from .kernel import (  # noqa: F401
    Increment, TransitionKernel, WalkState, build_kernel, increment_law, step,
)
from .solver import (  # noqa: F401
    StationaryDist, gth_stationary, simulate, solve_direct, solve_power, tv_distance,
)
