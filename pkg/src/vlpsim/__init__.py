"""Visible-light 3D drone positioning: simulator, solvers and evaluation."""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends, get_kernels  # noqa: F401
from .channel import (  # noqa: F401
    ChannelGeometry,
    Luminaire,
    NoiseModel,
    Photodiode,
    channel_gain,
    lambertian_radiant_intensity,
    received_power,
)
from .localization import (  # noqa: F401
    DistanceEstimate,
    GeometryError,
    IndirectHConfig,
    InvalidRssError,
    PositionEstimate,
    PsoConfig,
    distance_parallel,
    distance_tilted,
    incidence_angle,
    solve_firefly,
    solve_indirect_h,
    solve_pso_3d,
    trilaterate_2d,
)
from .sensors import BaroModel, ImuModel, Pose, SensorFrame  # noqa: F401
from .sim import FlightPlan, Testbed, default_testbed, generate_trajectory, run_flight  # noqa: F401
