"""Simulated onboard sensors and the flight-log CSV format.

The IMU reports world-frame, gravity-compensated acceleration in Gs plus
noisy Euler angles (the flight stack's attitude estimate, not raw gyro
rates). The barometer adds a calibration offset, a slow linear ramp (zero
drift) and Gaussian noise to the true altitude.

Log files are CSV with the header::

    t,pr1,...,prN,ax,ay,az,roll,pitch,yaw,h_bar0,gt_x,gt_y,gt_z,gt_roll,gt_pitch,gt_yaw

using seconds, watts for the received powers, Gs for accelerations, degrees
for angles and meters for distances. Internally everything is SI + radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

GRAVITY = 9.81  # m/s^2

RngLike = Union[int, None, np.random.Generator]


def _rng_of(rng_seed: RngLike) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


class LogParseError(ValueError):
    """Malformed sensor-log CSV; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Pose:
    """6-DoF receiver state: position plus roll/pitch/yaw, radians."""

    position: np.ndarray
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "position", p)
        half_pi = math.pi / 2.0
        if not (-half_pi < self.roll < half_pi and -half_pi < self.pitch < half_pi):
            raise ValueError("roll and pitch must lie in (-pi/2, pi/2) for valid flight")


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped sensor record.

    ``rss`` is ordered like the testbed luminaire list; ``accel`` is in Gs,
    ``orientation`` is (roll, pitch, yaw) in radians.
    """

    timestamp: float
    rss: np.ndarray
    accel: np.ndarray
    orientation: Tuple[float, float, float]
    baro_altitude: float
    ground_truth: Optional[Pose] = None

    def __post_init__(self):
        rss = np.asarray(self.rss, dtype=float)
        if np.any(rss < 0.0):
            raise ValueError("rss values must be >= 0")
        object.__setattr__(self, "rss", rss)
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float))

    @property
    def roll(self) -> float:
        return self.orientation[0]

    @property
    def pitch(self) -> float:
        return self.orientation[1]


@dataclass(frozen=True)
class BaroModel:
    """Barometer error model: offset + drift ramp + Gaussian noise, meters."""

    noise_sigma: float = 0.0
    drift_rate: float = 0.0
    initial_offset: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class ImuModel:
    """IMU error model: accelerometer bias/noise in Gs, angle noise in radians."""

    accel_noise_sigma: float = 0.0
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angle_noise_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "accel_bias", np.asarray(self.accel_bias, dtype=float))
        if self.accel_noise_sigma < 0.0 or self.angle_noise_sigma < 0.0:
            raise ValueError("noise sigmas must be >= 0")


def sample_baro(true_altitude: float, t: float, model: BaroModel, rng_seed: RngLike = None) -> float:
    """One barometer reading at time ``t`` (seconds since calibration)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    reading = true_altitude + model.initial_offset + model.drift_rate * t
    if model.noise_sigma > 0.0:
        reading += _rng_of(rng_seed).normal(0.0, model.noise_sigma)
    return reading


def sample_imu(
    true_pose: Pose,
    true_accel: np.ndarray,
    model: ImuModel,
    rng_seed: RngLike = None,
) -> Tuple[np.ndarray, Tuple[float, float, float]]:
    """One IMU reading: (acceleration in Gs, Euler angles in radians).

    ``true_accel`` is the world-frame, gravity-compensated acceleration in
    m/s^2; the vertical channel therefore reads zero in steady hover.
    """
    rng = _rng_of(rng_seed)
    accel_gs = np.asarray(true_accel, dtype=float) / GRAVITY + model.accel_bias
    if model.accel_noise_sigma > 0.0:
        accel_gs = accel_gs + rng.normal(0.0, model.accel_noise_sigma, size=3)
    angles = np.array([true_pose.roll, true_pose.pitch, true_pose.yaw])
    if model.angle_noise_sigma > 0.0:
        angles = angles + rng.normal(0.0, model.angle_noise_sigma, size=3)
    return accel_gs, (float(angles[0]), float(angles[1]), float(angles[2]))


def log_header(n_luminaires: int) -> str:
    pr = ",".join(f"pr{i + 1}" for i in range(n_luminaires))
    return f"t,{pr},ax,ay,az,roll,pitch,yaw,h_bar0,gt_x,gt_y,gt_z,gt_roll,gt_pitch,gt_yaw"


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def write_log(frames: Sequence[SensorFrame], stream: TextIO) -> None:
    """Serialize frames to CSV (degrees for angles, watts for powers)."""
    if not frames:
        raise ValueError("cannot write an empty log")
    n_lum = len(frames[0].rss)
    stream.write(log_header(n_lum) + "\n")
    prev_t = -math.inf
    for frame in frames:
        if frame.timestamp <= prev_t:
            raise ValueError("timestamps must be strictly increasing")
        prev_t = frame.timestamp
        if frame.ground_truth is None:
            raise ValueError("log format requires ground truth in every frame")
        gt = frame.ground_truth
        cells = [_fmt(frame.timestamp)]
        cells += [_fmt(p) for p in frame.rss]
        cells += [_fmt(a) for a in frame.accel]
        cells += [_fmt(math.degrees(a)) for a in frame.orientation]
        cells.append(_fmt(frame.baro_altitude))
        cells += [_fmt(c) for c in gt.position]
        cells += [_fmt(math.degrees(a)) for a in (gt.roll, gt.pitch, gt.yaw)]
        stream.write(",".join(cells) + "\n")


def read_log(stream: TextIO) -> List[SensorFrame]:
    """Parse a sensor-log CSV; raises LogParseError with the offending line."""
    header = stream.readline().strip()
    if not header.startswith("t,pr1,"):
        raise LogParseError(1, "missing or unrecognized log header")
    columns = header.split(",")
    n_lum = sum(1 for c in columns if c.startswith("pr"))
    expected = 1 + n_lum + 3 + 3 + 1 + 3 + 3
    if len(columns) != expected:
        raise LogParseError(1, f"expected {expected} columns, found {len(columns)}")

    frames: List[SensorFrame] = []
    prev_t = -math.inf
    for line_no, line in enumerate(stream, start=2):
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != expected:
            raise LogParseError(line_no, f"expected {expected} cells, found {len(cells)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise LogParseError(line_no, str(exc)) from None
        t = vals[0]
        if t <= prev_t:
            raise LogParseError(line_no, "timestamps must be strictly increasing")
        prev_t = t
        i = 1
        rss = np.array(vals[i : i + n_lum])
        i += n_lum
        accel = np.array(vals[i : i + 3])
        i += 3
        orientation = tuple(math.radians(v) for v in vals[i : i + 3])
        i += 3
        baro = vals[i]
        i += 1
        gt_pos = np.array(vals[i : i + 3])
        i += 3
        gt_ang = [math.radians(v) for v in vals[i : i + 3]]
        try:
            gt = Pose(gt_pos, gt_ang[0], gt_ang[1], gt_ang[2], timestamp=t)
            frames.append(
                SensorFrame(
                    timestamp=t,
                    rss=rss,
                    accel=accel,
                    orientation=orientation,  # type: ignore[arg-type]
                    baro_altitude=baro,
                    ground_truth=gt,
                )
            )
        except ValueError as exc:
            raise LogParseError(line_no, str(exc)) from None
    return frames
