"""Testbed description, 6-DoF trajectory generation and the flight runner.

Trajectories are C2 (piecewise-quintic height/waypoint tracks, ramped
angular rate on circles) so the accelerometer channel is well defined.
Roll/pitch follow the quadrotor small-angle relation: the tilt vector
points along the horizontal acceleration with magnitude
``atan(|a_h| / g)``, capped at the plan's ``max_tilt``; zero horizontal
acceleration means zero tilt.

``run_flight`` produces one SensorFrame per frame-rate tick: noiseless
per-luminaire received powers from the channel model, a fresh one-period
FDMA window synthesized and demodulated per frame for the measured RSS,
and IMU/barometer samples, all deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .beacon import DEFAULT_SAMPLE_RATE, BeaconPlan, measure_rss_batch
from .channel import Luminaire, NoiseModel, Photodiode, batch_received_power
from .sensors import GRAVITY, BaroModel, ImuModel, Pose, SensorFrame


class PlanValidationError(ValueError):
    """Flight plan is inconsistent or leaves the testbed."""


@dataclass(frozen=True)
class Testbed:
    """Anchor layout, receiver optics and receiver noise for one arena."""

    extent: np.ndarray
    luminaires: Tuple[Luminaire, ...]
    photodiode: Photodiode
    noise: NoiseModel = NoiseModel()
    rss_floor: float = 5e-8
    beacon_sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        extent = np.asarray(self.extent, dtype=float)
        if extent.shape != (3,) or np.any(extent <= 0):
            raise ValueError("extent must be a positive 3-vector")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "luminaires", tuple(self.luminaires))
        freqs = [l.beacon_frequency for l in self.luminaires]
        if len(set(freqs)) != len(freqs):
            raise ValueError("beacon frequencies must be unique")
        for lum in self.luminaires:
            if np.any(lum.position < 0) or np.any(lum.position > extent):
                raise ValueError(f"luminaire {lum.id!r} lies outside the testbed extent")

    @property
    def luminaire_ids(self) -> List[str]:
        return [l.id for l in self.luminaires]


def default_testbed(
    noise: Optional[NoiseModel] = None,
    rss_floor: float = 5e-8,
) -> Testbed:
    """The 2 m x 2 m x 2 m desk-scale arena: four 4.7 W order-14 spots on the
    floor at 60/120/240/480 Hz, one 5.2 mm^2 photodiode with a 160 deg FoV."""
    lums = (
        Luminaire("tx1", (0.25, 1.0, 0.0), 4.7, 14.0, 60.0),
        Luminaire("tx2", (1.0, 1.75, 0.0), 4.7, 14.0, 120.0),
        Luminaire("tx3", (1.75, 1.0, 0.0), 4.7, 14.0, 240.0),
        Luminaire("tx4", (1.0, 0.25, 0.0), 4.7, 14.0, 480.0),
    )
    pd = Photodiode(area=5.2e-6, fov_half_angle=math.radians(160.0))
    if noise is None:
        noise = NoiseModel(gaussian_sigma=1e-7, ambient_dc=5e-6)
    return Testbed(
        extent=np.array([2.0, 2.0, 2.0]),
        luminaires=lums,
        photodiode=pd,
        noise=noise,
        rss_floor=rss_floor,
    )


@dataclass(frozen=True)
class FlightPlan:
    """One parameterized flight.

    ``kind`` is one of ``hover``, ``lift_land``, ``circle`` or ``waypoint``.
    ``height_profile`` bounds the cruise band; circles climb through
    ``height_knots`` (quintic between knots) while orbiting at ``laps``
    signed revolutions. Waypoint plans fly rest-to-rest quintic legs
    through ``waypoints`` with leg times proportional to leg length.
    """

    kind: str = "circle"
    radius: float = 0.5
    center: Tuple[float, float] = (1.0, 1.0)
    height_profile: Tuple[float, float] = (0.2, 1.8)
    duration: float = 40.0
    max_tilt: float = math.radians(7.0)
    frame_rate: float = 50.0
    laps: float = 2.0
    start_angle: float = 0.0
    ramp_time: float = 2.0
    ascend_time: float = 3.0
    descend_time: float = 3.0
    slide_time: float = 2.0
    ground_z: float = 0.05
    hover_height: Optional[float] = None
    height_knots: Optional[Tuple[float, ...]] = None
    waypoints: Optional[Tuple[Tuple[float, float, float], ...]] = None
    yaw: float = 0.0

    def __post_init__(self):
        if self.kind not in ("hover", "lift_land", "circle", "waypoint"):
            raise PlanValidationError(f"unknown plan kind {self.kind!r}")
        if not 0.0 < self.max_tilt < math.pi / 2:
            raise PlanValidationError("max_tilt must be in (0, pi/2)")
        if self.duration <= 0 or self.frame_rate <= 0:
            raise PlanValidationError("duration and frame_rate must be > 0")
        lo, hi = self.height_profile
        if not hi >= lo > 0:
            raise PlanValidationError("height_profile must be an increasing positive range")
        if self.kind == "circle":
            route = (
                self.duration
                - self.ascend_time
                - self.descend_time
                - 2.0 * self.slide_time
            )
            if route <= 2.0 * self.ramp_time:
                raise PlanValidationError("circle duration too short for ramps and route")
            if self.laps == 0:
                raise PlanValidationError("circle plan needs a non-zero lap count")
        if self.kind == "waypoint" and (self.waypoints is None or len(self.waypoints) < 2):
            raise PlanValidationError("waypoint plan needs >= 2 waypoints")


@dataclass(frozen=True)
class Trajectory:
    """Sampled ground truth: positions, derivatives and attitude."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    rolls: np.ndarray
    pitches: np.ndarray
    yaws: np.ndarray

    def poses(self) -> List[Pose]:
        return [
            Pose(self.positions[i], self.rolls[i], self.pitches[i], self.yaws[i], self.times[i])
            for i in range(len(self.times))
        ]

    def __len__(self) -> int:
        return len(self.times)


def _smoothstep5(s: np.ndarray):
    """Quintic smoothstep and derivatives; value/slope/curvature all vanish
    at both ends, which is what makes piecewise tracks C2."""
    v = ((6.0 * s - 15.0) * s + 10.0) * s**3
    d1 = ((30.0 * s - 60.0) * s + 30.0) * s**2
    d2 = ((120.0 * s - 180.0) * s + 60.0) * s
    return v, d1, d2


def _keyframe_track(t: np.ndarray, knot_times: Sequence[float], knot_values: Sequence[float]):
    """Piecewise-quintic interpolation through (time, value) knots, at rest
    (zero first/second derivative) at every knot. Returns (value, d1, d2)."""
    val = np.full_like(t, float(knot_values[0]))
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    for (t0, v0), (t1, v1) in zip(
        zip(knot_times[:-1], knot_values[:-1]), zip(knot_times[1:], knot_values[1:])
    ):
        span = t1 - t0
        if span <= 0:
            raise PlanValidationError("keyframe times must be strictly increasing")
        inside = (t >= t0) & (t < t1)
        after = t >= t1
        s = (t[inside] - t0) / span
        sv, sd1, sd2 = _smoothstep5(s)
        dv = v1 - v0
        val[inside] = v0 + dv * sv
        d1[inside] = dv * sd1 / span
        d2[inside] = dv * sd2 / span**2
        val[after] = v1
        d1[after] = 0.0
        d2[after] = 0.0
    return val, d1, d2


def _circle_angle_track(tau: np.ndarray, total_angle: float, route_time: float, ramp_time: float):
    """Ramped angular profile: cubic-smoothstep rate ramps at both ends and a
    constant rate in between; returns (phi, phi_dot, phi_ddot)."""
    omega = total_angle / (route_time - ramp_time)
    phi = np.zeros_like(tau)
    d1 = np.zeros_like(tau)
    d2 = np.zeros_like(tau)

    a = tau < ramp_time
    s = tau[a] / ramp_time
    phi[a] = omega * ramp_time * (s**3 - 0.5 * s**4)
    d1[a] = omega * (3.0 * s**2 - 2.0 * s**3)
    d2[a] = omega * (6.0 * s - 6.0 * s**2) / ramp_time

    b = (tau >= ramp_time) & (tau <= route_time - ramp_time)
    phi[b] = omega * ramp_time / 2.0 + omega * (tau[b] - ramp_time)
    d1[b] = omega
    d2[b] = 0.0

    c = tau > route_time - ramp_time
    u = (route_time - tau[c]) / ramp_time
    phi[c] = total_angle - omega * ramp_time * (u**3 - 0.5 * u**4)
    d1[c] = omega * (3.0 * u**2 - 2.0 * u**3)
    d2[c] = -omega * (6.0 * u - 6.0 * u**2) / ramp_time
    return phi, d1, d2


def _tilt_from_accel(acc: np.ndarray, max_tilt: float):
    """Quadrotor small-angle attitude: tilt along the horizontal
    acceleration, magnitude atan(|a_h|/g) capped at max_tilt."""
    a_h = np.hypot(acc[:, 0], acc[:, 1])
    tilt = np.minimum(np.arctan(a_h / GRAVITY), max_tilt)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(a_h > 0.0, acc[:, 0] / a_h, 0.0)
        uy = np.where(a_h > 0.0, acc[:, 1] / a_h, 0.0)
    pitch = tilt * ux
    roll = tilt * uy
    return roll, pitch


def generate_trajectory(plan: FlightPlan, extent: Optional[np.ndarray] = None) -> Trajectory:
    """Sample the plan at its frame rate; validates against ``extent`` if given."""
    n = int(round(plan.duration * plan.frame_rate))
    if n < 2:
        raise PlanValidationError("plan too short for its frame rate")
    t = np.arange(n) / plan.frame_rate
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    cx, cy = plan.center
    h_lo, h_hi = plan.height_profile

    if plan.kind == "hover":
        hover_h = plan.hover_height if plan.hover_height is not None else 0.5 * (h_lo + h_hi)
        pos[:, 0] = cx
        pos[:, 1] = cy
        pos[:, 2] = hover_h

    elif plan.kind == "lift_land":
        top = plan.hover_height if plan.hover_height is not None else h_hi
        t_up = plan.ascend_time
        t_down = plan.duration - plan.descend_time
        if not t_up < t_down:
            raise PlanValidationError("lift_land duration too short for ramps")
        z, dz, ddz = _keyframe_track(
            t,
            [0.0, t_up, t_down, plan.duration],
            [plan.ground_z, top, top, plan.ground_z],
        )
        pos[:, 0] = cx
        pos[:, 1] = cy
        pos[:, 2] = z
        vel[:, 2] = dz
        acc[:, 2] = ddz

    elif plan.kind == "circle":
        # Phases: ascend at the center pad, slide out to the circle, fly the
        # laps with the height-knot profile, slide back, descend.
        t_r0 = plan.ascend_time + plan.slide_time
        t_r1 = plan.duration - plan.descend_time - plan.slide_time
        route_time = t_r1 - t_r0
        knots = plan.height_knots if plan.height_knots is not None else (h_lo, h_hi)
        n_k = len(knots)
        route_knot_times = [t_r0 + route_time * i / max(n_k - 1, 1) for i in range(n_k)]
        z, dz, ddz = _keyframe_track(
            t,
            [0.0, plan.ascend_time] + route_knot_times + [t_r1 + plan.slide_time, plan.duration],
            [plan.ground_z, knots[0]] + list(knots) + [knots[-1], plan.ground_z],
        )
        pos[:, 2] = z
        vel[:, 2] = dz
        acc[:, 2] = ddz

        total_angle = 2.0 * math.pi * plan.laps
        tau = np.clip(t - t_r0, 0.0, route_time)
        phi, dphi, ddphi = _circle_angle_track(tau, total_angle, route_time, plan.ramp_time)
        ang = plan.start_angle + phi
        cos_a = np.cos(ang)
        sin_a = np.sin(ang)
        r = plan.radius
        circ_px = cx + r * cos_a
        circ_py = cy + r * sin_a

        p_start = (cx + r * math.cos(plan.start_angle), cy + r * math.sin(plan.start_angle))
        end_angle = plan.start_angle + total_angle
        p_end = (cx + r * math.cos(end_angle), cy + r * math.sin(end_angle))
        on_route = (t >= t_r0) & (t <= t_r1)
        pre = t < t_r0
        post = t > t_r1
        for axis, (c0, s0, s1) in enumerate(
            [(cx, p_start[0], p_end[0]), (cy, p_start[1], p_end[1])]
        ):
            out_v, out_d1, out_d2 = _keyframe_track(
                t, [plan.ascend_time, t_r0], [c0, s0]
            )
            back_v, back_d1, back_d2 = _keyframe_track(
                t, [t_r1, t_r1 + plan.slide_time], [s1, c0]
            )
            pos[pre, axis] = out_v[pre]
            vel[pre, axis] = out_d1[pre]
            acc[pre, axis] = out_d2[pre]
            pos[post, axis] = back_v[post]
            vel[post, axis] = back_d1[post]
            acc[post, axis] = back_d2[post]
        pos[on_route, 0] = circ_px[on_route]
        pos[on_route, 1] = circ_py[on_route]
        vel[on_route, 0] = (-r * sin_a * dphi)[on_route]
        vel[on_route, 1] = (r * cos_a * dphi)[on_route]
        acc[on_route, 0] = (-r * cos_a * dphi**2 - r * sin_a * ddphi)[on_route]
        acc[on_route, 1] = (-r * sin_a * dphi**2 + r * cos_a * ddphi)[on_route]

    else:  # waypoint
        wps = np.asarray(plan.waypoints, dtype=float)
        legs = np.linalg.norm(np.diff(wps, axis=0), axis=1)
        weights = np.maximum(legs, 1e-3)
        times = np.concatenate([[0.0], np.cumsum(weights / weights.sum() * plan.duration)])
        times[-1] = plan.duration
        for axis in range(3):
            v, d1, d2 = _keyframe_track(t, times, wps[:, axis])
            pos[:, axis] = v
            vel[:, axis] = d1
            acc[:, axis] = d2

    roll, pitch = _tilt_from_accel(acc, plan.max_tilt)
    yaw = np.full(n, plan.yaw)

    if extent is not None:
        extent = np.asarray(extent, dtype=float)
        if np.any(pos < -1e-9) or np.any(pos > extent + 1e-9):
            raise PlanValidationError("trajectory leaves the testbed extent")
    return Trajectory(t, pos, vel, acc, roll, pitch, yaw)


def run_flight(
    testbed: Testbed,
    plan: FlightPlan,
    baro_model: Optional[BaroModel] = None,
    imu_model: Optional[ImuModel] = None,
    rng_seed=None,
) -> List[SensorFrame]:
    """Simulate one flight into a SensorFrame log.

    Per frame: noiseless channel powers -> one fresh FDMA analysis window
    (synthesized with receiver noise, FFT-demodulated) -> measured RSS,
    plus IMU and barometer samples. ``None`` sensor models mean ideal
    sensors. Deterministic for a fixed seed.
    """
    baro_model = baro_model or BaroModel()
    imu_model = imu_model or ImuModel()
    traj = generate_trajectory(plan, extent=testbed.extent)
    n = len(traj)

    seeds = np.random.SeedSequence(rng_seed).spawn(3)
    rng_wave = np.random.default_rng(seeds[0])
    rng_baro = np.random.default_rng(seeds[1])
    rng_imu = np.random.default_rng(seeds[2])

    true_powers = batch_received_power(
        testbed.luminaires, traj.positions, traj.rolls, traj.pitches, testbed.photodiode
    )
    plan_fdma = BeaconPlan.from_luminaires(testbed.luminaires)
    measured = measure_rss_batch(
        true_powers,
        plan_fdma,
        testbed.luminaire_ids,
        sample_rate=testbed.beacon_sample_rate,
        noise=testbed.noise,
        rng_seed=rng_wave,
    )

    baro = traj.positions[:, 2] + baro_model.initial_offset + baro_model.drift_rate * traj.times
    if baro_model.noise_sigma > 0.0:
        baro = baro + rng_baro.normal(0.0, baro_model.noise_sigma, size=n)

    accel_gs = traj.accelerations / GRAVITY + imu_model.accel_bias
    if imu_model.accel_noise_sigma > 0.0:
        accel_gs = accel_gs + rng_imu.normal(0.0, imu_model.accel_noise_sigma, size=(n, 3))
    angles = np.column_stack([traj.rolls, traj.pitches, traj.yaws])
    if imu_model.angle_noise_sigma > 0.0:
        angles = angles + rng_imu.normal(0.0, imu_model.angle_noise_sigma, size=(n, 3))

    frames = []
    for i in range(n):
        gt = Pose(
            traj.positions[i], traj.rolls[i], traj.pitches[i], traj.yaws[i], traj.times[i]
        )
        frames.append(
            SensorFrame(
                timestamp=traj.times[i],
                rss=measured[i],
                accel=accel_gs[i],
                orientation=(angles[i, 0], angles[i, 1], angles[i, 2]),
                baro_altitude=baro[i],
                ground_truth=gt,
            )
        )
    return frames


def default_flight_plans() -> dict:
    """The eight-flight battery: circular routes with direction changes and
    height sweeps over the cruise band, one waypoint tour, one lift-and-land.

    Lap times sit mostly in the 4.3-6.8 s range, giving steady tilts of
    roughly 2.5-6 degrees; the drift-correction gate then opens mainly
    around the rate ramps, as on a real flight."""
    plans = {
        "circle_a": FlightPlan(
            kind="circle", duration=36.0, laps=5.0, height_knots=(1.1, 1.65, 0.95), start_angle=0.0
        ),
        "circle_b": FlightPlan(
            kind="circle", duration=36.0, laps=-5.0, height_knots=(1.0, 1.7, 1.2), start_angle=1.7
        ),
        "circle_c": FlightPlan(
            kind="circle", duration=32.0, laps=5.0, height_knots=(1.3, 0.95, 1.75), start_angle=3.1
        ),
        "circle_d": FlightPlan(
            kind="circle", duration=40.0, laps=-5.0, height_knots=(1.05, 1.55, 0.95, 1.65), start_angle=4.4
        ),
        "circle_e": FlightPlan(
            kind="circle", duration=30.0, laps=4.5, height_knots=(1.25, 1.8, 1.0), start_angle=0.9
        ),
        "circle_f": FlightPlan(
            kind="circle", duration=34.0, laps=5.5, height_knots=(0.95, 1.75, 1.1), start_angle=5.5
        ),
        "helix_up": FlightPlan(
            kind="circle", duration=38.0, laps=5.0, height_knots=(0.9, 1.8), start_angle=2.2
        ),
        "square_tour": FlightPlan(
            kind="waypoint",
            duration=26.0,
            waypoints=(
                (1.0, 1.0, 0.05),
                (1.0, 1.0, 1.2),
                (1.45, 1.35, 1.5),
                (0.6, 1.4, 1.7),
                (0.65, 0.65, 1.0),
                (1.4, 0.6, 1.6),
                (1.0, 1.0, 1.1),
                (1.0, 1.0, 0.05),
            ),
        ),
    }
    return plans
