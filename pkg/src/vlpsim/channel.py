"""Forward model of the LED-to-photodiode optical wireless link.

The link budget has three parts:

* emission    -- generalized Lambertian beam, ``(m+1)/(2*pi) * cos(psi)**m``,
                 where ``psi`` is measured from the emitter surface normal and
                 the order ``m`` sets the beam width (large m = spotlight);
* channel     -- line-of-sight DC gain ``R_t(psi) * A_r * cos(theta) / d**2``,
                 zero outside the receiver field of view ``theta > fov``;
* reception   -- optical gain ``g_r(theta)`` of the photodiode plus additive
                 noise (zero-mean Gaussian) and a constant ambient term.

All angles are radians and all powers are watts. Emission is restricted to
the forward hemisphere: ``psi >= pi/2`` radiates nothing, and a ray arriving
from behind the sensing surface (``cos(theta) < 0``) is never collected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .sensors import Pose

_UP = (0.0, 0.0, 1.0)


def _as_vec3(value) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Luminaire:
    """One fixed LED anchor.

    Args:
        id: Beacon identifier used to key RSS maps and frequency plans.
        position: Anchor position in meters.
        transmit_power: Optical transmit power in watts.
        lambertian_order: Beam-shape exponent, >= 1.
        beacon_frequency: On-off keying frequency in hertz.
        normal: Emitter surface normal; defaults to world-up (floor-mounted
            fixture shining at the ceiling).
    """

    id: str
    position: np.ndarray
    transmit_power: float
    lambertian_order: float
    beacon_frequency: float
    normal: np.ndarray = field(default_factory=lambda: np.array(_UP))

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        n = _as_vec3(self.normal)
        norm = float(np.linalg.norm(n))
        if norm <= 0.0:
            raise ValueError("luminaire normal must be non-zero")
        object.__setattr__(self, "normal", n / norm)
        if not self.transmit_power > 0.0:
            raise ValueError("transmit_power must be > 0")
        if not self.lambertian_order >= 1.0:
            raise ValueError("lambertian_order must be >= 1")
        if not self.beacon_frequency > 0.0:
            raise ValueError("beacon_frequency must be > 0")


@dataclass(frozen=True)
class Photodiode:
    """Receiver optics: sensing area, field of view and optical gain.

    ``gain_profile`` maps incidence angle (radians) to a dimensionless gain;
    ``None`` means unit gain everywhere, which is the right default when the
    sensor datasheet gives no curve (a constant cancels out of distance
    ratios anyway).
    """

    area: float
    fov_half_angle: float
    gain_profile: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not self.area > 0.0:
            raise ValueError("photodiode area must be > 0")
        if not 0.0 < self.fov_half_angle <= math.pi:
            raise ValueError("fov_half_angle must be in (0, pi]")

    def gain(self, theta: float) -> float:
        """Optical gain at incidence angle ``theta`` (>= 0 by contract)."""
        if self.gain_profile is None:
            return 1.0
        g = float(self.gain_profile(theta))
        if g < 0.0:
            raise ValueError(f"gain_profile({theta}) returned negative gain")
        return g


def tabulated_gain(angles_rad: Sequence[float], gains: Sequence[float]) -> Callable[[float], float]:
    """Build a lookup-table gain profile, linearly interpolated between knots."""
    a = np.asarray(angles_rad, dtype=float)
    g = np.asarray(gains, dtype=float)
    if a.ndim != 1 or a.shape != g.shape or a.size < 2:
        raise ValueError("need matching 1-D angle/gain tables with >= 2 entries")
    if np.any(np.diff(a) <= 0):
        raise ValueError("angle knots must be strictly increasing")
    if np.any(g < 0):
        raise ValueError("gains must be non-negative")
    return lambda theta: float(np.interp(theta, a, g))


@dataclass(frozen=True)
class ChannelGeometry:
    """Line-of-sight geometry between one luminaire and the receiver."""

    distance: float
    irradiance_angle: float
    incidence_angle: float

    def __post_init__(self):
        if not self.distance > 0.0:
            raise ValueError("distance must be > 0")
        for name in ("irradiance_angle", "incidence_angle"):
            angle = getattr(self, name)
            if not 0.0 <= angle <= math.pi:
                raise ValueError(f"{name} must be in [0, pi], got {angle}")


@dataclass(frozen=True)
class NoiseModel:
    """Additive receiver noise: zero-mean Gaussian plus a constant ambient term.

    ``gaussian_sigma`` lumps shot and thermal noise into a single standard
    deviation (watts-equivalent at the photocurrent); ``ambient_dc`` is the
    constant background-light component.
    """

    gaussian_sigma: float = 0.0
    ambient_dc: float = 0.0

    def __post_init__(self):
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be >= 0")
        if self.ambient_dc < 0.0:
            raise ValueError("ambient_dc must be >= 0")


def lambertian_radiant_intensity(psi: float, m: float) -> float:
    """Normalized radiant intensity of a generalized Lambertian emitter.

    Args:
        psi: Angle from the emitter surface normal, radians.
        m: Lambertian order, >= 1.

    Returns:
        ``(m+1)/(2*pi) * cos(psi)**m`` per steradian, or 0 for
        ``psi >= pi/2`` (no emission into the back hemisphere).
    """
    if not m >= 1.0:
        raise ValueError(f"lambertian order must be >= 1, got {m}")
    if not math.isfinite(psi):
        raise ValueError("irradiance angle must be finite")
    if psi >= math.pi / 2.0:
        return 0.0
    return (m + 1.0) / (2.0 * math.pi) * math.cos(psi) ** m


def channel_gain(geometry: ChannelGeometry, pd: Photodiode, m: float) -> float:
    """DC channel gain for a line-of-sight link.

    Zero when the incidence angle falls outside the receiver field of view,
    or when the ray arrives from behind the sensing plane.
    """
    theta = geometry.incidence_angle
    if theta > pd.fov_half_angle:
        return 0.0
    cos_theta = math.cos(theta)
    if cos_theta < 0.0:
        return 0.0
    rt = lambertian_radiant_intensity(geometry.irradiance_angle, m)
    return rt * pd.area * cos_theta / geometry.distance**2


def receiver_cos_incidence(offset: np.ndarray, roll: float, pitch: float) -> float:
    """Cosine of the incidence angle at a tilted, down-facing receiver.

    ``offset`` is the vector from the transmitter to the receiver. The
    receiver normal is parametrized by the roll/pitch pair reported by the
    flight stack; with zero tilt this reduces to ``|dz| / d``. The vertical
    term uses ``|dz|`` so that ground transmitters below the receiver always
    land in the front hemisphere.
    """
    sin_b = math.sin(pitch)
    num = (
        offset[0] * math.cos(roll) * sin_b
        + offset[1] * math.sin(roll) * sin_b
        + abs(offset[2]) * math.cos(pitch)
    )
    d = float(np.linalg.norm(offset))
    if d <= 0.0:
        raise ValueError("transmitter and receiver are co-located")
    return min(1.0, max(-1.0, num / d))


def link_geometry(tx: Luminaire, rx_pose: Pose) -> ChannelGeometry:
    """Geometry of the link from a luminaire to a (possibly tilted) receiver."""
    offset = rx_pose.position - tx.position
    d = float(np.linalg.norm(offset))
    if d <= 0.0:
        raise ValueError("transmitter and receiver are co-located")
    cos_psi = min(1.0, max(-1.0, float(np.dot(offset, tx.normal)) / d))
    cos_theta = receiver_cos_incidence(offset, rx_pose.roll, rx_pose.pitch)
    return ChannelGeometry(
        distance=d,
        irradiance_angle=math.acos(cos_psi),
        incidence_angle=math.acos(cos_theta),
    )


def received_power(
    tx: Luminaire,
    rx_pose: Pose,
    pd: Photodiode,
    noise: Optional[NoiseModel] = None,
    rng_seed=None,
) -> float:
    """Received optical power at the photodiode, in watts.

    Deterministic for a fixed ``rng_seed``; pass ``noise=None`` (or a
    zero-sigma model) for the noiseless forward model. ``rng_seed`` accepts
    anything ``numpy.random.default_rng`` does, including a ``Generator``.
    """
    geometry = link_geometry(tx, rx_pose)
    p = tx.transmit_power * channel_gain(geometry, pd, tx.lambertian_order)
    p *= pd.gain(geometry.incidence_angle)
    if noise is not None:
        p += noise.ambient_dc
        if noise.gaussian_sigma > 0.0:
            rng = np.random.default_rng(rng_seed)
            p += rng.normal(0.0, noise.gaussian_sigma)
    return p


def batch_received_power(
    luminaires: Sequence[Luminaire],
    positions: np.ndarray,
    rolls: np.ndarray,
    pitches: np.ndarray,
    pd: Photodiode,
) -> np.ndarray:
    """Noiseless received power for many poses at once.

    Args:
        luminaires: Anchors, one output column each.
        positions: Receiver positions, shape (n, 3).
        rolls / pitches: Receiver tilt angles, shape (n,).
        pd: Receiver optics (constant-gain profiles only take the fast path;
            a custom ``gain_profile`` is applied per element).

    Returns:
        Array of shape (n, len(luminaires)) in watts.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    out = np.zeros((n, len(luminaires)))
    sin_b = np.sin(pitches)
    cos_b = np.cos(pitches)
    cos_g = np.cos(rolls)
    sin_g = np.sin(rolls)
    for j, tx in enumerate(luminaires):
        offset = positions - tx.position
        d = np.linalg.norm(offset, axis=1)
        if np.any(d <= 0.0):
            raise ValueError("transmitter and receiver are co-located")
        cos_psi = np.clip(offset @ tx.normal / d, -1.0, 1.0)
        cos_theta = np.clip(
            (offset[:, 0] * cos_g * sin_b + offset[:, 1] * sin_g * sin_b + np.abs(offset[:, 2]) * cos_b) / d,
            -1.0,
            1.0,
        )
        m = tx.lambertian_order
        rt = np.where(cos_psi > 0.0, (m + 1.0) / (2.0 * math.pi) * cos_psi**m, 0.0)
        theta = np.arccos(cos_theta)
        visible = (theta <= pd.fov_half_angle) & (cos_theta >= 0.0)
        gain = rt * pd.area * cos_theta / d**2
        p = tx.transmit_power * gain
        if pd.gain_profile is not None:
            p = p * np.array([pd.gain(t) for t in theta])
        out[:, j] = np.where(visible, p, 0.0)
    return out
