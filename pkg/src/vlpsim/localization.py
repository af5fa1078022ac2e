"""Position solvers: RSS-to-distance inversion and three 3D methods.

All methods share the same RSS front end. Under the parallel assumption
(receiver facing straight down at ground-mounted, up-facing transmitters)
the irradiance and incidence angles collapse to ``h/d`` and the received
power inverts in closed form to a distance:

    d_parallel = [P_t * A_r * (m+1) * h**(m+1) / (2*pi * P_r)] ** (1/(m+3))

With tilt, the incidence angle reconstructed from the receiver's roll and
pitch (and a provisional position) feeds the tilt-aware inversion:

    d_tilted = sqrt(P_t * A_r * (m+1) * cos(psi)**m * cos(theta) / (2*pi * P_r))

2D position always comes from linearized difference-of-circles least
squares over >= 3 anchors.

Three solvers are provided:

* ``solve_firefly``    -- two-pass trilateration at an externally supplied
                          height (sensor fusion), tilt-corrected in pass 2;
* ``solve_indirect_h`` -- height sweep: assume many candidate heights, pick
                          the one whose trilateration is most self-consistent;
* ``solve_pso_3d``     -- global-best particle swarm fitting (x, y, z) to the
                          measured powers under the parallel assumption.

Every solver reports how many model evaluations it spent (closed-form
inversions and trilaterations, or cost-function calls), which is the basis
of the complexity comparison between methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np

from ._backend import kernels as _kernels
from .channel import Luminaire
from .sensors import Pose, SensorFrame

if TYPE_CHECKING:
    from .sim import Testbed

TWO_PI = 2.0 * math.pi

# Measured RSS at or below this level is treated as noise floor and the
# anchor is dropped (solvers still require >= 3 usable anchors).
DEFAULT_RSS_FLOOR = 5e-8


class GeometryError(RuntimeError):
    """Unusable solve geometry: too few anchors, collinear anchors, or an
    anchor behind the emitter / outside the field of view."""


class InvalidRssError(ValueError):
    """RSS is non-positive (at or below the noise floor)."""


@dataclass(frozen=True)
class DistanceEstimate:
    """Per-anchor range estimates from one RSS sample."""

    luminaire_id: str
    d_parallel: float
    d_tilted: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.d_parallel) and self.d_parallel > 0.0):
            raise ValueError("d_parallel must be positive and finite")
        if self.d_tilted is not None and not (math.isfinite(self.d_tilted) and self.d_tilted > 0.0):
            raise ValueError("d_tilted must be positive and finite when present")


@dataclass(frozen=True)
class PositionEstimate:
    """Solver output: position, producing method, cost and evaluation count."""

    position: np.ndarray
    method: str
    residual: float
    evaluations: int
    timestamp: Optional[float] = None

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "position", p)
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")


@dataclass(frozen=True)
class PsoConfig:
    """Particle-swarm settings; ``search_bounds`` is a (3, 2) lo/hi box in
    meters and defaults to the testbed extent when left as None."""

    swarm_size: int = 200
    iterations: int = 20
    search_bounds: Optional[np.ndarray] = None
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.search_bounds is not None:
            b = np.asarray(self.search_bounds, dtype=float)
            if b.shape != (3, 2) or np.any(b[:, 1] <= b[:, 0]):
                raise ValueError("search_bounds must be a non-degenerate (3, 2) lo/hi box")
            object.__setattr__(self, "search_bounds", b)


@dataclass(frozen=True)
class IndirectHConfig:
    """Height-sweep settings; ``height_range`` defaults to the testbed's
    vertical extent when left as None."""

    height_range: Optional[Tuple[float, float]] = None
    resolution: float = 1e-3
    fast_search: bool = True

    def __post_init__(self):
        if not self.resolution > 0.0:
            raise ValueError("resolution must be > 0")
        if self.height_range is not None:
            lo, hi = self.height_range
            if not hi > lo:
                raise ValueError("height_range must be non-empty")


def distance_parallel(p_r: float, p_t: float, a_r: float, m: float, h: float) -> float:
    """Invert received power to distance under the parallel assumption.

    Args:
        p_r: Measured received power, watts (> 0).
        p_t: Transmit power, watts.
        a_r: Photodiode area, m^2.
        m: Lambertian order (>= 1).
        h: Vertical offset between receiver and transmitter, meters (> 0).
    """
    if p_r <= 0.0:
        raise InvalidRssError(f"received power must be > 0, got {p_r}")
    if h <= 0.0:
        raise ValueError("height above the transmitter must be > 0")
    if m < 1.0:
        raise ValueError("lambertian order must be >= 1")
    return (p_t * a_r * (m + 1.0) * h ** (m + 1.0) / (TWO_PI * p_r)) ** (1.0 / (m + 3.0))


def incidence_angle(rx: Pose, tx_position: np.ndarray, d_parallel: float) -> float:
    """Incidence angle at a tilted receiver, radians.

    Reconstructed from the receiver position/orientation and the
    parallel-assumption range; the arccos argument is clamped to [-1, 1].
    The vertical term uses ``|z_r - z_i|`` so ground transmitters below the
    receiver always resolve to the front hemisphere.
    """
    if d_parallel <= 0.0:
        raise ValueError("d_parallel must be > 0")
    tx = np.asarray(tx_position, dtype=float)
    sin_b = math.sin(rx.pitch)
    tx_x = (rx.position[0] - tx[0]) * math.cos(rx.roll) * sin_b
    tx_y = (rx.position[1] - tx[1]) * math.sin(rx.roll) * sin_b
    tx_z = abs(rx.position[2] - tx[2]) * math.cos(rx.pitch)
    arg = (tx_x + tx_y + tx_z) / d_parallel
    return math.acos(min(1.0, max(-1.0, arg)))


def distance_tilted(p_r: float, tx: Luminaire, psi: float, theta: float, a_r: float) -> float:
    """Tilt-aware power-to-distance inversion.

    Requires ``cos(psi)**m * cos(theta) > 0``; an anchor behind the emitter
    or outside the receiver field of view has no usable closed form.
    """
    if p_r <= 0.0:
        raise InvalidRssError(f"received power must be > 0, got {p_r}")
    m = tx.lambertian_order
    cos_product = math.cos(psi) ** m * math.cos(theta)
    if cos_product <= 0.0:
        raise GeometryError(
            f"non-positive cosine product for anchor {tx.id!r} (psi={psi:.3f}, theta={theta:.3f})"
        )
    return math.sqrt(tx.transmit_power * a_r * (m + 1.0) * cos_product / (TWO_PI * p_r))


def trilaterate_2d(
    anchors: Sequence[Sequence[float]],
    distances_3d: Sequence[float],
    heights: Union[float, Sequence[float]],
) -> Tuple[float, float]:
    """2D position from >= 3 anchors via difference-of-circles least squares.

    ``heights`` holds the per-anchor vertical offsets used to project the 3D
    ranges onto the anchor plane; negative projected range squares are
    clamped to zero (the anchor then only constrains the fix loosely).
    """
    a = np.asarray(anchors, dtype=float).reshape(-1, 2)
    d = np.asarray(distances_3d, dtype=float)
    h = np.broadcast_to(np.asarray(heights, dtype=float), d.shape)
    if a.shape[0] < 3:
        raise GeometryError(f"need >= 3 anchors, got {a.shape[0]}")
    if a.shape[0] != d.shape[0]:
        raise ValueError("anchors and distances must have matching lengths")
    rho2 = np.maximum(d * d - h * h, 0.0)
    x, y, _, ok = _kernels.trilaterate(np.ascontiguousarray(a), np.ascontiguousarray(rho2))
    if not ok:
        raise GeometryError("rank-deficient anchor geometry (collinear anchors?)")
    return float(x), float(y)


def _solver_inputs(frame: SensorFrame, testbed: "Testbed", rss_floor: Optional[float]):
    """Shared anchor prefilter: keep anchors with usable RSS, uniform m."""
    lums = testbed.luminaires
    if len(frame.rss) != len(lums):
        raise ValueError("frame RSS length does not match testbed luminaires")
    floor = testbed.rss_floor if rss_floor is None else rss_floor
    m = lums[0].lambertian_order
    if any(l.lambertian_order != m for l in lums):
        raise ValueError("solvers require a uniform lambertian order across luminaires")
    anchors = []
    coeffs = []
    powers = []
    for lum, p in zip(lums, frame.rss):
        if p <= floor:
            continue
        anchors.append(lum.position)
        coeffs.append(lum.transmit_power * testbed.photodiode.area * (m + 1.0) / TWO_PI)
        powers.append(p)
    if len(anchors) < 3:
        raise GeometryError(
            f"only {len(anchors)} of {len(lums)} anchors above the RSS floor ({floor:g} W)"
        )
    return (
        np.ascontiguousarray(anchors, dtype=float),
        np.ascontiguousarray(coeffs, dtype=float),
        np.ascontiguousarray(powers, dtype=float),
        m,
    )


def solve_firefly(
    frame: SensorFrame,
    height,
    testbed: "Testbed",
    rss_floor: Optional[float] = None,
) -> PositionEstimate:
    """Two-pass tilt-aware fix at an externally estimated height.

    ``height`` is the fused height estimate (meters), or any object with an
    ``h_fused`` attribute. Pass 1 trilaterates under the parallel
    assumption; pass 2 rebuilds each anchor's incidence angle from the
    provisional fix plus the IMU roll/pitch and trilaterates again with
    tilt-corrected distances. Anchors failing the cosine precondition are
    dropped (>= 3 must survive).
    """
    z_r = float(getattr(height, "h_fused", height))
    anchors, coeffs, powers, m = _solver_inputs(frame, testbed, rss_floor)
    x, y, z, residual, evals, ok = _kernels.firefly_solve(
        anchors, coeffs, powers, m, z_r, frame.roll, frame.pitch
    )
    if not ok:
        raise GeometryError("firefly solve failed (degenerate geometry or dropped anchors)")
    return PositionEstimate(
        position=np.array([x, y, z]),
        method="firefly",
        residual=float(residual),
        evaluations=int(evals),
        timestamp=frame.timestamp,
    )


def solve_indirect_h(
    frame: SensorFrame,
    cfg: IndirectHConfig,
    testbed: "Testbed",
    rss_floor: Optional[float] = None,
) -> PositionEstimate:
    """Height-sweep baseline: 2D+H with RSS-implied height.

    Every candidate height is scored by how well the trilaterated fix
    agrees with the RSS-implied ranges; the argmin height wins. The fast
    path brackets the minimum on a coarse grid and refines it with
    golden-section search down to ``cfg.resolution``.
    """
    anchors, coeffs, powers, m = _solver_inputs(frame, testbed, rss_floor)
    if cfg.height_range is not None:
        h_lo, h_hi = cfg.height_range
    else:
        h_lo, h_hi = 0.0, float(testbed.extent[2])
    x, y, z, cost, evals, ok = _kernels.indirect_h_solve(
        anchors, coeffs, powers, m, float(h_lo), float(h_hi), cfg.resolution, int(cfg.fast_search)
    )
    if not ok:
        raise GeometryError("indirect-H solve failed (rank-deficient anchor geometry)")
    return PositionEstimate(
        position=np.array([x, y, z]),
        method="indirect_h",
        residual=float(cost),
        evaluations=int(evals),
        timestamp=frame.timestamp,
    )


def solve_pso_3d(
    frame: SensorFrame,
    cfg: PsoConfig,
    testbed: "Testbed",
    rng_seed=None,
    rss_floor: Optional[float] = None,
) -> PositionEstimate:
    """Particle-swarm baseline fitting (x, y, z) to the measured powers.

    Deterministic for a fixed seed; always returns the best position found
    after ``swarm_size * iterations`` cost evaluations.
    """
    anchors, coeffs, powers, m = _solver_inputs(frame, testbed, rss_floor)
    if cfg.search_bounds is not None:
        bounds = np.asarray(cfg.search_bounds, dtype=float)
    else:
        bounds = np.column_stack([np.zeros(3), np.asarray(testbed.extent, dtype=float)])
    rng = np.random.default_rng(rng_seed)
    u_init = rng.random((cfg.swarm_size, 3))
    u_steps = rng.random((cfg.iterations - 1, cfg.swarm_size, 6))
    x, y, z, cost, evals = _kernels.pso_solve(
        anchors,
        coeffs,
        powers,
        m,
        np.ascontiguousarray(bounds[:, 0]),
        np.ascontiguousarray(bounds[:, 1]),
        u_init,
        u_steps,
        cfg.inertia,
        cfg.cognitive,
        cfg.social,
    )
    return PositionEstimate(
        position=np.array([x, y, z]),
        method="pso_3d",
        residual=float(cost),
        evaluations=int(evals),
        timestamp=frame.timestamp,
    )


def distance_estimates(
    frame: SensorFrame,
    testbed: "Testbed",
    z_r: float,
    position_hint: Optional[Sequence[float]] = None,
    rss_floor: Optional[float] = None,
) -> List[DistanceEstimate]:
    """Per-anchor diagnostic ranges built from the public closed forms.

    ``d_tilted`` is filled in only when a position hint is available to
    reconstruct the incidence angle (anchors failing the cosine
    precondition keep ``d_tilted=None``).
    """
    floor = testbed.rss_floor if rss_floor is None else rss_floor
    out: List[DistanceEstimate] = []
    a_r = testbed.photodiode.area
    for lum, p_r in zip(testbed.luminaires, frame.rss):
        if p_r <= floor:
            continue
        h = abs(z_r - lum.position[2])
        if h <= 0.0:
            continue
        d_par = distance_parallel(p_r, lum.transmit_power, a_r, lum.lambertian_order, h)
        d_tilt = None
        if position_hint is not None:
            pos = np.array([position_hint[0], position_hint[1], z_r])
            rx = Pose(pos, roll=frame.roll, pitch=frame.pitch)
            theta = incidence_angle(rx, lum.position, d_par)
            psi = math.acos(min(1.0, h / d_par))
            # Same tilt correction the two-pass solver applies: scale the
            # parallel range by the (m+3)-root of cos(theta)/cos(psi).
            ratio = math.cos(theta) / math.cos(psi)
            if ratio > 0.0:
                d_tilt = d_par * ratio ** (1.0 / (lum.lambertian_order + 3.0))
        out.append(DistanceEstimate(lum.id, d_par, d_tilt))
    return out
