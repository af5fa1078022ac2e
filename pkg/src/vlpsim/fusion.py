"""Direct height estimation: barometer/accelerometer fusion with a
VLP-anchored drift correction.

The filter is a discrete second-order complementary blend over a
(height, vertical velocity) state: the barometer enters through a low-pass
path, the vertical acceleration through a high-pass (double-integration)
path. With gain ``k_f`` the correction gains are ``k1 = 2*k_f`` and
``k2 = k_f**2`` (critically damped), and one update with timestep ``T`` is::

    e  = h_bar - z
    z' = z + T*(v + k1*e) + T^2/2 * (a + k2*e)
    v' = v + T*(a + k2*e)

Constant inputs converge to the barometer value; a barometer step responds
without overshoot beyond ``exp(-2)`` (~13.5 %) of the step.

Because barometers wander slowly from their calibration point, the
corrected barometer channel ``h_bar`` is re-anchored by the RSS height
sweep whenever it can be trusted: on every ``stride_k``-th update, if both
tilt angles are inside the gate, the update blends ``epsilon`` of the
sweep height with ``1 - epsilon`` of the dead-reckoned barometer value.
A small ``epsilon`` keeps the short-term output on the barometer while
still pinning the long-term level to the drift-free optical estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, TextIO, Tuple

from .localization import GeometryError
from .sensors import GRAVITY, SensorFrame


@dataclass(frozen=True)
class ComplementaryFilterConfig:
    gain: float = 1.0  # 1/s
    dt: float = 0.02  # s

    def __post_init__(self):
        if not self.gain > 0.0:
            raise ValueError("gain must be > 0")
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")


@dataclass(frozen=True)
class DriftCorrectionConfig:
    epsilon: float = 0.05
    tilt_threshold: float = math.radians(3.0)
    stride_k: int = 1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not self.tilt_threshold > 0.0:
            raise ValueError("tilt_threshold must be > 0")
        if self.stride_k < 1:
            raise ValueError("stride_k must be >= 1")


@dataclass(frozen=True)
class FilterState:
    height: float
    velocity: float


@dataclass(frozen=True)
class HeightEstimate:
    """One fused-height sample and the intermediate channel values."""

    h_fused: float
    h_vlp: Optional[float]
    h_bar_corrected: float
    delta_baro: float

    def __post_init__(self):
        values = [self.h_fused, self.h_bar_corrected, self.delta_baro]
        if self.h_vlp is not None:
            values.append(self.h_vlp)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("height estimate fields must be finite")


def complementary_update(
    state: FilterState,
    baro_height: float,
    vertical_accel: float,
    cfg: ComplementaryFilterConfig,
) -> FilterState:
    """One filter step; ``vertical_accel`` is gravity-compensated, m/s^2."""
    k1 = 2.0 * cfg.gain
    k2 = cfg.gain * cfg.gain
    t = cfg.dt
    e = baro_height - state.height
    corr = vertical_accel + k2 * e
    z = state.height + t * (state.velocity + k1 * e) + 0.5 * t * t * corr
    v = state.velocity + t * corr
    return FilterState(z, v)


def drift_correct(
    h_vlp: Optional[float],
    delta_baro: float,
    prev_h_bar: float,
    tilt: Tuple[float, float],
    cfg: DriftCorrectionConfig,
    update_index: int = 0,
) -> float:
    """One corrected-barometer update.

    Dead-reckons the barometer delta, and re-anchors toward ``h_vlp`` only
    when (a) it is present, (b) the update lands on a stride boundary and
    (c) both tilt angles are strictly inside the gate.
    """
    if not math.isfinite(prev_h_bar):
        raise ValueError("prev_h_bar must be finite")
    propagated = prev_h_bar + delta_baro
    if h_vlp is None:
        return propagated
    if update_index % cfg.stride_k != 0:
        return propagated
    roll, pitch = tilt
    if max(abs(roll), abs(pitch)) >= cfg.tilt_threshold:
        return propagated
    return cfg.epsilon * h_vlp + (1.0 - cfg.epsilon) * propagated


class HeightEstimator:
    """Streaming per-flight height estimator.

    ``indirect_h_solver`` maps a SensorFrame to an RSS-derived height; it is
    only consulted on gated stride boundaries, and any solver failure simply
    skips that correction. The filter state starts at the first (corrected)
    barometer reading with zero velocity.
    """

    def __init__(
        self,
        indirect_h_solver: Optional[Callable[[SensorFrame], float]],
        filter_cfg: Optional[ComplementaryFilterConfig] = None,
        drift_cfg: Optional[DriftCorrectionConfig] = None,
        ceiling: Optional[float] = None,
    ):
        self.solver = indirect_h_solver
        self.filter_cfg = filter_cfg or ComplementaryFilterConfig()
        self.drift_cfg = drift_cfg or DriftCorrectionConfig()
        self.ceiling = ceiling
        self._state: Optional[FilterState] = None
        self._h_bar = 0.0
        self._prev_raw = 0.0
        self._index = 0

    def _query_solver(self, frame: SensorFrame) -> Optional[float]:
        if self.solver is None:
            return None
        if self._index % self.drift_cfg.stride_k != 0:
            return None
        if max(abs(frame.roll), abs(frame.pitch)) >= self.drift_cfg.tilt_threshold:
            return None
        try:
            h = self.solver(frame)
        except (GeometryError, ValueError):
            return None
        if h is None or not math.isfinite(h):
            return None
        return float(h)

    def update(self, frame: SensorFrame) -> HeightEstimate:
        raw = frame.baro_altitude
        h_vlp = self._query_solver(frame)
        if self._state is None:
            delta = 0.0
            self._h_bar = drift_correct(
                h_vlp, delta, raw, (frame.roll, frame.pitch), self.drift_cfg, self._index
            )
            self._state = FilterState(self._h_bar, 0.0)
        else:
            delta = raw - self._prev_raw
            self._h_bar = drift_correct(
                h_vlp, delta, self._h_bar, (frame.roll, frame.pitch), self.drift_cfg, self._index
            )
            a_z = frame.accel[2] * GRAVITY
            self._state = complementary_update(self._state, self._h_bar, a_z, self.filter_cfg)
        self._prev_raw = raw
        self._index += 1
        h_fused = self._state.height
        if self.ceiling is not None:
            h_fused = min(max(h_fused, 0.0), self.ceiling)
        return HeightEstimate(h_fused, h_vlp, self._h_bar, delta)


def estimate_height(
    frames: Iterable[SensorFrame],
    indirect_h_solver: Optional[Callable[[SensorFrame], float]],
    filter_cfg: Optional[ComplementaryFilterConfig] = None,
    drift_cfg: Optional[DriftCorrectionConfig] = None,
    ceiling: Optional[float] = None,
) -> List[HeightEstimate]:
    """Run the full height pipeline over a frame stream."""
    est = HeightEstimator(indirect_h_solver, filter_cfg, drift_cfg, ceiling)
    return [est.update(frame) for frame in frames]


def write_height_trace(
    estimates: Sequence[HeightEstimate],
    frames: Sequence[SensorFrame],
    stream: TextIO,
) -> None:
    """CSV trace ``t,h_true,h_fused,h_vlp,h_bar`` (h_vlp blank when absent)."""
    stream.write("t,h_true,h_fused,h_vlp,h_bar\n")
    for est, frame in zip(estimates, frames):
        h_true = frame.ground_truth.position[2] if frame.ground_truth is not None else math.nan
        h_vlp = "" if est.h_vlp is None else format(est.h_vlp, ".10g")
        stream.write(
            f"{frame.timestamp:.10g},{h_true:.10g},{est.h_fused:.10g},{h_vlp},{est.h_bar_corrected:.10g}\n"
        )
