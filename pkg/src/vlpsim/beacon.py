"""FDMA beacon synthesis and FFT-based RSS extraction.

Each luminaire blinks a 50 %-duty on-off square wave at its own frequency
ID. IDs are power-of-two multiples of a base frequency, so no beacon ever
lands on another's odd harmonics and a single photodiode can separate all
anchors from one composite waveform.

The receiver takes one rectangular analysis window spanning an integer
number of base-frequency periods, FFTs it, and reads each beacon's bin.
A 0-to-P square wave has fundamental peak amplitude ``2*P/pi``, so the
estimator divides the bin amplitude by ``2/pi`` to recover P. Constant
ambient light only shows up in the DC bin and never biases the estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, TextIO, Tuple

import numpy as np

from .channel import Luminaire, NoiseModel
from .sensors import RngLike, _rng_of

DEFAULT_BASE_FREQUENCY = 60.0
# 256 samples per base period: power-of-two FFT and >= 32 samples per period
# at the fastest default beacon, which keeps the fixed 2/pi fundamental
# scale factor accurate to < 0.2 %.
DEFAULT_SAMPLE_RATE = 15360.0


class MisalignedWindowError(ValueError):
    """Analysis window does not place every beacon frequency on an FFT bin."""


@dataclass(frozen=True)
class BeaconPlan:
    """Frequency assignment: one power-of-two multiple of ``base_frequency`` per luminaire."""

    base_frequency: float = DEFAULT_BASE_FREQUENCY
    assignments: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if not self.base_frequency > 0.0:
            raise ValueError("base_frequency must be > 0")
        object.__setattr__(self, "assignments", tuple((str(i), float(f)) for i, f in self.assignments))
        seen_ids = set()
        for lum_id, freq in self.assignments:
            if lum_id in seen_ids:
                raise ValueError(f"duplicate assignment for luminaire {lum_id!r}")
            seen_ids.add(lum_id)
            ratio = freq / self.base_frequency
            n = round(math.log2(ratio)) if ratio > 0 else -1
            if n < 0 or not math.isclose(ratio, 2.0**n, rel_tol=1e-9):
                raise ValueError(
                    f"frequency {freq} Hz is not a power-of-two multiple of {self.base_frequency} Hz"
                )
        freqs = [f for _, f in self.assignments]
        if len(set(freqs)) != len(freqs):
            raise ValueError("beacon frequencies must be unique")

    @classmethod
    def from_luminaires(cls, luminaires: Iterable[Luminaire], base_frequency: float = DEFAULT_BASE_FREQUENCY) -> "BeaconPlan":
        return cls(base_frequency, tuple((l.id, l.beacon_frequency) for l in luminaires))

    @property
    def max_frequency(self) -> float:
        return max((f for _, f in self.assignments), default=self.base_frequency)


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled photocurrent trace (watts-equivalent)."""

    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.sample_rate > 0.0:
            raise ValueError("sample_rate must be > 0")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _square_pattern(n_samples: int, sample_rate: float, freq: float, phase: float) -> np.ndarray:
    # On-half of the cycle first; exact 50 % duty whenever sample_rate/freq
    # divides the window.
    t = np.arange(n_samples) / sample_rate
    return (np.mod(freq * t + phase, 1.0) < 0.5).astype(float)


def synthesize_composite(
    powers: Dict[str, float],
    plan: BeaconPlan,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    duration: Optional[float] = None,
    noise: Optional[NoiseModel] = None,
    rng_seed: RngLike = None,
    phase_offsets: Optional[Dict[str, float]] = None,
) -> SampledWaveform:
    """Sum of on-off square waves, one per powered luminaire, plus noise.

    Each beacon alternates between its instantaneous received power and
    zero. ``duration`` defaults to one base-frequency period (the analysis
    window used by the extractor); phases default to all-in-phase.
    """
    if sample_rate <= 2.0 * plan.max_frequency:
        raise ValueError(
            f"sample_rate {sample_rate} Hz must exceed twice the fastest beacon "
            f"({plan.max_frequency} Hz)"
        )
    if duration is None:
        duration = 1.0 / plan.base_frequency
    if duration * plan.base_frequency < 1.0 - 1e-9:
        raise ValueError("duration must cover at least one full base-frequency period")
    n = int(round(sample_rate * duration))
    samples = np.zeros(n)
    assigned = dict(plan.assignments)
    for lum_id, p in powers.items():
        if lum_id not in assigned:
            raise ValueError(f"no frequency assigned to luminaire {lum_id!r}")
        phase = 0.0 if phase_offsets is None else phase_offsets.get(lum_id, 0.0)
        samples += p * _square_pattern(n, sample_rate, assigned[lum_id], phase)
    if noise is not None:
        samples += noise.ambient_dc
        if noise.gaussian_sigma > 0.0:
            samples += _rng_of(rng_seed).normal(0.0, noise.gaussian_sigma, size=n)
    return SampledWaveform(sample_rate, samples)


def quantize(waveform: SampledWaveform, full_scale: float, bits: int = 12) -> SampledWaveform:
    """Model an ADC: clip to [0, full_scale] and round to 2**bits levels."""
    if full_scale <= 0.0 or bits < 1:
        raise ValueError("full_scale must be > 0 and bits >= 1")
    levels = 2**bits - 1
    q = np.round(np.clip(waveform.samples, 0.0, full_scale) / full_scale * levels)
    return SampledWaveform(waveform.sample_rate, q / levels * full_scale)


def _bin_index(freq: float, n: int, sample_rate: float) -> int:
    k_exact = freq * n / sample_rate
    k = int(round(k_exact))
    if abs(k_exact - k) > 1e-6 or k < 1 or k > n // 2:
        raise MisalignedWindowError(
            f"{freq} Hz does not fall on an FFT bin of a {n}-sample window at {sample_rate} Hz"
        )
    return k


def extract_rss(waveform: SampledWaveform, plan: BeaconPlan) -> Dict[str, float]:
    """Per-luminaire received power read from the assigned FFT bins.

    Requires the window to span an integer number of periods of every
    assigned frequency (and of the base frequency), otherwise a
    MisalignedWindowError is raised.
    """
    n = len(waveform.samples)
    if n < 2:
        raise ValueError("waveform shorter than one analysis window")
    _bin_index(plan.base_frequency, n, waveform.sample_rate)
    spectrum = np.fft.rfft(waveform.samples)
    out: Dict[str, float] = {}
    for lum_id, freq in plan.assignments:
        k = _bin_index(freq, n, waveform.sample_rate)
        # |X_k| * 2/n is the fundamental peak amplitude; dividing by 2/pi
        # undoes the square-wave fundamental factor.
        out[lum_id] = float(np.abs(spectrum[k]) * math.pi / n)
    return out


def measure_rss_batch(
    power_matrix: np.ndarray,
    plan: BeaconPlan,
    luminaire_order: Sequence[str],
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    noise: Optional[NoiseModel] = None,
    rng_seed: RngLike = None,
) -> np.ndarray:
    """Synthesize + demodulate one analysis window per row of ``power_matrix``.

    Vectorized equivalent of calling synthesize_composite / extract_rss once
    per frame with a fresh one-period window; returns measured powers with
    the same shape and column order as the input.
    """
    power_matrix = np.asarray(power_matrix, dtype=float)
    n_frames, n_lum = power_matrix.shape
    if n_lum != len(luminaire_order):
        raise ValueError("power_matrix columns must match luminaire_order")
    n = int(round(sample_rate / plan.base_frequency))
    assigned = dict(plan.assignments)
    patterns = np.stack(
        [_square_pattern(n, sample_rate, assigned[lum_id], 0.0) for lum_id in luminaire_order]
    )
    waves = power_matrix @ patterns
    if noise is not None:
        waves += noise.ambient_dc
        if noise.gaussian_sigma > 0.0:
            waves += _rng_of(rng_seed).normal(0.0, noise.gaussian_sigma, size=waves.shape)
    spectrum = np.fft.rfft(waves, axis=1)
    bins = [_bin_index(assigned[lum_id], n, sample_rate) for lum_id in luminaire_order]
    return np.abs(spectrum[:, bins]) * math.pi / n


def waveform_to_csv(waveform: SampledWaveform, stream: TextIO) -> None:
    """Dump (time, value) rows for offline inspection."""
    stream.write("time,value\n")
    for i, v in enumerate(waveform.samples):
        stream.write(f"{i / waveform.sample_rate:.9g},{v:.10g}\n")
