"""Plantar pressure waveform synthesis for the 4x12 insole grid.

Each stance phase is modeled as two raised-cosine lobes (heel strike and
toe-off, 60/40 amplitude split) deposited onto the grid with a fixed
heel-to-toe row profile and medial-lateral column profile.  Per-stride peak
multipliers are lognormal so that sample CV of stride peaks approximates the
configured target while staying positive.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

from ..records import Foot, PressureFrame
from .cohort import GaitParams

# Stance-local lobe placement (fractions of stance duration).
_HEEL_CENTER = 0.26
_FORE_CENTER = 0.74
_LOBE_HALF_WIDTH = 0.40
_FORE_AMPLITUDE = 2.0 / 3.0  # 60/40 heel/forefoot split

# Row profiles map lobes onto the heel->toe axis (row 0 = heel); each sums to 1.
_HEEL_ROWS = np.array([0.70, 0.30, 0.00, 0.00])
_FORE_ROWS = np.array([0.00, 0.10, 0.55, 0.35])

# Fixed medial-lateral loading profile across the 12 columns; sums to 1.
_COL_PROFILE = np.array([0.6, 0.9, 1.1, 1.2, 1.15, 1.05, 1.0, 0.95, 0.9, 0.8, 0.7, 0.65])
_COL_PROFILE = _COL_PROFILE / _COL_PROFILE.sum()


def _lobe(phase: np.ndarray, center: float) -> np.ndarray:
    """Raised-cosine lobe over stance phase in [0, 1], clamped to stance support."""
    x = (phase - center) / _LOBE_HALF_WIDTH
    out = 0.5 * (1.0 + np.cos(np.pi * np.clip(x, -1.0, 1.0)))
    out[np.abs(x) >= 1.0] = 0.0
    return out


def _stride_multipliers(n: int, cv: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean lognormal multipliers whose sample CV approximates `cv`."""
    if cv <= 0 or n == 0:
        return np.ones(n)
    sigma = math.sqrt(math.log(1.0 + cv * cv))
    return rng.lognormal(mean=-0.5 * sigma * sigma, sigma=sigma, size=n)


def _trapezoid_phase(times_s: np.ndarray, cadence_fn) -> np.ndarray:
    """Accumulated gait phase (in cycles) for a possibly time-varying cadence."""
    if len(times_s) == 0:
        return np.zeros(0)
    rates = cadence_fn(times_s)
    dt = np.diff(times_s, prepend=times_s[0])
    return np.cumsum(rates * dt)


def generate_walk(
    params: GaitParams,
    duration_s: float,
    rate_hz: float = 200.0,
    seed: int = 0,
    speed_profile: str = "steady",
) -> Tuple[List[PressureFrame], List[PressureFrame]]:
    """Synthesize left and right pressure frame streams for one walking bout.

    Returns floor(duration_s * rate_hz) frames per foot with timestamps
    i * 1000 / rate_hz ms.  `speed_profile` is "steady" or "varying"; the
    varying profile drops cadence by 20% halfway through the bout.
    """
    if duration_s < 0:
        raise ValueError("duration_s must be >= 0")
    if rate_hz <= 0:
        raise ValueError("rate_hz must be > 0")

    n = int(math.floor(duration_s * rate_hz))
    step_ms = 1000.0 / rate_hz
    times_s = np.arange(n) / rate_hz
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x6417])

    if speed_profile == "varying":
        half = duration_s / 2.0

        def cadence_fn(t):
            return np.where(t < half, params.cadence, params.cadence * 0.8)

    elif speed_profile == "steady":

        def cadence_fn(t):
            return np.full_like(t, params.cadence, dtype=float)

    else:
        raise ValueError(f"unknown speed profile: {speed_profile}")

    phase_cycles = _trapezoid_phase(times_s, cadence_fn)
    max_strides = int(np.ceil(phase_cycles[-1])) + 2 if n else 0

    streams: Tuple[List[PressureFrame], List[PressureFrame]] = ([], [])
    foot_specs = (
        (Foot.LEFT, params.stance_fraction_left, params.peak_force_left, 0.0),
        (Foot.RIGHT, params.stance_fraction_right, params.peak_force_right, 0.5),
    )
    for out, (foot, stance_frac, peak, phase_offset) in zip(streams, foot_specs):
        mults = _stride_multipliers(max_strides, params.stride_cv_target, rng)
        foot_phase = phase_cycles + phase_offset
        stride_idx = np.floor(foot_phase).astype(int)
        frac = foot_phase - stride_idx
        in_stance = frac < stance_frac
        stance_phase = np.where(in_stance, frac / stance_frac, 0.0)

        heel = _lobe(stance_phase, _HEEL_CENTER)
        fore = _FORE_AMPLITUDE * _lobe(stance_phase, _FORE_CENTER)
        heel = np.where(in_stance, heel, 0.0)
        fore = np.where(in_stance, fore, 0.0)
        amp = peak * mults[np.clip(stride_idx, 0, max_strides - 1)] if n else np.zeros(0)

        # (n, 4, 12) = lobe time profiles x row profiles x column profile
        grids = (
            amp[:, None, None]
            * (heel[:, None] * _HEEL_ROWS + fore[:, None] * _FORE_ROWS)[:, :, None]
            * _COL_PROFILE[None, None, :]
        )
        if params.noise_sigma > 0:
            grids = grids + rng.normal(0.0, params.noise_sigma, size=grids.shape)
        np.clip(grids, 0.0, None, out=grids)

        for i in range(n):
            out.append(PressureFrame(timestamp=i * step_ms, foot=foot, values=grids[i]))

    return streams
