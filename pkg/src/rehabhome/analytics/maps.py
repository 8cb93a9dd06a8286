"""Rasterization of gait segments into normalized 2D pressure maps.

The map is time x channel (rows follow the 5 s of frames, columns the 48
sensors), bilinearly resampled to the configured resolution and min-max
normalized per map.  Zero-span maps (max == min) normalize to all zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gateway.segment import GaitSegment
from ..records import Foot

DEFAULT_MAP_SIZE = 224


@dataclass
class PressureMap:
    values: np.ndarray  # (H, W) in [0, 1]
    foot: Foot
    patient_ref: str = ""
    start_ts: int = 0

    def validate(self) -> None:
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("pressure map values must lie in [0, 1]")


def bilinear_resize(matrix: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with corner alignment."""
    matrix = np.asarray(matrix, dtype=float)
    in_h, in_w = matrix.shape
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    ys = np.linspace(0.0, in_h - 1.0, out_h) if out_h > 1 else np.array([0.5 * (in_h - 1)])
    xs = np.linspace(0.0, in_w - 1.0, out_w) if out_w > 1 else np.array([0.5 * (in_w - 1)])
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = matrix[np.ix_(y0, x0)] * (1 - wx) + matrix[np.ix_(y0, x1)] * wx
    bottom = matrix[np.ix_(y1, x0)] * (1 - wx) + matrix[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def rasterize_pressure_map(
    segment: GaitSegment,
    foot: Foot,
    out_h: int = DEFAULT_MAP_SIZE,
    out_w: int = DEFAULT_MAP_SIZE,
) -> PressureMap:
    matrix = segment.left if foot is Foot.LEFT else segment.right
    resized = bilinear_resize(matrix, out_h, out_w)
    lo = float(resized.min())
    hi = float(resized.max())
    if hi - lo <= 0:
        values = np.zeros_like(resized)
    else:
        values = (resized - lo) / (hi - lo)
    return PressureMap(values=values, foot=foot, patient_ref=segment.patient_ref, start_ts=segment.start_ts)
