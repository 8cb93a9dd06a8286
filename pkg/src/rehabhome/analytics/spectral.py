"""Short-time Fourier magnitudes for gait signals.

Defaults (128-sample Hann window, hop 32 at 200 Hz) resolve the sub-3 Hz
cadence harmonics that distinguish regular from unstable gait.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # (frames, window_len // 2 + 1)
    window_len: int
    hop: int
    rate_hz: float

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.fft.rfftfreq(self.window_len, d=1.0 / self.rate_hz)

    def frame_times_s(self) -> np.ndarray:
        n = self.magnitudes.shape[0]
        return (np.arange(n) * self.hop + self.window_len / 2.0) / self.rate_hz


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def spectrogram(
    signal: Sequence[float],
    rate_hz: float = 200.0,
    window_len: int = 128,
    hop: int = 32,
) -> Spectrogram:
    """Magnitude STFT with a Hann window; frames cover [i*hop, i*hop + window_len)."""
    x = np.asarray(signal, dtype=float)
    if window_len < 2 or window_len > x.size:
        raise ValueError(f"window_len must be in [2, len(signal)], got {window_len}")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    window = hann_window(window_len)
    n_frames = 1 + (x.size - window_len) // hop
    mags = np.empty((n_frames, window_len // 2 + 1))
    for i in range(n_frames):
        frame = x[i * hop : i * hop + window_len] * window
        mags[i] = np.abs(np.fft.rfft(frame))
    return Spectrogram(magnitudes=mags, window_len=window_len, hop=hop, rate_hz=rate_hz)


def frame_parseval_residual(spec: Spectrogram, signal: Sequence[float]) -> float:
    """Max relative deviation between windowed-frame energy and spectrum energy.

    For a real signal, sum(x^2) == (|X_0|^2 + 2*sum|X_k|^2 + |X_N/2|^2) / N
    with the one-sided spectrum; returns the worst frame's relative residual.
    """
    x = np.asarray(signal, dtype=float)
    window = hann_window(spec.window_len)
    worst = 0.0
    for i in range(spec.magnitudes.shape[0]):
        frame = x[i * spec.hop : i * spec.hop + spec.window_len] * window
        time_energy = float(np.sum(frame * frame))
        m = spec.magnitudes[i]
        spec_energy = m[0] ** 2 + 2.0 * np.sum(m[1:-1] ** 2) + m[-1] ** 2
        if spec.window_len % 2:  # odd window: no unique Nyquist bin
            spec_energy = m[0] ** 2 + 2.0 * np.sum(m[1:] ** 2)
        spec_energy /= spec.window_len
        denom = max(abs(time_energy), 1e-30)
        worst = max(worst, abs(time_energy - spec_energy) / denom)
    return worst
