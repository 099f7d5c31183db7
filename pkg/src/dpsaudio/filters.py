"""Butterworth filters shared by the reconstruction chain and the defense."""
from __future__ import annotations

import numpy as np
from scipy import signal as sps


def butter_sos(cutoff_hz: float, rate_hz: float, order: int, kind: str) -> np.ndarray:
    """Digital Butterworth as second-order sections.

    Bilinear transform with the cutoff prewarped, so the -3 dB point lands
    exactly on ``cutoff_hz``.
    """
    nyquist = rate_hz / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise ValueError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)"
        )
    if order < 1:
        raise ValueError(f"filter order must be >= 1, got {order}")
    return sps.butter(order, cutoff_hz, btype=kind, fs=rate_hz, output="sos")


def analog_magnitude(freq_hz, cutoff_hz: float, order: int, kind: str) -> np.ndarray:
    """|H(f)| of the analog Butterworth prototype."""
    f = np.asarray(freq_hz, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = f / cutoff_hz if kind == "lowpass" else cutoff_hz / f
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * order))


def zero_phase(x: np.ndarray, sos: np.ndarray) -> np.ndarray:
    """Forward-backward filtering; squares the magnitude response."""
    # sosfiltfilt's default odd-extension pad needs enough samples
    padlen = min(3 * (2 * sos.shape[0] + 1), max(x.size - 1, 0))
    return sps.sosfiltfilt(sos, x, padlen=padlen)


def causal(x: np.ndarray, sos: np.ndarray) -> np.ndarray:
    """Single-pass filtering started from the steady state of the first sample."""
    if x.size == 0:
        return x.copy()
    zi = sps.sosfilt_zi(sos) * x[0]
    y, _ = sps.sosfilt(sos, x, zi=zi)
    return y
