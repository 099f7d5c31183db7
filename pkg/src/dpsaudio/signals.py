"""Sampled-signal containers, STFT/ISTFT and peak normalization.

Everything here is a pure function of its inputs. Containers are frozen
dataclasses wrapping read-only numpy arrays so they can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AudioSignal:
    """Uniformly sampled acoustic amplitude sequence."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = _frozen(self.samples, np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioSignal samples must be one-dimensional")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class PressureTrace:
    """Differential-pressure readings in pascals (the sensor output)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = _frozen(self.samples, np.float64)
        if samples.ndim != 1:
            raise ValueError("PressureTrace samples must be one-dimensional")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("pressure samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


WINDOWS = ("hann", "rect")


def make_window(kind: str, size: int) -> np.ndarray:
    """Periodic analysis window of the given kind."""
    if kind == "hann":
        n = np.arange(size)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
    if kind == "rect":
        return np.ones(size)
    raise ValueError(f"unknown window kind {kind!r}; expected one of {WINDOWS}")


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT frames, shape ``(n_frames, window_size // 2 + 1)``.

    ``offset`` is the number of zeros that were prepended to the signal before
    framing and ``length`` the original signal length; ``istft`` uses both to
    return a signal aligned with the input.
    """

    frames: np.ndarray
    window_size: int
    hop: int
    sample_rate: int
    window_kind: str = "hann"
    offset: int = 0
    length: int | None = None

    def __post_init__(self):
        frames = _frozen(self.frames, np.complex128)
        if frames.ndim != 2:
            raise ValueError("spectrogram frames must be 2-D [n_frames, n_bins]")
        if frames.shape[1] != self.window_size // 2 + 1:
            raise ValueError(
                f"n_bins={frames.shape[1]} inconsistent with window_size={self.window_size}"
            )
        if not 0 < self.hop <= self.window_size:
            raise ValueError(f"hop must satisfy 0 < hop <= window_size, got {self.hop}")
        if self.window_kind not in WINDOWS:
            raise ValueError(f"unknown window kind {self.window_kind!r}")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.frames)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.frames)

    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.window_size, 1.0 / self.sample_rate)

    def with_frames(self, frames: np.ndarray) -> "Spectrogram":
        """Same geometry, new content."""
        return Spectrogram(
            frames, self.window_size, self.hop, self.sample_rate,
            self.window_kind, self.offset, self.length,
        )


@dataclass(frozen=True)
class NoiseProfile:
    """Per-bin mean STFT magnitude of a noise recording."""

    magnitude: np.ndarray
    window_size: int
    sample_rate: int
    window_kind: str = "hann"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mag = _frozen(self.magnitude, np.float64)
        if mag.ndim != 1 or mag.size != self.window_size // 2 + 1:
            raise ValueError(
                f"noise profile length {mag.size} inconsistent with window_size={self.window_size}"
            )
        if np.any(mag < 0) or not np.all(np.isfinite(mag)):
            raise ValueError("noise profile magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitude", mag)

    def scaled(self, factor: float) -> "NoiseProfile":
        return NoiseProfile(self.magnitude * factor, self.window_size, self.sample_rate, self.window_kind)

    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.window_size, 1.0 / self.sample_rate)

    def density(self) -> np.ndarray:
        """Equivalent one-sided noise density (units/sqrt(Hz)) per bin.

        Assumes Gaussian noise, whose STFT magnitude is Rayleigh distributed:
        E|X| = sqrt(pi/4) * sqrt(E|X|^2) and E|X|^2 = S(f) * fs/2 * sum(w^2).
        """
        w = make_window(self.window_kind, self.window_size)
        rms = self.magnitude / np.sqrt(np.pi / 4.0)
        return rms / np.sqrt(0.5 * self.sample_rate * np.sum(w**2))


def stft(
    signal: AudioSignal,
    window_size: int = 256,
    hop: int = 64,
    window: str = "hann",
    pad_edges: bool = True,
) -> Spectrogram:
    """Short-time Fourier transform with one-sided frames.

    Frame ``n`` covers samples ``[n*hop, n*hop + window_size)`` of the
    (optionally padded) signal; the tail is zero-padded to complete the last
    frame. With ``pad_edges`` the signal is first padded by
    ``window_size - hop`` zeros on both ends so every input sample is seen by
    the same number of frames, which makes the inverse exact at the edges.
    """
    x = signal.samples
    if hop <= 0:
        raise ValueError(f"hop must be positive, got {hop}")
    if hop > window_size:
        raise ValueError(f"hop ({hop}) must not exceed window_size ({window_size})")
    if x.size < window_size:
        raise ValueError(f"input too short: {x.size} samples < window_size {window_size}")

    offset = window_size - hop if pad_edges else 0
    if pad_edges:
        x = np.concatenate([np.zeros(offset), x, np.zeros(offset)])
    n_frames = 1 + int(np.ceil(max(x.size - window_size, 0) / hop))
    total = (n_frames - 1) * hop + window_size
    x = np.concatenate([x, np.zeros(total - x.size)])

    idx = np.arange(window_size)[None, :] + hop * np.arange(n_frames)[:, None]
    w = make_window(window, window_size)
    frames = np.fft.rfft(x[idx] * w, axis=1)
    return Spectrogram(frames, window_size, hop, signal.sample_rate, window, offset, signal.samples.size)


def overlap_envelope(window: np.ndarray, hop: int) -> np.ndarray:
    """Steady-state sum of squared windows over one hop period."""
    size = window.size
    env = np.zeros(hop)
    for start in range(0, size, hop):
        seg = window[start:start + hop] ** 2
        env[: seg.size] += seg
    return env


def istft(spec: Spectrogram) -> AudioSignal:
    """Weighted overlap-add inverse of :func:`stft`.

    Each inverse frame is windowed again and the sum is divided by the summed
    squared window, which inverts ``stft`` exactly wherever that sum is
    non-zero. Output covers ``(n_frames - 1) * hop + window_size`` samples,
    trimmed back to the original signal when the spectrogram records one.
    """
    W, H = spec.window_size, spec.hop
    w = make_window(spec.window_kind, W)
    env = overlap_envelope(w, H)
    if env.min() <= 1e-10 * env.max():
        raise ValueError(
            f"window {spec.window_kind!r} with size {W} and hop {H} does not allow "
            "overlap-add reconstruction"
        )

    n_frames = spec.n_frames
    total = (n_frames - 1) * H + W
    frames = np.fft.irfft(spec.frames, n=W, axis=1) * w
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = w**2
    for n in range(n_frames):
        out[n * H:n * H + W] += frames[n]
        norm[n * H:n * H + W] += w2

    if spec.length is not None:
        out = out[spec.offset:spec.offset + spec.length]
        norm = norm[spec.offset:spec.offset + spec.length]
    nz = norm > 1e-10
    out[nz] /= norm[nz]
    out[~nz] = 0.0
    return AudioSignal(out, spec.sample_rate)


def peak_gain(signal: AudioSignal, target_peak: float) -> float:
    """Scale factor that brings the signal peak to ``target_peak`` (1.0 for silence)."""
    if target_peak <= 0:
        raise ValueError(f"target_peak must be positive, got {target_peak}")
    peak = float(np.max(np.abs(signal.samples))) if signal.samples.size else 0.0
    if peak == 0.0:
        return 1.0
    return target_peak / peak


def normalize(signal: AudioSignal, target_peak: float = 1.0) -> AudioSignal:
    """Peak-normalize; all-zero input is returned unchanged."""
    g = peak_gain(signal, target_peak)
    return AudioSignal(signal.samples * g, signal.sample_rate)


def tone(freq_hz: float, duration_s: float, rate_hz: int, amplitude: float = 1.0,
         phase_rad: float = 0.0) -> AudioSignal:
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    return AudioSignal(amplitude * np.sin(2 * np.pi * freq_hz * t + phase_rad), rate_hz)
