"""Speech recovery from a pressure trace.

Stages, in order: pressure-to-audio conversion (mean removal), peak
normalization, 40 Hz high-pass, harmonic/percussive split with
component-weighted spectral subtraction, and per-band equalization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import filters
from .signals import (
    AudioSignal,
    NoiseProfile,
    PressureTrace,
    Spectrogram,
    istft,
    normalize,
    peak_gain,
    stft,
)

FULL_SCALE_MINUS_1DB = 10 ** (-1 / 20)


@dataclass(frozen=True)
class HpssParams:
    window_size: int = 256
    hop: int = 64
    time_kernel: int = 17
    freq_kernel: int = 17
    n_iter: int = 1
    mask_kind: str = "ratio"
    window: str = "hann"

    def __post_init__(self):
        for name in ("time_kernel", "freq_kernel"):
            k = getattr(self, name)
            if k < 3 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3, got {k}")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.mask_kind not in ("ratio", "binary"):
            raise ValueError(f"mask_kind must be 'ratio' or 'binary', got {self.mask_kind!r}")


@dataclass(frozen=True)
class SubtractionParams:
    alpha_harmonic: float = 1.0
    alpha_percussive: float = 0.3
    spectral_floor: float = 0.01

    def __post_init__(self):
        if self.alpha_harmonic < 0 or self.alpha_percussive < 0:
            raise ValueError("subtraction factors must be non-negative")
        if not 0.0 <= self.spectral_floor <= 1.0:
            raise ValueError(f"spectral_floor must lie in [0, 1], got {self.spectral_floor}")


DEFAULT_GAIN_CAP = 31.6


@dataclass(frozen=True)
class EqualizerProfile:
    """Per-band linear gains for equal-width bands starting at ``start_hz``."""

    gains: tuple = (1.0,) * 40
    band_width_hz: float = 25.0
    start_hz: float = 0.0
    gain_cap: float = DEFAULT_GAIN_CAP

    def __post_init__(self):
        gains = tuple(float(g) for g in self.gains)
        if not gains:
            raise ValueError("an equalizer profile needs at least one band")
        if not self.band_width_hz > 0:
            raise ValueError("band_width_hz must be positive")
        if any(g < 0 or g > self.gain_cap * (1 + 1e-12) for g in gains):
            raise ValueError(f"gains must lie in [0, gain_cap={self.gain_cap}]")
        object.__setattr__(self, "gains", gains)

    @property
    def n_bands(self) -> int:
        return len(self.gains)

    @property
    def stop_hz(self) -> float:
        return self.start_hz + self.n_bands * self.band_width_hz

    def centers(self) -> np.ndarray:
        return self.start_hz + (np.arange(self.n_bands) + 0.5) * self.band_width_hz

    def band_index(self, freq_hz) -> np.ndarray:
        idx = np.floor((np.asarray(freq_hz, dtype=float) - self.start_hz) / self.band_width_hz)
        return np.clip(idx, 0, self.n_bands - 1).astype(int)

    def gain_at(self, freq_hz) -> np.ndarray:
        """Gain of the containing band; the end bands extend outward."""
        return np.asarray(self.gains)[self.band_index(freq_hz)]


@dataclass(frozen=True)
class PipelineConfig:
    target_peak: float = FULL_SCALE_MINUS_1DB
    highpass_cutoff_hz: float = 40.0
    highpass_order: int = 3
    hpss: HpssParams = field(default_factory=HpssParams)
    subtraction: SubtractionParams = field(default_factory=SubtractionParams)
    pat_window_s: float | None = None
    eq_window_size: int | None = None


def pat(trace: PressureTrace, window_s: float | None = None) -> AudioSignal:
    """Pressure-to-audio: subtract the mean pressure.

    The global mean is used by default. ``window_s`` switches to a centered
    moving average, useful for long traces whose baseline drifts.
    """
    p = trace.samples
    if p.size == 0:
        raise ValueError("cannot convert an empty pressure trace")
    # Differences to the first sample are unaffected by a constant offset, so
    # pat(P + c) == pat(P) bit for bit whenever P + c is itself exact. It also
    # avoids cancellation against a large absolute baseline.
    d = p - p[0]
    if window_s is None:
        return AudioSignal(d - d.mean(), trace.sample_rate)
    size = max(1, int(round(window_s * trace.sample_rate)))
    return AudioSignal(d - ndimage.uniform_filter1d(d, size, mode="nearest"), trace.sample_rate)


def highpass(signal: AudioSignal, cutoff_hz: float = 40.0, order: int = 3) -> AudioSignal:
    """Zero-phase Butterworth high-pass followed by removal of any residual mean."""
    sos = filters.butter_sos(cutoff_hz, signal.sample_rate, order, "highpass")
    y = filters.zero_phase(signal.samples, sos)
    return AudioSignal(y - y.mean(), signal.sample_rate)


def _masks(e_h: np.ndarray, e_p: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    total = e_h + e_p
    if kind == "binary":
        m_h = np.where(e_h > e_p, 1.0, np.where(e_h < e_p, 0.0, 0.5))
    else:
        m_h = np.full(total.shape, 0.5)
        nz = total > 0
        m_h[nz] = e_h[nz] / total[nz]
    return m_h, 1.0 - m_h


def hpss_masks(spec: Spectrogram, params: HpssParams) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic and percussive soft masks by median filtering.

    The harmonic envelope is a median across neighbouring frames, the
    percussive one a median across neighbouring bins. Later iterations
    re-estimate each envelope from the magnitude its previous mask kept.
    """
    mag = spec.magnitude
    m_h = np.ones_like(mag)
    m_p = np.ones_like(mag)
    for _ in range(params.n_iter):
        e_h = ndimage.median_filter(m_h * mag, size=(params.time_kernel, 1), mode="nearest")
        e_p = ndimage.median_filter(m_p * mag, size=(1, params.freq_kernel), mode="nearest")
        m_h, m_p = _masks(e_h, e_p, params.mask_kind)
    return m_h, m_p


def hpss(signal: AudioSignal, params: HpssParams = HpssParams()) -> tuple[Spectrogram, Spectrogram]:
    """Split into (harmonic, percussive) complex spectrograms sharing the input phase."""
    spec = stft(signal, params.window_size, params.hop, params.window)
    m_h, m_p = hpss_masks(spec, params)
    return spec.with_frames(m_h * spec.frames), spec.with_frames(m_p * spec.frames)


def characterize_noise(noise: AudioSignal, window_size: int = 256, hop: int = 64,
                       window: str = "hann") -> NoiseProfile:
    """Mean STFT magnitude per bin over all complete frames of a noise recording."""
    spec = stft(noise, window_size, hop, window, pad_edges=False)
    n_full = 1 + (noise.samples.size - window_size) // hop
    mag = spec.magnitude[:n_full].mean(axis=0)
    return NoiseProfile(mag, window_size, noise.sample_rate, window)


def spectral_subtract(spec: Spectrogram, noise, alpha: float = 1.0,
                      floor: float = 0.01) -> Spectrogram:
    """Magnitude subtraction ``max(|S| - alpha*N, floor*|S|)`` keeping the phase.

    ``noise`` is a NoiseProfile matching the spectrogram geometry, or an array
    broadcastable to the frame matrix.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if not 0.0 <= floor <= 1.0:
        raise ValueError(f"floor must lie in [0, 1], got {floor}")
    if isinstance(noise, NoiseProfile):
        if noise.window_size != spec.window_size or noise.sample_rate != spec.sample_rate:
            raise ValueError(
                f"noise profile (W={noise.window_size}, {noise.sample_rate} Hz) does not match "
                f"spectrogram (W={spec.window_size}, {spec.sample_rate} Hz)"
            )
        n_mag = noise.magnitude
    else:
        n_mag = np.asarray(noise, dtype=float)
    try:
        n_mag = np.broadcast_to(n_mag, spec.frames.shape)
    except ValueError:
        raise ValueError(
            f"noise magnitude shape {np.shape(n_mag)} does not fit spectrogram {spec.frames.shape}"
        ) from None

    mag = spec.magnitude
    kept = np.maximum(mag - alpha * n_mag, floor * mag)
    ratio = np.ones_like(mag)
    nz = mag > 0
    ratio[nz] = kept[nz] / mag[nz]
    return spec.with_frames(spec.frames * ratio)


def denoise(signal: AudioSignal, noise: NoiseProfile, hpss_params: HpssParams = HpssParams(),
            sub_params: SubtractionParams = SubtractionParams()) -> AudioSignal:
    """Full subtraction on the harmonic part, a scaled-down one on the percussive part."""
    harmonic, percussive = hpss(signal, hpss_params)
    floor = sub_params.spectral_floor
    h = spectral_subtract(harmonic, noise, sub_params.alpha_harmonic, floor)
    p = spectral_subtract(percussive, noise, sub_params.alpha_percussive, floor)
    return istft(h.with_frames(h.frames + p.frames))


def band_magnitudes(signal: AudioSignal, n_bands: int, band_width_hz: float,
                    start_hz: float = 0.0) -> np.ndarray:
    """Mean spectral magnitude per band, rate-independent (|FFT| / fs)."""
    spec = np.abs(np.fft.rfft(signal.samples)) / signal.sample_rate
    f = np.fft.rfftfreq(signal.samples.size, 1.0 / signal.sample_rate)
    edges = start_hz + band_width_hz * np.arange(n_bands + 1)
    out = np.zeros(n_bands)
    for b in range(n_bands):
        sel = (f >= edges[b]) & (f < edges[b + 1])
        if not sel.any():
            raise ValueError(f"band {b} [{edges[b]}, {edges[b + 1]}) Hz contains no FFT bins")
        out[b] = spec[sel].mean()
    return out


def calibrate_equalizer(reference: AudioSignal, recovered: AudioSignal, n_bands: int = 40,
                        band_width_hz: float = 25.0, start_hz: float = 0.0,
                        gain_cap: float = DEFAULT_GAIN_CAP,
                        silence_ratio: float = 1e-6) -> EqualizerProfile:
    """Per-band gain = reference band magnitude / recovered band magnitude.

    Gains are clamped to ``[0, gain_cap]``; bands where the recovered signal is
    silent (below ``silence_ratio`` of its strongest band) get ``gain_cap``.
    """
    if reference.samples.size == 0 or recovered.samples.size == 0:
        raise ValueError("reference and recovered signals must be non-empty")
    if n_bands < 1 or not band_width_hz > 0:
        raise ValueError("need n_bands >= 1 and band_width_hz > 0")
    top = start_hz + n_bands * band_width_hz
    nyquist = min(reference.sample_rate, recovered.sample_rate) / 2.0
    if start_hz < 0 or top > nyquist:
        raise ValueError(
            f"bands span [{start_hz}, {top}] Hz but the signals only cover [0, {nyquist}] Hz"
        )
    ref = band_magnitudes(reference, n_bands, band_width_hz, start_hz)
    rec = band_magnitudes(recovered, n_bands, band_width_hz, start_hz)
    silent = rec <= silence_ratio * rec.max()
    gains = np.full(n_bands, gain_cap)
    gains[~silent] = np.clip(ref[~silent] / rec[~silent], 0.0, gain_cap)
    return EqualizerProfile(tuple(gains), band_width_hz, start_hz, gain_cap)


def default_eq_window(rate: int, band_width_hz: float, n_samples: int) -> int:
    """Power-of-two STFT size resolving each band with ~8 bins."""
    size = 256
    while rate / size > band_width_hz / 8:
        size *= 2
    while size > n_samples and size > 16:
        size //= 2
    return size


def equalize(signal: AudioSignal, profile: EqualizerProfile, window_size: int | None = None,
             hop: int | None = None) -> AudioSignal:
    """Scale every STFT bin by the gain of the band containing it."""
    if window_size is None:
        window_size = default_eq_window(signal.sample_rate, profile.band_width_hz, signal.samples.size)
    if hop is None:
        hop = window_size // 4
    spec = stft(signal, window_size, hop)
    gains = profile.gain_at(spec.frequencies())
    return istft(spec.with_frames(spec.frames * gains))


def preprocess(trace: PressureTrace, config: PipelineConfig = PipelineConfig()) -> AudioSignal:
    """Mean removal and high-pass, in pressure units."""
    s = pat(trace, config.pat_window_s)
    return highpass(s, config.highpass_cutoff_hz, config.highpass_order)


def noise_profile_from_trace(noise_trace: PressureTrace,
                             config: PipelineConfig = PipelineConfig()) -> NoiseProfile:
    """Characterize a sound-free recording in the domain the denoiser sees.

    The profile stays in pascals; the pipeline rescales it by the same factor
    it applies when normalizing the speech trace.
    """
    hp = config.hpss
    return characterize_noise(preprocess(noise_trace, config), hp.window_size, hp.hop, hp.window)


STAGES = ("A", "B", "C", "D", "E")
STAGE_NAMES = {"A": "pressure", "B": "pat", "C": "highpass", "D": "denoise", "E": "equalized"}


def ds1_stages(trace: PressureTrace, noise: NoiseProfile, profile: EqualizerProfile,
               config: PipelineConfig = PipelineConfig()) -> dict[str, AudioSignal]:
    """Run the recovery chain and return every intermediate signal.

    Keys follow ``STAGES``: A raw pressure, B after mean removal and
    normalization, C after the high-pass, D after denoising, E after
    equalization and final normalization.
    """
    if noise.sample_rate != trace.sample_rate:
        raise ValueError(
            f"rate mismatch: noise profile at {noise.sample_rate} Hz, trace at {trace.sample_rate} Hz"
        )
    if noise.window_size != config.hpss.window_size:
        raise ValueError(
            f"noise profile window {noise.window_size} != HPSS window {config.hpss.window_size}"
        )
    stages = {"A": AudioSignal(trace.samples, trace.sample_rate)}
    s = pat(trace, config.pat_window_s)
    g = peak_gain(s, config.target_peak)
    stages["B"] = b = AudioSignal(s.samples * g, s.sample_rate)
    stages["C"] = c = highpass(b, config.highpass_cutoff_hz, config.highpass_order)
    stages["D"] = d = denoise(c, noise.scaled(g), config.hpss, config.subtraction)
    e = equalize(d, profile, config.eq_window_size)
    stages["E"] = normalize(e, config.target_peak)
    return stages


def ds1_pipeline(trace: PressureTrace, noise: NoiseProfile, profile: EqualizerProfile,
                 config: PipelineConfig = PipelineConfig()) -> AudioSignal:
    return ds1_stages(trace, noise, profile, config)["E"]
