"""Forward model of sound reaching a differential pressure sensor.

The acoustic path turns a unit-scaled stimulus into a pressure wave at the
sensor port (SPL calibration, inverse-distance spreading, air absorption,
propagation delay). The sensor path then applies the measured non-linear
frequency response, samples at the ADC rate with no anti-alias filter, and
adds the ambient pressure (baseline, drift and seeded noise).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from . import filters
from .signals import AudioSignal, NoiseProfile, PressureTrace

P_REF_PA = 20e-6


@dataclass(frozen=True)
class FrequencyResponseCurve:
    """Gain versus frequency from ordered control points.

    ``interpolation`` is ``"logf"`` (gain linear in log-frequency, the default)
    or ``"linear"``. Outside the control points the end gains are held.
    """

    points: tuple
    interpolation: str = "logf"

    def __post_init__(self):
        pts = tuple((float(f), float(g)) for f, g in self.points)
        if len(pts) < 2:
            raise ValueError("a response curve needs at least 2 control points")
        freqs = np.array([p[0] for p in pts])
        gains = np.array([p[1] for p in pts])
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("response curve frequencies must be strictly increasing")
        if np.any(gains < 0):
            raise ValueError("response curve gains must be non-negative")
        if self.interpolation not in ("logf", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.interpolation == "logf" and freqs[0] <= 0:
            raise ValueError("log-frequency interpolation needs positive control frequencies")
        object.__setattr__(self, "points", pts)

    @property
    def freqs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def gains(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def gain_at(self, freq_hz) -> np.ndarray:
        f = np.abs(np.asarray(freq_hz, dtype=float))
        if self.interpolation == "linear":
            return np.interp(f, self.freqs, self.gains)
        lf = np.log(np.maximum(f, self.freqs[0]))
        return np.interp(lf, np.log(self.freqs), self.gains)

    @classmethod
    def flat(cls, gain: float = 1.0) -> "FrequencyResponseCurve":
        return cls(((1.0, gain), (1e5, gain)))


# Emulates the measured roll-off: flat to 400 Hz, falling steeply to the
# noise floor by ~1 kHz. Shipped also as data/sdp800_response.csv.
DEFAULT_RESPONSE = FrequencyResponseCurve(
    ((1.0, 1.0), (400.0, 1.0), (650.0, 0.15), (900.0, 0.02), (1000.0, 0.005))
)

# Relative noise density; ambient pressure fluctuation concentrates below
# ~40 Hz and the floor keeps falling across the speech band.
DEFAULT_NOISE_SHAPE = FrequencyResponseCurve(
    ((1.0, 40.0), (10.0, 20.0), (30.0, 6.0), (60.0, 1.0), (200.0, 0.5), (1100.0, 0.1))
)


@dataclass(frozen=True)
class AcousticSource:
    distance_m: float = 0.05
    spl_db: float = 70.0
    initial_phase_rad: float = 0.0
    orientation_gain: float = 1.0
    speed_of_sound_mps: float = 343.0
    absorption_db_per_m_per_khz: float = 0.0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be positive, got {self.distance_m}")
        if not 0.0 <= self.orientation_gain <= 1.0:
            raise ValueError(f"orientation_gain must lie in [0, 1], got {self.orientation_gain}")
        if not self.speed_of_sound_mps > 0:
            raise ValueError("speed_of_sound_mps must be positive")
        if self.absorption_db_per_m_per_khz < 0:
            raise ValueError("absorption_db_per_m_per_khz must be non-negative")

    @property
    def peak_pressure_pa(self) -> float:
        """Peak pressure of a unit-amplitude stimulus at the 1 m reference."""
        return np.sqrt(2.0) * P_REF_PA * 10.0 ** (self.spl_db / 20.0)

    def attenuation(self, freq_hz) -> np.ndarray:
        """Deterministic amplitude factor for the given frequencies."""
        f_khz = np.abs(np.asarray(freq_hz, dtype=float)) / 1000.0
        spreading = self.orientation_gain * (1.0 / self.distance_m)
        return spreading * 10.0 ** (-self.absorption_db_per_m_per_khz * self.distance_m * f_khz / 20.0)


@dataclass(frozen=True)
class SensorModel:
    """ADC rate, response, and ambient pressure of a differential pressure sensor.

    Noise is Gaussian with one-sided density ``noise_density_pa_rthz`` times
    ``noise_shape(f)``; a measured ``noise_profile`` replaces both when given.
    """

    adc_rate_hz: int = 2200
    effective_bandwidth_hz: float = 900.0
    response: FrequencyResponseCurve = DEFAULT_RESPONSE
    noise_density_pa_rthz: float = 4e-3
    noise_shape: FrequencyResponseCurve | None = DEFAULT_NOISE_SHAPE
    noise_profile: NoiseProfile | None = field(default=None, compare=False)
    baseline_pa: float = 2.0
    drift_amplitude_pa: float = 0.0
    drift_period_s: float = 60.0

    def __post_init__(self):
        if int(self.adc_rate_hz) != self.adc_rate_hz or self.adc_rate_hz <= 0:
            raise ValueError(f"adc_rate_hz must be a positive integer, got {self.adc_rate_hz}")
        object.__setattr__(self, "adc_rate_hz", int(self.adc_rate_hz))
        if not self.effective_bandwidth_hz > 0:
            raise ValueError("effective_bandwidth_hz must be positive")
        if self.noise_density_pa_rthz < 0:
            raise ValueError("noise_density_pa_rthz must be non-negative")
        if self.drift_amplitude_pa != 0 and not self.drift_period_s > 0:
            raise ValueError("drift_period_s must be positive when drift is enabled")

    def noise_density(self, freq_hz) -> np.ndarray:
        f = np.asarray(freq_hz, dtype=float)
        if self.noise_profile is not None:
            p = self.noise_profile
            return np.interp(f, p.frequencies(), p.density())
        shape = self.noise_shape.gain_at(f) if self.noise_shape is not None else np.ones_like(f)
        return self.noise_density_pa_rthz * shape


def _delay_and_filter(x: np.ndarray, rate: int, gain_fn, delay_s: float = 0.0) -> np.ndarray:
    """Multiply the spectrum by ``gain_fn(f)`` and delay, without circular wrap."""
    n = x.size
    if n == 0:
        return x.copy()
    pad = int(np.ceil(delay_s * rate)) + 1
    nfft = next_fast_len(n + pad)
    spec = np.fft.rfft(x, nfft)
    f = np.fft.rfftfreq(nfft, 1.0 / rate)
    spec *= gain_fn(f)
    if delay_s:
        spec *= np.exp(-2j * np.pi * f * delay_s)
    return np.fft.irfft(spec, nfft)[:n]


def acoustic_pressure_wave(audio: AudioSignal, source: AcousticSource) -> PressureTrace:
    """Pressure wave at the sensor port, at the audio sample rate.

    A unit-amplitude stimulus reaches ``source.peak_pressure_pa`` at 1 m;
    amplitude then scales with orientation and 1/distance, absorption is
    applied per frequency, and the travel time distance/c as a delay.
    """
    delay = source.distance_m / source.speed_of_sound_mps
    x = audio.samples * source.peak_pressure_pa
    out = _delay_and_filter(x, audio.sample_rate, source.attenuation, delay)
    return PressureTrace(out, audio.sample_rate)


def tone_pressure_wave(freq_hz: float, duration_s: float, rate_hz: int,
                       source: AcousticSource, sign: int = -1) -> PressureTrace:
    """Closed-form steady-state wave for a pure tone.

    ``A(x, f) * P_smax * sin(2 pi f t + sign * k x + phi)`` with
    ``k = 2 pi f / c``; ``sign=-1`` is a wave travelling away from the source.
    """
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    k = 2 * np.pi * freq_hz / source.speed_of_sound_mps
    amp = float(source.attenuation(freq_hz)) * source.peak_pressure_pa
    phase = 2 * np.pi * freq_hz * t + sign * k * source.distance_m + source.initial_phase_rad
    return PressureTrace(amp * np.sin(phase), rate_hz)


def apply_frequency_response(signal, curve: FrequencyResponseCurve):
    """Full-length FFT, per-bin gain from ``curve``, inverse FFT.

    Accepts an AudioSignal or PressureTrace and returns the same type.
    """
    x = signal.samples
    n = x.size
    if n == 0:
        return signal
    spec = np.fft.rfft(x)
    spec *= curve.gain_at(np.fft.rfftfreq(n, 1.0 / signal.sample_rate))
    return type(signal)(np.fft.irfft(spec, n), signal.sample_rate)


def sample_at_rate(x: np.ndarray, rate: int, new_rate: int) -> np.ndarray:
    """Point-sample ``x`` at ``new_rate`` by linear interpolation; no anti-alias filter."""
    if x.size == 0:
        return x.copy()
    duration = (x.size - 1) / rate
    n_out = int(np.floor(duration * new_rate + 1e-9)) + 1
    t_out = np.arange(n_out) / new_rate
    return np.interp(t_out, np.arange(x.size) / rate, x)


def sensor_response(audio: AudioSignal, source: AcousticSource, model: SensorModel) -> PressureTrace:
    """Acoustic contribution to the reading at the ADC rate (no ambient terms)."""
    if audio.sample_rate < model.adc_rate_hz:
        raise ValueError(
            f"ground-truth audio under-sampled: {audio.sample_rate} Hz < ADC rate {model.adc_rate_hz} Hz"
        )
    wave = acoustic_pressure_wave(audio, source)
    wave = apply_frequency_response(wave, model.response)
    return PressureTrace(sample_at_rate(wave.samples, audio.sample_rate, model.adc_rate_hz),
                         model.adc_rate_hz)


def ambient_pressure(n_samples: int, model: SensorModel, seed: int) -> PressureTrace:
    """Reading without sound: baseline, drift and shaped Gaussian noise."""
    rate = model.adc_rate_hz
    t = np.arange(n_samples) / rate
    p = np.full(n_samples, float(model.baseline_pa))
    if model.drift_amplitude_pa:
        p += model.drift_amplitude_pa * np.sin(2 * np.pi * t / model.drift_period_s)
    if n_samples:
        rng = np.random.default_rng(seed)
        white = rng.standard_normal(n_samples)
        spec = np.fft.rfft(white)
        # white unit-variance noise has one-sided PSD 2/fs
        spec *= model.noise_density(np.fft.rfftfreq(n_samples, 1.0 / rate)) * np.sqrt(rate / 2.0)
        p += np.fft.irfft(spec, n_samples)
    return PressureTrace(p, rate)


def simulate_sensor(audio: AudioSignal, source: AcousticSource, model: SensorModel,
                    seed: int = 0) -> PressureTrace:
    """Total reading: ambient pressure plus the acoustic contribution."""
    acoustic = sensor_response(audio, source, model)
    ambient = ambient_pressure(acoustic.samples.size, model, seed)
    return PressureTrace(ambient.samples + acoustic.samples, model.adc_rate_hz)


def sine_sweep(f_start_hz: float, f_end_hz: float, duration_s: float, rate_hz: int) -> AudioSignal:
    """Unit-amplitude linear chirp, phase-continuous."""
    if not duration_s > 0:
        raise ValueError(f"sweep duration must be positive, got {duration_s}")
    if not 0 < f_start_hz <= f_end_hz < rate_hz / 2:
        raise ValueError(
            f"sweep needs 0 < f_start <= f_end < rate/2, got {f_start_hz}, {f_end_hz} at {rate_hz} Hz"
        )
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    phase = 2 * np.pi * (f_start_hz * t + 0.5 * (f_end_hz - f_start_hz) / duration_s * t**2)
    return AudioSignal(np.sin(phase), rate_hz)


def defense_lowpass(trace: PressureTrace, cutoff_hz: float = 40.0, order: int = 3) -> PressureTrace:
    """Causal Butterworth low-pass as it would sit in the sensor electronics."""
    sos = filters.butter_sos(cutoff_hz, trace.sample_rate, order, "lowpass")
    return PressureTrace(filters.causal(trace.samples, sos), trace.sample_rate)
