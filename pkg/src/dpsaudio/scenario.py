"""Reproducible synthetic scenario: a speech-like stimulus recorded by a simulated sensor."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.signal import resample_poly

from .reconstruct import (
    DEFAULT_GAIN_CAP,
    EqualizerProfile,
    PipelineConfig,
    calibrate_equalizer,
    highpass,
    noise_profile_from_trace,
    pat,
)
from .sensor import AcousticSource, acoustic_pressure_wave, SensorModel, simulate_sensor, sine_sweep
from .signals import AudioSignal, NoiseProfile, PressureTrace, normalize

DEFAULT_SEED = 20240601
AUDIO_RATE = 16000


def speech_proxy(duration_s: float = 3.0, rate: int = AUDIO_RATE, n_syllables: int = 7,
                 seed: int = DEFAULT_SEED) -> AudioSignal:
    """Voiced syllables (harmonic stacks under a formant envelope) led by plosive clicks.

    Voicing stays below 900 Hz, the band a pressure sensor can still carry.
    Peak amplitude is 1.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    x = np.zeros(n)
    slot = duration_s / n_syllables
    for i in range(n_syllables):
        start = i * slot + 0.04 * slot
        length = 0.7 * slot
        f0 = rng.uniform(105.0, 135.0)
        glide = rng.uniform(-0.12, 0.12)
        formant = rng.uniform(420.0, 650.0)
        seg = (t >= start) & (t < start + length)
        ts = t[seg] - start
        f_inst = f0 * (1.0 + glide * ts / length)
        phase = 2 * np.pi * np.cumsum(f_inst) / rate
        voiced = np.zeros(ts.size)
        for h in range(1, int(900 // (f0 * 1.15)) + 1):
            fh = h * f0
            amp = 0.35 + np.exp(-0.5 * ((fh - formant) / 140.0) ** 2)
            voiced += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
        envelope = np.sin(np.pi * ts / length) ** 0.6
        x[seg] += voiced * envelope

        # plosive release just before the vowel
        k = int((start - 0.02 * slot) * rate)
        burst = int(0.004 * rate)
        if k > 0:
            x[k:k + burst] += 3.0 * rng.standard_normal(burst) * np.exp(-np.arange(burst) / (0.001 * rate))
    return normalize(AudioSignal(x, rate), 1.0)


def downsample_reference(audio: AudioSignal, rate: int, n_samples: int | None = None) -> AudioSignal:
    """Band-limited resampling of the clean stimulus onto the sensor's time grid."""
    g = gcd(rate, audio.sample_rate)
    y = resample_poly(audio.samples, rate // g, audio.sample_rate // g)
    if n_samples is not None:
        y = np.concatenate([y, np.zeros(max(0, n_samples - y.size))])[:n_samples]
    return AudioSignal(y, rate)


def auto_calibrate(model: SensorModel, source: AcousticSource, config: PipelineConfig = PipelineConfig(),
                   seed: int = DEFAULT_SEED, duration_s: float = 10.0, f_start_hz: float = 1.0,
                   f_end_hz: float = 1000.0, n_bands: int = 40, band_width_hz: float = 25.0,
                   start_hz: float = 0.0, gain_cap: float = DEFAULT_GAIN_CAP,
                   audio_rate: int = AUDIO_RATE) -> EqualizerProfile:
    """Play a sweep through the simulated sensor and derive equalizer gains.

    Recovered and reference sweeps both get mean removal, the high-pass and
    peak normalization, so the gains only undo the sensor itself.
    """
    sweep = sine_sweep(f_start_hz, f_end_hz, duration_s, audio_rate)
    trace = simulate_sensor(sweep, source, model, seed)
    recovered = recover_for_calibration(trace, config)
    ref = downsample_reference(sweep, model.adc_rate_hz, recovered.samples.size)
    ref = normalize(highpass(ref, config.highpass_cutoff_hz, config.highpass_order), config.target_peak)
    return calibrate_equalizer(ref, recovered, n_bands, band_width_hz, start_hz, gain_cap)


def recover_for_calibration(trace: PressureTrace, config: PipelineConfig = PipelineConfig()) -> AudioSignal:
    s = pat(trace, config.pat_window_s)
    s = highpass(s, config.highpass_cutoff_hz, config.highpass_order)
    return normalize(s, config.target_peak)


@dataclass(frozen=True)
class Scenario:
    """Everything the staged evaluation needs, generated from one seed."""

    clean: AudioSignal
    reference: AudioSignal
    trace: PressureTrace
    noise_trace: PressureTrace
    noise: NoiseProfile
    profile: EqualizerProfile
    model: SensorModel
    source: AcousticSource
    config: PipelineConfig = field(default_factory=PipelineConfig)


STANDARD_SOURCE = AcousticSource()


def standard_scenario(seed: int = DEFAULT_SEED, model: SensorModel | None = None,
                      source: AcousticSource | None = None,
                      config: PipelineConfig | None = None) -> Scenario:
    model = model or SensorModel()
    source = source or STANDARD_SOURCE
    config = config or PipelineConfig()
    clean = speech_proxy(seed=seed)
    trace = simulate_sensor(clean, source, model, seed + 1)
    silence = AudioSignal(np.zeros(int(round(5.0 * AUDIO_RATE))), AUDIO_RATE)
    noise_trace = simulate_sensor(silence, source, model, seed + 2)
    noise = noise_profile_from_trace(noise_trace, config)
    profile = auto_calibrate(model, source, config, seed + 3)
    # what an ideal, flat, noiseless sensor would read: keeps the travel delay
    arrival = acoustic_pressure_wave(clean, source)
    reference = downsample_reference(AudioSignal(arrival.samples, AUDIO_RATE), model.adc_rate_hz,
                                     trace.samples.size)
    return Scenario(clean, reference, trace, noise_trace, noise, profile, model, source, config)
