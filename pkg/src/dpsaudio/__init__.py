"""Recover audio from differential pressure sensor traces.

The package simulates how a low-rate pressure sensor picks up sound, runs a
recovery chain (mean removal, high-pass, harmonic/percussive-aware spectral
subtraction, calibrated equalization) and scores the result.
"""
from .metrics import Transcript, WerBreakdown, snr_reference, snr_segments, tokenize, wer
from .reconstruct import (
    EqualizerProfile,
    HpssParams,
    PipelineConfig,
    SubtractionParams,
    calibrate_equalizer,
    characterize_noise,
    denoise,
    ds1_pipeline,
    ds1_stages,
    equalize,
    highpass,
    hpss,
    pat,
    spectral_subtract,
)
from .sensor import (
    AcousticSource,
    FrequencyResponseCurve,
    SensorModel,
    acoustic_pressure_wave,
    apply_frequency_response,
    defense_lowpass,
    simulate_sensor,
    sine_sweep,
)
from .signals import AudioSignal, NoiseProfile, PressureTrace, Spectrogram, istft, normalize, stft

__all__ = [
    "acoustic_pressure_wave",
    "AcousticSource",
    "apply_frequency_response",
    "AudioSignal",
    "calibrate_equalizer",
    "characterize_noise",
    "defense_lowpass",
    "denoise",
    "ds1_pipeline",
    "ds1_stages",
    "equalize",
    "EqualizerProfile",
    "FrequencyResponseCurve",
    "highpass",
    "hpss",
    "HpssParams",
    "istft",
    "NoiseProfile",
    "normalize",
    "pat",
    "PipelineConfig",
    "PressureTrace",
    "SensorModel",
    "simulate_sensor",
    "sine_sweep",
    "snr_reference",
    "snr_segments",
    "spectral_subtract",
    "Spectrogram",
    "stft",
    "SubtractionParams",
    "tokenize",
    "Transcript",
    "wer",
    "WerBreakdown",
]

__version__ = "0.1.0"
