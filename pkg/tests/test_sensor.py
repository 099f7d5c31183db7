import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsaudio.sensor import (
    DEFAULT_RESPONSE,
    AcousticSource,
    FrequencyResponseCurve,
    SensorModel,
    acoustic_pressure_wave,
    ambient_pressure,
    apply_frequency_response,
    defense_lowpass,
    sample_at_rate,
    sensor_response,
    simulate_sensor,
    sine_sweep,
    tone_pressure_wave,
)
from dpsaudio.reconstruct import characterize_noise
from dpsaudio.signals import AudioSignal, PressureTrace

from conftest import rms, tone_samples

QUIET = SensorModel(noise_density_pa_rthz=0.0, baseline_pa=0.0)


def peak_frequency(x, rate):
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    spec[0] = 0
    return np.fft.rfftfreq(x.size, 1 / rate)[np.argmax(spec)], rate / x.size


class TestResponseCurve:
    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencyResponseCurve(((100, 1.0),))
        with pytest.raises(ValueError):
            FrequencyResponseCurve(((100, 1.0), (50, 1.0)))
        with pytest.raises(ValueError):
            FrequencyResponseCurve(((100, 1.0), (200, -1.0)))

    def test_default_shape(self):
        g = DEFAULT_RESPONSE.gain_at([0, 100, 400, 650, 900, 2000])
        np.testing.assert_allclose(g, [1, 1, 1, 0.15, 0.02, 0.005])
        mid = DEFAULT_RESPONSE.gain_at(np.linspace(400, 1000, 50))
        assert np.all(np.diff(mid) <= 0)

    def test_log_interpolation_midpoint(self):
        c = FrequencyResponseCurve(((100, 1.0), (400, 0.0)))
        assert c.gain_at(200) == pytest.approx(0.5)


class TestAcousticWave:
    def test_silence(self):
        out = acoustic_pressure_wave(AudioSignal(np.zeros(1000), 8000), AcousticSource())
        assert np.all(out.samples == 0)

    def test_94_db_is_one_pascal_rms(self):
        rate = 48000
        src = AcousticSource(distance_m=1.0, spl_db=94.0)
        out = acoustic_pressure_wave(AudioSignal(tone_samples(250, 1.0, rate), rate), src)
        mid = out.samples[rate // 4: 3 * rate // 4]
        # 94 dB SPL is 1.00237 Pa RMS; the usual "1 Pa" is a rounding of that
        expected = np.sqrt(2) * 20e-6 * 10 ** (94 / 20)
        assert np.max(np.abs(mid)) == pytest.approx(expected, rel=1e-3)
        assert np.max(np.abs(mid)) == pytest.approx(np.sqrt(2), rel=3e-3)

    def test_inverse_distance(self):
        rate = 8000
        audio = AudioSignal(tone_samples(200, 1.0, rate), rate)
        a1 = acoustic_pressure_wave(audio, AcousticSource(distance_m=1.0)).samples
        a2 = acoustic_pressure_wave(audio, AcousticSource(distance_m=2.0)).samples
        mid = slice(rate // 4, 3 * rate // 4)
        assert rms(a2[mid]) / rms(a1[mid]) == pytest.approx(0.5, abs=1e-6)

    def test_absorption_is_frequency_dependent(self):
        src = AcousticSource(distance_m=2.0, absorption_db_per_m_per_khz=3.0)
        # 2 m * 3 dB/m/kHz at 1 kHz -> 6 dB beyond spreading
        assert src.attenuation(1000.0) == pytest.approx(0.5 * 10 ** (-6 / 20))
        assert src.attenuation(0.0) == pytest.approx(0.5)

    def test_orientation_gain(self):
        audio = AudioSignal(tone_samples(100, 0.5, 8000), 8000)
        full = acoustic_pressure_wave(audio, AcousticSource()).samples
        side = acoustic_pressure_wave(audio, AcousticSource(orientation_gain=0.25)).samples
        np.testing.assert_allclose(side, 0.25 * full, atol=1e-12)

    def test_matches_closed_form_tone(self):
        rate, f = 48000, 300.0
        src = AcousticSource(distance_m=0.7, initial_phase_rad=0.4, absorption_db_per_m_per_khz=2.0)
        audio = AudioSignal(tone_samples(f, 1.0, rate, phase=0.4), rate)
        via_fft = acoustic_pressure_wave(audio, src).samples
        closed = tone_pressure_wave(f, 1.0, rate, src).samples
        mid = slice(rate // 4, 3 * rate // 4)
        assert np.max(np.abs(via_fft[mid] - closed[mid])) < 1e-3 * np.max(np.abs(closed))

    @pytest.mark.parametrize("bad", [dict(distance_m=0), dict(orientation_gain=1.5),
                                     dict(speed_of_sound_mps=-1)])
    def test_source_validation(self, bad):
        with pytest.raises(ValueError):
            AcousticSource(**bad)

    def test_distance_monotonicity(self):
        audio = AudioSignal(tone_samples(150, 0.5, 8000), 8000)
        levels = [rms(acoustic_pressure_wave(audio, AcousticSource(distance_m=d)).samples)
                  for d in (0.05, 0.1, 0.3, 1.0, 3.0)]
        assert all(a > b for a, b in zip(levels, levels[1:]))


class TestSimulateSensor:
    def test_silence_gives_baseline(self):
        model = SensorModel(noise_density_pa_rthz=0.0, baseline_pa=5.0)
        trace = simulate_sensor(AudioSignal(np.zeros(16000), 16000), AcousticSource(), model, 0)
        assert trace.sample_rate == 2200
        np.testing.assert_allclose(trace.samples, 5.0, atol=1e-12)

    def test_under_sampled_audio_rejected(self):
        with pytest.raises(ValueError, match="under-sampled"):
            simulate_sensor(AudioSignal(np.zeros(100), 1000), AcousticSource(), SensorModel(), 0)

    def test_aliasing_of_1khz_at_1800(self):
        rate = 16000
        model = SensorModel(adc_rate_hz=1800, noise_density_pa_rthz=0.0, baseline_pa=0.0)
        audio = AudioSignal(tone_samples(1000, 2.0, rate), rate)
        trace = simulate_sensor(audio, AcousticSource(), model, 0)
        f, df = peak_frequency(trace.samples, 1800)
        assert abs(f - 800) <= df

    @pytest.mark.parametrize("f", [1300.0, 1700.0, 2500.0, 4100.0])
    def test_aliased_frequency_prediction(self, f):
        rate, adc = 16000, 2200
        model = SensorModel(adc_rate_hz=adc, noise_density_pa_rthz=0.0, baseline_pa=0.0,
                            response=FrequencyResponseCurve.flat())
        trace = simulate_sensor(AudioSignal(tone_samples(f, 2.0, rate), rate), AcousticSource(), model, 0)
        got, df = peak_frequency(trace.samples, adc)
        assert abs(got - abs(f - adc * round(f / adc))) <= df

    def test_response_ratio(self):
        rate = 16000
        src = AcousticSource()
        amps = {}
        for f in (200.0, 600.0):
            trace = sensor_response(AudioSignal(tone_samples(f, 2.0, rate), rate), src, QUIET)
            amps[f] = rms(trace.samples[500:-500])
        expected = DEFAULT_RESPONSE.gain_at(600.0) / DEFAULT_RESPONSE.gain_at(200.0)
        assert amps[600.0] / amps[200.0] == pytest.approx(expected, rel=0.02)

    def test_determinism(self, rng):
        audio = AudioSignal(rng.standard_normal(16000), 16000)
        a = simulate_sensor(audio, AcousticSource(), SensorModel(), 42)
        b = simulate_sensor(audio, AcousticSource(), SensorModel(), 42)
        c = simulate_sensor(audio, AcousticSource(), SensorModel(), 43)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_superposition(self, rng):
        x, y = rng.standard_normal(16000), rng.standard_normal(16000)
        model, src = SensorModel(), AcousticSource()
        summed = simulate_sensor(AudioSignal(x + y, 16000), src, model, 9).samples
        parts = (ambient_pressure(summed.size, model, 9).samples
                 + sensor_response(AudioSignal(x, 16000), src, model).samples
                 + sensor_response(AudioSignal(y, 16000), src, model).samples)
        np.testing.assert_allclose(summed, parts, atol=1e-9)

    def test_baseline_shift(self, rng):
        audio = AudioSignal(rng.standard_normal(8000), 16000)
        a = simulate_sensor(audio, AcousticSource(), SensorModel(baseline_pa=1.0), 3).samples
        b = simulate_sensor(audio, AcousticSource(), SensorModel(baseline_pa=1.0 + 7.5), 3).samples
        np.testing.assert_allclose(b - a, 7.5, atol=1e-12)

    def test_noise_density_matches_model(self):
        # flat 1e-2 Pa/sqrt(Hz) over 1100 Hz -> RMS 1e-2 * sqrt(1100)
        model = SensorModel(noise_density_pa_rthz=1e-2, noise_shape=None, baseline_pa=0.0)
        noise = ambient_pressure(2200 * 60, model, 1).samples
        assert rms(noise) == pytest.approx(1e-2 * np.sqrt(1100), rel=0.02)

    def test_measured_noise_profile_round_trip(self):
        flat = SensorModel(noise_density_pa_rthz=1e-2, noise_shape=None, baseline_pa=0.0)
        first = ambient_pressure(2200 * 30, flat, 1).samples
        profile = characterize_noise(AudioSignal(first, 2200))
        measured = SensorModel(noise_profile=profile, baseline_pa=0.0)
        np.testing.assert_allclose(np.median(measured.noise_density(np.linspace(50, 1000, 50))), 1e-2,
                                   rtol=0.05)
        second = ambient_pressure(2200 * 30, measured, 2).samples
        assert rms(second) == pytest.approx(rms(first), rel=0.05)

    def test_drift(self):
        model = SensorModel(noise_density_pa_rthz=0.0, baseline_pa=0.0, drift_amplitude_pa=0.5,
                            drift_period_s=2.0)
        p = ambient_pressure(2200 * 2, model, 0).samples
        assert p[1100] == pytest.approx(0.5, abs=1e-9)
        assert p[3300] == pytest.approx(-0.5, abs=1e-9)

    def test_default_noise_is_low_frequency_heavy(self):
        noise = ambient_pressure(2200 * 30, SensorModel(baseline_pa=0.0), 5).samples
        spec = np.abs(np.fft.rfft(noise)) ** 2
        f = np.fft.rfftfreq(noise.size, 1 / 2200)
        assert spec[f < 40].sum() > spec[f >= 40].sum()

    def test_sample_at_rate_keeps_duration(self):
        x = np.arange(16001, dtype=float)
        y = sample_at_rate(x, 16000, 2200)
        assert y.size == 2201
        assert y[-1] == pytest.approx(16000.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_distance_monotone_property(d1, d2):
    if abs(d1 - d2) < 1e-6:
        return
    audio = AudioSignal(tone_samples(300, 0.25, 8000), 8000)
    r1 = rms(acoustic_pressure_wave(audio, AcousticSource(distance_m=d1)).samples)
    r2 = rms(acoustic_pressure_wave(audio, AcousticSource(distance_m=d2)).samples)
    assert (r1 > r2) == (d1 < d2)


class TestSineSweep:
    def test_zero_duration(self):
        with pytest.raises(ValueError):
            sine_sweep(1, 2000, 0, 8000)

    def test_bad_frequencies(self):
        with pytest.raises(ValueError):
            sine_sweep(0, 2000, 1, 8000)
        with pytest.raises(ValueError):
            sine_sweep(100, 4000, 1, 8000)
        with pytest.raises(ValueError):
            sine_sweep(500, 100, 1, 8000)

    def test_midpoint_frequency_by_zero_crossings(self):
        rate = 8000
        x = sine_sweep(1, 2000, 10, rate).samples
        # interpolated upward and downward zero crossings within +-10 ms of t=5 s
        i = np.nonzero(np.signbit(x[:-1]) != np.signbit(x[1:]))[0]
        tc = (i + x[i] / (x[i] - x[i + 1])) / rate
        near = tc[np.abs(tc - 5.0) < 0.01]
        freq = (near.size - 1) / (2 * (near[-1] - near[0]))
        assert freq == pytest.approx(1000.5, abs=1.0)

    def test_degenerate_is_pure_tone(self):
        x = sine_sweep(100, 100, 1.0, 8000).samples
        np.testing.assert_allclose(x, tone_samples(100, 1.0, 8000), atol=1e-9)

    def test_unit_amplitude(self):
        x = sine_sweep(1, 1000, 2, 8000).samples
        assert np.max(np.abs(x)) == pytest.approx(1.0, abs=1e-3)


class TestApplyResponse:
    def test_identity(self, rng):
        s = AudioSignal(rng.standard_normal(1000), 2200)
        out = apply_frequency_response(s, FrequencyResponseCurve.flat())
        np.testing.assert_allclose(out.samples, s.samples, atol=1e-9)

    def test_half_gain(self, rng):
        s = AudioSignal(rng.standard_normal(1000), 2200)
        out = apply_frequency_response(s, FrequencyResponseCurve.flat(0.5))
        np.testing.assert_allclose(out.samples, 0.5 * s.samples, atol=1e-9)

    def test_tone_gain(self):
        curve = FrequencyResponseCurve(((100, 1.0), (600, 0.1), (2000, 0.1)))
        x = tone_samples(600, 1.0, 8000)
        out = apply_frequency_response(AudioSignal(x, 8000), curve)
        assert rms(out.samples) / rms(x) == pytest.approx(0.1, rel=0.01)

    def test_keeps_type(self):
        out = apply_frequency_response(PressureTrace(np.ones(10), 100), FrequencyResponseCurve.flat())
        assert isinstance(out, PressureTrace)


class TestDefense:
    def test_dc_passes(self):
        out = defense_lowpass(PressureTrace(np.full(4400, 5.0), 2200))
        np.testing.assert_allclose(out.samples[2200:], 5.0, atol=1e-9)

    def test_400hz_attenuated(self):
        x = tone_samples(400, 2.0, 2200)
        y = defense_lowpass(PressureTrace(x, 2200)).samples
        atten = 20 * np.log10(rms(y[1100:]) / rms(x[1100:]))
        assert atten <= -55

    def test_cutoff_above_nyquist(self):
        with pytest.raises(ValueError):
            defense_lowpass(PressureTrace(np.zeros(100), 2200), cutoff_hz=1100)
