import numpy as np
import pytest

from dpsaudio.scenario import standard_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scenario():
    return standard_scenario()


def tone_samples(freq, duration, rate, amplitude=1.0, phase=0.0):
    t = np.arange(int(round(duration * rate))) / rate
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def faded(x, rate, fade_s=0.25):
    """Raised-cosine fade in/out so truncation adds no broadband energy."""
    n = int(fade_s * rate)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
    y = x.copy()
    y[:n] *= ramp
    y[-n:] *= ramp[::-1]
    return y


def rms(x):
    return float(np.sqrt(np.mean(np.asarray(x) ** 2)))


# criterion number -> (title, passed, seconds, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, passed, seconds, detail = ACCEPTANCE[num]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status}  {seconds:6.2f} s  {title}: {detail}")
