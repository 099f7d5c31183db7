"""File formats: sensor configs, CSV traces and profiles, WAV, manifests.

Every text format starts with a version line ``# dpsaudio <kind> v1`` that
may carry ``key=value`` metadata. Numbers are written with fixed formatting
and LF newlines so identical inputs give byte-identical files.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .reconstruct import EqualizerProfile
from .sensor import AcousticSource, FrequencyResponseCurve, SensorModel
from .signals import AudioSignal, NoiseProfile, PressureTrace

FORMAT_VERSION = "v1"
CONFIG_ENV = "DPSAUDIO_CONFIG_DIR"
DATA_DIR = Path(__file__).parent / "data"


class FormatError(ValueError):
    """A file does not follow the expected schema."""


class ConfigError(ValueError):
    """A configuration file has an unknown or invalid key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _header(kind: str, **meta) -> str:
    parts = [f"# dpsaudio {kind} {FORMAT_VERSION}"]
    parts += [f"{k}={v}" for k, v in meta.items()]
    return " ".join(parts) + "\n"


def _parse_header(line: str, kind: str, path) -> dict:
    tokens = line.strip().split()
    if len(tokens) < 4 or tokens[:2] != ["#", "dpsaudio"] or tokens[2] != kind:
        raise FormatError(f"{path}: expected a '# dpsaudio {kind} {FORMAT_VERSION}' header line")
    if tokens[3] != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported {kind} version {tokens[3]}")
    meta = {}
    for tok in tokens[4:]:
        k, _, v = tok.partition("=")
        meta[k] = v
    return meta


def _write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_rows(path, kind: str, columns: tuple[str, ...]) -> tuple[dict, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    meta = _parse_header(lines[0], kind, path)
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("#")]
    if not body or tuple(c.strip() for c in body[0].split(",")) != columns:
        raise FormatError(f"{path}: expected column header {','.join(columns)}")
    try:
        rows = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    rows = rows.reshape(-1, len(columns))
    return meta, rows


# --- pressure traces -------------------------------------------------------

def write_trace(path, trace: PressureTrace):
    rate = trace.sample_rate
    lines = [_header("pressure-trace", sample_rate_hz=rate), "time_s,pressure_pa\n"]
    lines += [f"{i / rate:.9f},{p:.9f}\n" for i, p in enumerate(trace.samples)]
    _write_text(path, "".join(lines))


def read_trace(path) -> PressureTrace:
    meta, rows = _read_rows(path, "pressure-trace", ("time_s", "pressure_pa"))
    if "sample_rate_hz" not in meta:
        raise FormatError(f"{path}: header lacks sample_rate_hz")
    return PressureTrace(rows[:, 1], int(meta["sample_rate_hz"]))


# --- profiles and curves ---------------------------------------------------

def write_eq_profile(path, profile: EqualizerProfile):
    lines = [
        _header("eq-profile", band_width_hz=f"{profile.band_width_hz:g}",
                start_hz=f"{profile.start_hz:g}", gain_cap=f"{profile.gain_cap:g}"),
        "band_index,gain\n",
    ]
    lines += [f"{i},{g:.9f}\n" for i, g in enumerate(profile.gains)]
    _write_text(path, "".join(lines))


def read_eq_profile(path) -> EqualizerProfile:
    meta, rows = _read_rows(path, "eq-profile", ("band_index", "gain"))
    if not np.array_equal(rows[:, 0], np.arange(rows.shape[0])):
        raise FormatError(f"{path}: band_index must run 0..n-1 in order")
    return EqualizerProfile(
        tuple(rows[:, 1]),
        band_width_hz=float(meta.get("band_width_hz", 25.0)),
        start_hz=float(meta.get("start_hz", 0.0)),
        gain_cap=float(meta.get("gain_cap", 31.6)),
    )


def write_noise_profile(path, profile: NoiseProfile):
    lines = [
        _header("noise-profile", window_size=profile.window_size,
                sample_rate_hz=profile.sample_rate, window=profile.window_kind),
        "bin_index,magnitude\n",
    ]
    lines += [f"{i},{m:.12e}\n" for i, m in enumerate(profile.magnitude)]
    _write_text(path, "".join(lines))


def read_noise_profile(path) -> NoiseProfile:
    meta, rows = _read_rows(path, "noise-profile", ("bin_index", "magnitude"))
    try:
        window_size = int(meta["window_size"])
        rate = int(meta["sample_rate_hz"])
    except KeyError as exc:
        raise FormatError(f"{path}: header lacks {exc.args[0]}") from None
    return NoiseProfile(rows[:, 1], window_size, rate, meta.get("window", "hann"))


def read_response_curve(path, interpolation: str = "logf") -> FrequencyResponseCurve:
    """Two-column CSV ``frequency_hz,gain``; header and ``#`` lines optional."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cols = [c.strip() for c in line.split(",")]
            if cols == ["frequency_hz", "gain"]:
                continue
            if len(cols) != 2:
                raise FormatError(f"{path}:{n}: expected two columns")
            try:
                points.append((float(cols[0]), float(cols[1])))
            except ValueError:
                raise FormatError(f"{path}:{n}: non-numeric value") from None
    return FrequencyResponseCurve(tuple(points), interpolation)


def write_response_curve(path, curve: FrequencyResponseCurve):
    lines = [_header("response-curve"), "frequency_hz,gain\n"]
    lines += [f"{f:g},{g:g}\n" for f, g in curve.points]
    _write_text(path, "".join(lines))


# --- sensor / source configuration ----------------------------------------

_SENSOR_KEYS = {
    "sensor.adc_rate_hz": ("adc_rate_hz", int),
    "sensor.effective_bandwidth_hz": ("effective_bandwidth_hz", float),
    "sensor.baseline_pa": ("baseline_pa", float),
    "sensor.drift_amplitude_pa": ("drift_amplitude_pa", float),
    "sensor.drift_period_s": ("drift_period_s", float),
    "noise.density_pa_rthz": ("noise_density_pa_rthz", float),
}
_SOURCE_KEYS = {
    "source.distance_m": ("distance_m", float),
    "source.spl_db": ("spl_db", float),
    "source.initial_phase_rad": ("initial_phase_rad", float),
    "source.orientation_gain": ("orientation_gain", float),
    "source.speed_of_sound_mps": ("speed_of_sound_mps", float),
    "source.absorption_db_per_m_per_khz": ("absorption_db_per_m_per_khz", float),
}
_FILE_KEYS = ("sensor.response_csv", "sensor.response_interpolation", "noise.shape_csv",
              "noise.profile_csv")
CONFIG_KEYS = tuple(_SENSOR_KEYS) + tuple(_SOURCE_KEYS) + _FILE_KEYS


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` lines with dotted keys; ``#`` starts a comment line."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"line {n}", "expected 'key = value'")
            if key not in CONFIG_KEYS:
                raise ConfigError(key, "unknown configuration key")
            cfg[key] = value.strip()
    return cfg


def resolve_config_path(name) -> Path:
    """Find a config by path, then in ``$DPSAUDIO_CONFIG_DIR``, then among built-ins."""
    p = Path(name)
    if p.exists():
        return p
    candidates = []
    if os.environ.get(CONFIG_ENV):
        candidates.append(Path(os.environ[CONFIG_ENV]) / p)
    candidates += [DATA_DIR / p, DATA_DIR / f"{p}.cfg"]
    for c in candidates:
        if c.exists():
            return c
    raise FileNotFoundError(f"sensor config not found: {name}")


def _typed(key, value, cast):
    try:
        return cast(value)
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r} as {cast.__name__}") from None


def sensor_from_config(cfg: dict, base_dir=".") -> SensorModel:
    base = Path(base_dir)
    kwargs = {attr: _typed(k, cfg[k], cast) for k, (attr, cast) in _SENSOR_KEYS.items() if k in cfg}
    interp = cfg.get("sensor.response_interpolation", "logf")
    try:
        if "sensor.response_csv" in cfg:
            kwargs["response"] = read_response_curve(base / cfg["sensor.response_csv"], interp)
        if "noise.shape_csv" in cfg:
            kwargs["noise_shape"] = read_response_curve(base / cfg["noise.shape_csv"])
        if "noise.profile_csv" in cfg:
            kwargs["noise_profile"] = read_noise_profile(base / cfg["noise.profile_csv"])
        return SensorModel(**kwargs)
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("sensor", str(exc)) from None


def source_from_config(cfg: dict, **overrides) -> AcousticSource:
    kwargs = {attr: _typed(k, cfg[k], cast) for k, (attr, cast) in _SOURCE_KEYS.items() if k in cfg}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return AcousticSource(**kwargs)
    except ValueError as exc:
        raise ConfigError("source", str(exc)) from None


def load_sensor_config(name) -> tuple[SensorModel, AcousticSource, Path]:
    path = resolve_config_path(name)
    cfg = read_config(path)
    return sensor_from_config(cfg, path.parent), source_from_config(cfg), path


# --- audio -------------------------------------------------------------------

def read_wav(path) -> AudioSignal:
    """Mono float signal in [-1, 1]; multichannel files are averaged."""
    rate, data = wavfile.read(path)
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        x = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    return AudioSignal(x, int(rate))


def write_wav(path, signal: AudioSignal):
    """16-bit PCM mono; samples are clipped to [-1, 1]."""
    pcm = np.round(np.clip(signal.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    wavfile.write(path, signal.sample_rate, pcm)


# --- manifests, transcripts, reports ---------------------------------------

def write_manifest(path, params: dict):
    lines = [_header("manifest")]
    for k, v in params.items():
        v = str(v)
        if "\n" in v:
            raise ValueError(f"manifest value for {k} contains a newline")
        lines.append(f"{k}={v}\n")
    _write_text(path, "".join(lines))


def read_manifest(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    _parse_header(lines[0], "manifest", path)
    out = {}
    for ln in lines[1:]:
        if not ln.strip() or ln.startswith("#"):
            continue
        k, sep, v = ln.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed line {ln!r}")
        out[k] = v
    return out


def read_transcripts(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.rstrip("\n") for ln in fh]


def write_wer_report(path, rows):
    """``rows`` are ``(utterance_id, WerBreakdown)`` pairs."""
    lines = [_header("wer-report"), "utterance_id,S,D,I,N,wer\n"]
    for uid, b in rows:
        lines.append(f"{uid},{b.substitutions},{b.deletions},{b.insertions},"
                     f"{b.reference_length},{b.wer:.6f}\n")
    _write_text(path, "".join(lines))
