"""Command-line front end.

Subcommands::

    dpsaudio simulate      audio -> pressure trace CSV
    dpsaudio noise-profile noise trace CSV -> noise profile CSV
    dpsaudio calibrate     sweep pair (or --auto) -> equalizer profile CSV
    dpsaudio reconstruct   trace + profiles -> WAV
    dpsaudio evaluate      wer | snr reports
    dpsaudio scenario      write the standard synthetic scenario files
    dpsaudio rerun         repeat a run from its manifest

Every run writes ``<output>.manifest`` with its effective parameters.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .metrics import snr_reference, tokenize, wer
from .reconstruct import (
    STAGE_NAMES,
    STAGES,
    HpssParams,
    PipelineConfig,
    SubtractionParams,
    calibrate_equalizer,
    ds1_stages,
    noise_profile_from_trace,
)
from .scenario import DEFAULT_SEED, auto_calibrate, downsample_reference, standard_scenario
from .sensor import defense_lowpass, simulate_sensor
from .signals import AudioSignal, normalize

log = logging.getLogger("dpsaudio")

EXIT_USAGE = 2


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


class Outputs:
    """Tracks written files so a failed run can remove its partial outputs."""

    def __init__(self):
        self.paths: list[Path] = []

    def add(self, path) -> Path:
        p = Path(path)
        self.paths.append(p)
        return p

    def cleanup(self):
        for p in self.paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CLIError(f"input not found: {p}")
    return p


def _manifest_path(out: Path) -> Path:
    return out.with_suffix(".manifest")


def _load_sensor(name):
    try:
        return io.load_sensor_config(name)
    except FileNotFoundError as exc:
        raise CLIError(str(exc)) from None
    except io.ConfigError as exc:
        raise CLIError(f"invalid sensor config key {exc}") from None


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        highpass_cutoff_hz=args.cutoff,
        hpss=HpssParams(window_size=args.window, hop=args.hop, time_kernel=args.time_kernel,
                        freq_kernel=args.freq_kernel, n_iter=args.n_iter, mask_kind=args.mask),
        subtraction=SubtractionParams(args.alpha_harmonic, args.alpha_percussive, args.floor),
    )


def _pipeline_params(args) -> dict:
    return {
        "cutoff": args.cutoff, "window": args.window, "hop": args.hop,
        "time-kernel": args.time_kernel, "freq-kernel": args.freq_kernel, "n-iter": args.n_iter,
        "mask": args.mask, "alpha-harmonic": args.alpha_harmonic,
        "alpha-percussive": args.alpha_percussive, "floor": args.floor,
    }


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _targets(inputs, out, suffix) -> list[tuple[Path, Path]]:
    """Pair inputs with outputs; several inputs need ``--out`` to be a directory."""
    out = Path(out)
    if len(inputs) == 1 and not out.is_dir():
        return [(Path(inputs[0]), out)]
    if not out.is_dir():
        raise CLIError(f"--out must be an existing directory for multiple inputs: {out}")
    return [(Path(p), out / (Path(p).stem + suffix)) for p in inputs]


# --- simulate -----------------------------------------------------------------

def cmd_simulate(args, outputs: Outputs) -> int:
    if not args.inputs and args.silence is None:
        raise CLIError("simulate needs --in FILE or --silence SECONDS")
    model, source, cfg_path = _load_sensor(args.sensor)
    overrides = {k: v for k, v in (("distance_m", args.distance), ("spl_db", args.spl)) if v is not None}
    try:
        source = replace(source, **overrides)
    except ValueError as exc:
        raise CLIError(f"invalid source parameter: {exc}") from None

    if args.silence is not None:
        audio_rate = max(16000, model.adc_rate_hz)
        jobs = [(None, Path(args.out))]
    else:
        for p in args.inputs:
            _existing(p)
        jobs = _targets(args.inputs, args.out, ".csv")

    def run(job):
        src, out = job
        if src is None:
            audio = AudioSignal(np.zeros(int(round(args.silence * audio_rate))), audio_rate)
        else:
            audio = io.read_wav(src)
        try:
            trace = simulate_sensor(audio, source, model, args.seed)
        except ValueError as exc:
            raise CLIError(f"{src}: {exc}") from None
        if args.defense_cutoff is not None:
            trace = defense_lowpass(trace, args.defense_cutoff)
        io.write_trace(outputs.add(out), trace)
        params = {"command": "simulate"}
        if src is None:
            params["silence"] = args.silence
        else:
            params["in"] = src.resolve()
        params.update({"sensor": cfg_path.resolve(), "distance": source.distance_m,
                       "spl": source.spl_db, "seed": args.seed})
        if args.defense_cutoff is not None:
            params["defense-cutoff"] = args.defense_cutoff
        params["out"] = out.resolve()
        io.write_manifest(outputs.add(_manifest_path(out)), params)
        log.info("wrote %s (%d samples at %d Hz)", out, trace.samples.size, trace.sample_rate)

    _map_jobs(run, jobs, args.jobs)
    return 0


# --- noise-profile ------------------------------------------------------------

def cmd_noise_profile(args, outputs: Outputs) -> int:
    trace = io.read_trace(_existing(args.trace))
    config = _pipeline_config(args)
    try:
        profile = noise_profile_from_trace(trace, config)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    out = Path(args.out)
    io.write_noise_profile(outputs.add(out), profile)
    io.write_manifest(outputs.add(_manifest_path(out)), {
        "command": "noise-profile", "trace": Path(args.trace).resolve(),
        **_pipeline_params(args), "out": out.resolve(),
    })
    return 0


# --- calibrate ----------------------------------------------------------------

def cmd_calibrate(args, outputs: Outputs) -> int:
    if args.range_hz is not None and not np.isclose(args.bands * args.band_width, args.range_hz):
        raise CLIError(
            f"{args.bands} bands x {args.band_width} Hz = {args.bands * args.band_width} Hz "
            f"does not cover the requested range of {args.range_hz} Hz"
        )
    params = {"command": "calibrate"}
    try:
        if args.auto:
            model, source, cfg_path = _load_sensor(args.sensor)
            config = PipelineConfig(highpass_cutoff_hz=args.cutoff)
            top = args.start + args.bands * args.band_width
            profile = auto_calibrate(model, source, config, seed=args.seed,
                                     duration_s=args.sweep_duration, f_end_hz=top,
                                     n_bands=args.bands, band_width_hz=args.band_width,
                                     start_hz=args.start, gain_cap=args.gain_cap)
            params.update({"auto": True, "sensor": cfg_path.resolve(), "seed": args.seed,
                           "cutoff": args.cutoff, "sweep-duration": args.sweep_duration})
        else:
            if not (args.reference and args.recovered):
                raise CLIError("calibrate needs --auto or both --reference and --recovered")
            ref = io.read_wav(_existing(args.reference))
            rec = io.read_wav(_existing(args.recovered))
            profile = calibrate_equalizer(ref, rec, args.bands, args.band_width, args.start,
                                          args.gain_cap)
            params.update({"reference": Path(args.reference).resolve(),
                           "recovered": Path(args.recovered).resolve()})
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    params.update({"bands": args.bands, "band-width": args.band_width, "start": args.start,
                   "gain-cap": args.gain_cap})
    out = Path(args.out)
    io.write_eq_profile(outputs.add(out), profile)
    params["out"] = out.resolve()
    io.write_manifest(outputs.add(_manifest_path(out)), params)
    return 0


# --- reconstruct --------------------------------------------------------------

def cmd_reconstruct(args, outputs: Outputs) -> int:
    for p in args.traces:
        _existing(p)
    noise = io.read_noise_profile(_existing(args.noise))
    profile = io.read_eq_profile(_existing(args.eq))
    config = _pipeline_config(args)

    def run(job):
        src, out = job
        trace = io.read_trace(src)
        if trace.sample_rate != noise.sample_rate:
            raise CLIError(
                f"rate mismatch between trace {src} ({trace.sample_rate} Hz) and "
                f"noise profile {args.noise} ({noise.sample_rate} Hz)"
            )
        try:
            stages = ds1_stages(trace, noise, profile, config)
        except ValueError as exc:
            raise CLIError(f"{src}: {exc}") from None
        io.write_wav(outputs.add(out), stages["E"])
        if args.emit_stages:
            for key in STAGES:
                stage_out = out.with_name(f"{out.stem}_{key}_{STAGE_NAMES[key]}.wav")
                io.write_wav(outputs.add(stage_out), normalize(stages[key], config.target_peak))
        io.write_manifest(outputs.add(_manifest_path(out)), {
            "command": "reconstruct", "trace": src.resolve(), "noise": Path(args.noise).resolve(),
            "eq": Path(args.eq).resolve(), **_pipeline_params(args),
            "emit-stages": bool(args.emit_stages), "out": out.resolve(),
        })

    _map_jobs(run, _targets(args.traces, args.out, ".wav"), args.jobs)
    return 0


# --- evaluate -----------------------------------------------------------------

def _evaluate_wer(args, outputs: Outputs):
    refs = io.read_transcripts(_existing(args.ref))
    hyps = io.read_transcripts(_existing(args.hyp))
    if len(refs) != len(hyps):
        raise CLIError(f"unpaired transcripts: {len(refs)} reference lines vs {len(hyps)} hypothesis lines")
    rows = []
    for n, (r, h) in enumerate(zip(refs, hyps), 1):
        ref = tokenize(r)
        if not ref.words:
            raise CLIError(f"{args.ref}: line {n} has an empty reference")
        rows.append((n, wer(ref, tokenize(h))))
    out = Path(args.out)
    io.write_wer_report(outputs.add(out), rows)
    io.write_manifest(outputs.add(_manifest_path(out)), {
        "command": "evaluate wer", "ref": Path(args.ref).resolve(),
        "hyp": Path(args.hyp).resolve(), "out": out.resolve(),
    })


def _evaluate_snr(args, outputs: Outputs):
    out = Path(args.out)
    reference = io.read_wav(_existing(args.reference))
    params = {"command": "evaluate snr"}
    if args.staged:
        if not (args.trace and args.noise and args.eq):
            raise CLIError("--staged needs --trace, --noise and --eq")
        trace = io.read_trace(_existing(args.trace))
        noise = io.read_noise_profile(_existing(args.noise))
        profile = io.read_eq_profile(_existing(args.eq))
        if noise.sample_rate != trace.sample_rate:
            raise CLIError(f"rate mismatch between trace ({trace.sample_rate} Hz) "
                           f"and noise profile ({noise.sample_rate} Hz)")
        config = _pipeline_config(args)
        stages = ds1_stages(trace, noise, profile, config)
        ref = _align_reference(reference, trace.sample_rate, trace.samples.size)
        rows = [(f"{k}_{STAGE_NAMES[k]}", snr_reference(stages[k], ref)) for k in STAGES[1:]]
        params.update({"staged": True, "trace": Path(args.trace).resolve(),
                       "noise": Path(args.noise).resolve(), "eq": Path(args.eq).resolve(),
                       **_pipeline_params(args)})
    else:
        if not args.signal:
            raise CLIError("evaluate snr needs --signal (or --staged)")
        signal = io.read_wav(_existing(args.signal))
        ref = _align_reference(reference, signal.sample_rate, signal.samples.size)
        rows = [(Path(args.signal).name, snr_reference(signal, ref))]
        params["signal"] = Path(args.signal).resolve()
    params["reference"] = Path(args.reference).resolve()
    lines = ["# dpsaudio snr-report v1\n", "item,snr_db\n"]
    lines += [f"{name},{value:.6f}\n" for name, value in rows]
    with open(outputs.add(out), "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)
    params["out"] = out.resolve()
    io.write_manifest(outputs.add(_manifest_path(out)), params)
    for name, value in rows:
        print(f"{name}: {value:.3f} dB")


def _align_reference(reference: AudioSignal, rate: int, n: int) -> AudioSignal:
    if reference.sample_rate != rate:
        return downsample_reference(reference, rate, n)
    if reference.samples.size != n:
        raise CLIError(f"unpaired files: signal has {n} samples, reference {reference.samples.size}")
    return reference


def cmd_evaluate(args, outputs: Outputs) -> int:
    if args.metric == "wer":
        _evaluate_wer(args, outputs)
    else:
        _evaluate_snr(args, outputs)
    return 0


# --- scenario -----------------------------------------------------------------

def cmd_scenario(args, outputs: Outputs) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = standard_scenario(seed=args.seed)
    io.write_wav(outputs.add(out / "clean.wav"), sc.clean)
    io.write_wav(outputs.add(out / "reference.wav"), normalize(sc.reference, 0.5))
    io.write_trace(outputs.add(out / "trace.csv"), sc.trace)
    io.write_trace(outputs.add(out / "noise_trace.csv"), sc.noise_trace)
    io.write_noise_profile(outputs.add(out / "noise.csv"), sc.noise)
    io.write_eq_profile(outputs.add(out / "eq.csv"), sc.profile)
    io.write_manifest(outputs.add(out / "scenario.manifest"), {
        "command": "scenario", "seed": args.seed, "out-dir": out.resolve(),
    })
    return 0


# --- rerun --------------------------------------------------------------------

def cmd_rerun(args, outputs: Outputs) -> int:
    params = io.read_manifest(_existing(args.manifest))
    command = params.pop("command", None)
    if not command:
        raise CLIError(f"{args.manifest}: manifest has no command")
    argv = command.split()
    for key, value in params.items():
        if value == "True":
            argv.append(f"--{key}")
        elif value == "False":
            continue
        else:
            argv += [f"--{key}", value]
    log.info("rerun: %s", " ".join(argv))
    return main(argv)


# --- parser -------------------------------------------------------------------

def _add_pipeline_args(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--cutoff", type=float, default=40.0, help="high-pass cutoff in Hz")
    g.add_argument("--window", type=int, default=256, help="STFT window size (samples)")
    g.add_argument("--hop", type=int, default=64, help="STFT hop (samples)")
    g.add_argument("--time-kernel", type=int, default=17)
    g.add_argument("--freq-kernel", type=int, default=17)
    g.add_argument("--n-iter", type=int, default=1)
    g.add_argument("--mask", choices=("ratio", "binary"), default="ratio")
    g.add_argument("--alpha-harmonic", type=float, default=1.0)
    g.add_argument("--alpha-percussive", type=float, default=0.3)
    g.add_argument("--floor", type=float, default=0.01)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsaudio", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a pressure sensor recording of audio")
    p.add_argument("--in", dest="inputs", nargs="+", help="input WAV file(s)")
    p.add_argument("--silence", type=float, help="simulate N seconds without sound instead")
    p.add_argument("--sensor", default="sdp800", help="sensor config file or built-in name")
    p.add_argument("--distance", type=float, help="source distance in m (overrides config)")
    p.add_argument("--spl", type=float, help="SPL in dB of a unit-amplitude stimulus")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--defense-cutoff", type=float, help="apply the low-pass countermeasure")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("noise-profile", help="characterize a sound-free pressure trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_noise_profile)

    p = sub.add_parser("calibrate", help="derive equalizer band gains")
    p.add_argument("--auto", action="store_true", help="simulate a sweep through --sensor")
    p.add_argument("--sensor", default="sdp800")
    p.add_argument("--reference")
    p.add_argument("--recovered")
    p.add_argument("--bands", type=int, default=40)
    p.add_argument("--band-width", type=float, default=25.0)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--range-hz", type=float, help="expected bands x band-width coverage")
    p.add_argument("--gain-cap", type=float, default=31.6)
    p.add_argument("--cutoff", type=float, default=40.0)
    p.add_argument("--sweep-duration", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("reconstruct", help="recover audio from pressure trace(s)")
    p.add_argument("--trace", dest="traces", nargs="+", required=True)
    p.add_argument("--noise", required=True, help="noise profile CSV")
    p.add_argument("--eq", required=True, help="equalizer profile CSV")
    p.add_argument("--emit-stages", action="store_true", help="also write one WAV per stage")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="WER or SNR reports")
    p.add_argument("metric", choices=("wer", "snr"))
    p.add_argument("--ref", help="reference transcripts, one utterance per line")
    p.add_argument("--hyp", help="hypothesis transcripts")
    p.add_argument("--signal")
    p.add_argument("--reference", help="clean reference WAV")
    p.add_argument("--staged", action="store_true", help="SNR after each pipeline stage")
    p.add_argument("--trace")
    p.add_argument("--noise")
    p.add_argument("--eq")
    p.add_argument("--out", required=True)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scenario", help="write the standard synthetic scenario")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    if args.command == "evaluate":
        needed = ("ref", "hyp") if args.metric == "wer" else ("reference",)
        missing = [f"--{n}" for n in needed if getattr(args, n) is None]
        if missing:
            parser.error(f"evaluate {args.metric} requires {', '.join(missing)}")
    outputs = Outputs()
    try:
        return args.func(args, outputs)
    except CLIError as exc:
        outputs.cleanup()
        print(f"dpsaudio: error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        outputs.cleanup()
        print(f"dpsaudio: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        outputs.cleanup()
        raise


if __name__ == "__main__":
    sys.exit(main())
