"""Command line front end.

Subcommands: ``compress``, ``decompress``, ``audio-bench`` and ``pursuit-demo``.
Settings come from built-in defaults, then an optional TOML file
(``--config``; top-level keys or a table named after the subcommand), then
explicit flags.  The effective settings are embedded in every report.

Exit codes: 0 success, 1 other pipeline error, 2 invalid arguments,
3 I/O error, 4 unreachable target, 5 corrupt container.
"""

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CorruptContainerError, SoompError, UnreachableTargetError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("soomp")

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_UNREACHABLE = 4
EXIT_CORRUPT = 5

PRDN_REPORT_TOLERANCE = 0.01

DEFAULTS = {
    "compress": {
        "input": None, "records": None, "data_dir": ".", "format": "auto", "channel": 0,
        "fs": 360.0, "target_prdn": None, "out": None, "out_dir": None, "report": None,
        "peaks": None, "max_level": 4, "workers": 1,
    },
    "decompress": {
        "input": None, "out": None, "reference": None, "format": "auto", "channel": 0,
        "fs": None, "report": None,
    },
    "audio-bench": {
        "input": None, "synthetic": False, "seed": 0, "signals": 1, "length": 32768,
        "fs": 44100.0, "frame_len": 1024, "snr": [20.0, 25.0, 30.0], "repeats": 5,
        "format": "text", "out": None, "report": None,
    },
    "pursuit-demo": {
        "n": 8, "m": 12, "q": 3, "k": None, "seed": 0, "orthonormal": False,
        "algorithm": "soomp",
    },
}


class UsageError(Exception):
    """Invalid settings, reported before any work starts."""


# --------------------------------------------------------------------------
# argument parsing and settings


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def build_parser():
    # Option defaults stay None (SUPPRESS) so that only explicit flags
    # override the config file.
    parser = argparse.ArgumentParser(prog="soomp", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress ECG records to SECG containers",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--input", type=Path, help="MIT-BIH .dat or CSV record")
    p.add_argument("--records", type=_str_list, help="batch mode: comma-separated record ids")
    p.add_argument("--data-dir", type=Path, help="directory holding the batch records")
    p.add_argument("--format", choices=("auto", "mitbih212", "csv"))
    p.add_argument("--channel", type=int)
    p.add_argument("--fs", type=float, help="sampling rate of CSV input (Hz)")
    p.add_argument("--target-prdn", type=float)
    p.add_argument("--out", type=Path, help="container path (single record)")
    p.add_argument("--out-dir", type=Path, help="output directory (batch mode)")
    p.add_argument("--report", type=Path, help="JSON report path")
    p.add_argument("--peaks", type=Path, help="R-peak sample indices, one per line")
    p.add_argument("--max-level", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("decompress", help="decode an SECG container to CSV",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--input", type=Path)
    p.add_argument("--out", type=Path, help="reconstructed CSV path")
    p.add_argument("--reference", type=Path, help="original record; prints the PRDN")
    p.add_argument("--format", choices=("auto", "mitbih212", "csv"))
    p.add_argument("--channel", type=int)
    p.add_argument("--fs", type=float)
    p.add_argument("--report", type=Path)

    p = sub.add_parser("audio-bench", help="compare SOOMP and SOMP on stereo audio",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--input", type=Path, help="stereo WAV file")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--signals", type=int, help="number of synthetic signals")
    p.add_argument("--length", type=int, help="synthetic length in samples")
    p.add_argument("--fs", type=float)
    p.add_argument("--frame-len", type=int)
    p.add_argument("--snr", type=_float_list, help="target SNRs in dB, e.g. 20,25,30")
    p.add_argument("--repeats", type=int)
    p.add_argument("--format", choices=("text", "csv", "json"))
    p.add_argument("--out", type=Path, help="write the table here instead of stdout")
    p.add_argument("--report", type=Path)

    p = sub.add_parser("pursuit-demo", help="print the internals of each pursuit step",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--orthonormal", action="store_true")
    p.add_argument("--algorithm", choices=("soomp", "somp"))
    return parser


def load_config_file(path, command):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: invalid TOML: {exc}") from None
    section = data.get(command, {})
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    flat.update(section)
    return {k.replace("-", "_"): v for k, v in flat.items()}


def effective_config(args):
    """defaults < config file < flags."""
    command = args.command
    config = dict(DEFAULTS[command])
    if args.config is not None:
        for key, value in load_config_file(args.config, command).items():
            if key not in config:
                raise UsageError(f"{args.config}: unknown setting {key!r} for {command}")
            config[key] = value
    for key, value in vars(args).items():
        if key in config:
            config[key] = value
    if isinstance(config.get("snr"), (int, float)):
        config["snr"] = [float(config["snr"])]
    if isinstance(config.get("records"), str):
        config["records"] = _str_list(config["records"])
    return config


def _jsonable(config):
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()}


def _positive(config, key, kind=float):
    value = config[key]
    if not isinstance(value, (int, float)) or value <= 0:
        raise UsageError(f"--{key.replace('_', '-')} must be positive (got {value!r})")
    return kind(value)


# --------------------------------------------------------------------------
# error reporting


def _origin(exc):
    """Module in which ``exc`` was raised."""
    tb = exc.__traceback__
    name = None
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name or type(exc).__module__


def _fail(code, exc, prefix="error"):
    print(f"{prefix} [{_origin(exc)}]: {exc}", file=sys.stderr)
    return code


# --------------------------------------------------------------------------
# compress


def _detect_format(path, fmt):
    if fmt != "auto":
        return fmt
    return "mitbih212" if Path(path).suffix.lower() in (".dat", ".hea") else "csv"


def load_record(path, fmt="auto", channel=0, fs=360.0):
    from .ecg import read_csv_record, read_mitbih212

    path = Path(path)
    if _detect_format(path, fmt) == "mitbih212":
        return read_mitbih212(path.with_suffix(".dat"), channel=channel)
    return read_csv_record(path, fs)


def compress_one(path, record_id, config, out, report_path):
    """Compress one record; returns its report dict (raises on failure)."""
    from .codec import decode_record, encode_record, prdn, raw_size
    from .ecg import read_peaks

    record = load_record(path, config["format"], config["channel"], config["fs"])
    peaks = read_peaks(config["peaks"]) if config.get("peaks") else None
    t0 = time.perf_counter()
    enc = encode_record(record, config["target_prdn"], peaks=peaks,
                        max_level=config["max_level"])
    encode_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    decoded = decode_record(enc.blob)
    decode_time = time.perf_counter() - t0
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(enc.blob)
    achieved = prdn(record.samples, decoded.samples)
    report = {
        "record_id": record_id or record.record_id,
        "input": str(path),
        "output": str(out),
        "target_prdn": config["target_prdn"],
        "achieved_prdn": achieved,
        "approximation_prdn": enc.approx_prdn,
        "converged": bool(abs(achieved - config["target_prdn"]) <= PRDN_REPORT_TOLERANCE),
        "cr": enc.cr,
        "k": enc.k,
        "Q": enc.n_beats,
        "delta": enc.delta,
        "raw_bytes": raw_size(len(record)),
        "bytes": enc.container.size_report(),
        "encode_time": encode_time,
        "decode_time": decode_time,
        "stage_times": enc.timings,
        "config": _jsonable(config),
    }
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2))
    return report


def _compress_job(job):
    """Worker entry point: never raises, returns (report, error, code)."""
    path, record_id, config, out, report_path = job
    try:
        return compress_one(path, record_id, config, out, report_path), None, EXIT_OK
    except Exception as exc:
        return None, f"[{_origin(exc)}]: {exc}", _exit_code(exc)


def _exit_code(exc):
    if isinstance(exc, UnreachableTargetError):
        return EXIT_UNREACHABLE
    if isinstance(exc, CorruptContainerError):
        return EXIT_CORRUPT
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ValueError, UsageError)):
        return EXIT_VALIDATION
    return EXIT_PIPELINE


def _record_path(data_dir, record_id, fmt):
    data_dir = Path(data_dir)
    if fmt in ("auto", "mitbih212") and (data_dir / f"{record_id}.dat").exists():
        return data_dir / f"{record_id}.dat"
    return data_dir / f"{record_id}.csv"


def format_compress_table(reports):
    head = f"{'record':<10}{'target':>8}{'PRDN':>9}{'CR':>9}{'k':>6}{'Q':>7}{'bytes':>9}{'enc s':>8}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(f"{str(r['record_id']):<10}{r['target_prdn']:>8.2f}{r['achieved_prdn']:>9.3f}"
                     f"{r['cr']:>9.2f}{r['k']:>6d}{r['Q']:>7d}{r['bytes']['total']:>9d}"
                     f"{r['encode_time']:>8.2f}")
    return "\n".join(lines)


def cmd_compress(config):
    target = config["target_prdn"]
    if target is None:
        raise UsageError("--target-prdn is required")
    if not isinstance(target, (int, float)) or not 0 < target < 100:
        raise UsageError(f"--target-prdn must lie in (0, 100) (got {target!r})")
    _positive(config, "fs")
    if config["max_level"] not in range(0, 5):
        raise UsageError(f"--max-level must be in 0..4 (got {config['max_level']!r})")
    if config["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    if config["peaks"] is not None and not Path(config["peaks"]).is_file():
        raise FileNotFoundError(f"peak list not found: {config['peaks']}")

    if config["records"]:
        if config["input"] is not None:
            raise UsageError("--input and --records are mutually exclusive")
        out_dir = Path(config["out_dir"] or ".")
        jobs = []
        for rid in config["records"]:
            path = _record_path(config["data_dir"], rid, config["format"])
            if not path.exists():
                raise FileNotFoundError(f"record {rid}: {path} not found")
            jobs.append((path, rid, config, out_dir / f"{rid}.secg", out_dir / f"{rid}.json"))
        return _run_batch(jobs, config)

    if config["input"] is None:
        raise UsageError("compress needs --input or --records")
    path = Path(config["input"])
    if not path.exists() or (_detect_format(path, config["format"]) == "mitbih212"
                             and not path.with_suffix(".hea").exists()):
        raise FileNotFoundError(f"input not found: {path}")
    out = Path(config["out"]) if config["out"] else path.with_suffix(".secg")
    report_path = Path(config["report"]) if config["report"] else out.with_suffix(".json")
    report = compress_one(path, None, config, out, report_path)
    print(format_compress_table([report]))
    if not report["converged"]:
        print(f"target PRDN {target:.2f} not met (achieved {report['achieved_prdn']:.4f})",
              file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


def _run_batch(jobs, config):
    if config["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config["workers"]) as pool:
            results = list(pool.map(_compress_job, jobs))
    else:
        results = [_compress_job(job) for job in jobs]
    reports, code = [], EXIT_OK
    for job, (report, error, status) in sorted(zip(jobs, results), key=lambda jr: jr[0][1]):
        if error is not None:
            print(f"record {job[1]}: error {error}", file=sys.stderr)
            code = max(code, status)
        else:
            reports.append(report)
            if not report["converged"]:
                code = max(code, EXIT_UNREACHABLE)
    summary = {"records": reports, "config": _jsonable(config)}
    out_dir = Path(config["out_dir"] or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = Path(config["report"]) if config["report"] else out_dir / "batch_report.json"
    report_path.write_text(json.dumps(summary, indent=2))
    print(format_compress_table(reports))
    return code


# --------------------------------------------------------------------------
# decompress


def cmd_decompress(config):
    from .codec import CompressedRecord, decode_record, prdn

    if config["input"] is None:
        raise UsageError("decompress needs --input")
    blob = Path(config["input"]).read_bytes()
    container = CompressedRecord.from_bytes(blob)
    record = decode_record(container)
    out = Path(config["out"]) if config["out"] else Path(config["input"]).with_suffix(".csv")
    np.savetxt(out, record.samples, fmt="%.6f")
    report = {"input": str(config["input"]), "output": str(out), "samples": len(record),
              "fs": record.fs, "beats": container.n_beats, "atoms": container.n_atoms,
              "config": _jsonable(config)}
    print(f"decoded {len(record)} samples ({container.n_beats} beats, {container.n_atoms} atoms)"
          f" -> {out}")
    if config["reference"] is not None:
        ref = load_record(config["reference"], config["format"], config["channel"],
                          config["fs"] or record.fs)
        if len(ref) != len(record):
            raise UsageError(f"reference has {len(ref)} samples, container {len(record)}")
        value = prdn(ref.samples, record.samples)
        report["metrics"] = {"prdn": value}
        print(f"PRDN: {value:.4f}")
    if config["report"] is not None:
        Path(config["report"]).write_text(json.dumps(report, indent=2))
    return EXIT_OK


# --------------------------------------------------------------------------
# audio-bench


def cmd_audio_bench(config):
    from .audio import StereoSignal, bench, bench_report, read_wav, stereo_dictionary
    from .synthetic import similar_stereo

    frame_len = _positive(config, "frame_len", int)
    repeats = _positive(config, "repeats", int)
    snrs = config["snr"]
    if not snrs or any(not isinstance(s, (int, float)) or s <= 0 for s in snrs):
        raise UsageError(f"--snr needs positive dB values (got {snrs!r})")
    if config["synthetic"] == (config["input"] is not None):
        raise UsageError("audio-bench needs exactly one of --input or --synthetic")
    if config["synthetic"]:
        _positive(config, "signals", int)
        if config["length"] < frame_len:
            raise UsageError("--length must be at least one frame")
        clips = []
        for i in range(config["signals"]):
            seed = config["seed"] + i
            left, right = similar_stereo(config["length"], config["fs"], seed=seed)
            clips.append((f"seed{seed}", StereoSignal(left, right, config["fs"])))
    else:
        path = Path(config["input"])
        clips = [(path.stem, read_wav(path))]
        if len(clips[0][1]) < frame_len:
            raise UsageError(f"{path} is shorter than one frame")

    dic = stereo_dictionary(frame_len)
    rows = [bench(sig, frame_len, float(snr), repeats, label, dic)
            for snr in snrs for label, sig in clips]
    text = bench_report(rows, config["format"])
    if config["out"] is not None:
        Path(config["out"]).write_text(text + ("" if text.endswith("\n") else "\n"))
    else:
        print(text)
    if config["report"] is not None:
        mean_gain = float(np.mean([r["gain"] for r in rows]))
        Path(config["report"]).write_text(json.dumps(
            {"rows": rows, "mean_gain": mean_gain, "config": _jsonable(config)}, indent=2))
    return EXIT_OK


# --------------------------------------------------------------------------
# pursuit-demo


def demo_steps(n, m, q, k=None, seed=0, orthonormal=False, algorithm="soomp"):
    """Run a small random instance; returns one dict per iteration."""
    from .dictionary import Dictionary, Family, build_rdct
    from .pursuit import SignalSet, StopMode, StopRule, run_somp, run_soomp

    rng = np.random.default_rng(seed)
    if orthonormal:
        dic = build_rdct(n, n)
    else:
        raw = rng.standard_normal((m, n))
        dic = Dictionary(raw / np.linalg.norm(raw, axis=1, keepdims=True), Family.UNION)
    signals = SignalSet(rng.standard_normal((q, n)))
    cap = min(len(dic), n) if k is None else k
    steps = []

    def record(state):
        atoms = dic.atoms[state.selected]
        gram = state.dual_basis @ atoms.T
        steps.append({
            "k": state.k,
            "index": state.selected[-1],
            "mse": float(signals.weights @ np.sum(state.residuals ** 2, axis=1)) / n,
            "gram_deviation": float(np.abs(gram - np.eye(state.k)).max()),
        })

    run = run_soomp if algorithm == "soomp" else run_somp
    result = run(signals, dic, StopRule(StopMode.MAX_ATOMS, max_atoms=cap), callback=record)
    for step, crit in zip(steps, result.criterion_history):
        step["criterion"] = crit
    return steps


def cmd_pursuit_demo(config):
    n = _positive(config, "n", int)
    m = n if config["orthonormal"] else _positive(config, "m", int)
    q = _positive(config, "q", int)
    k = config["k"]
    if k is not None and (k < 1 or k > min(n, m)):
        raise UsageError(f"--k must be in 1..{min(n, m)} (got {k})")
    steps = demo_steps(n, m, q, k, config["seed"], config["orthonormal"], config["algorithm"])
    print(f"{config['algorithm']}: N={n} M={m} Q={q} seed={config['seed']}")
    print(f"{'k':>3}{'index':>7}{'criterion':>14}{'mse':>14}{'gram dev':>12}")
    for s in steps:
        print(f"{s['k']:>3}{s['index']:>7}{s['criterion']:>14.6e}{s['mse']:>14.6e}"
              f"{s['gram_deviation']:>12.2e}")
    return EXIT_OK


COMMANDS = {
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "audio-bench": cmd_audio_bench,
    "pursuit-demo": cmd_pursuit_demo,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = effective_config(args)
        return COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CorruptContainerError as exc:
        return _fail(EXIT_CORRUPT, exc, "corrupt container")
    except UnreachableTargetError as exc:
        return _fail(EXIT_UNREACHABLE, exc, "unreachable target")
    except OSError as exc:
        return _fail(EXIT_IO, exc, "I/O error")
    except (SoompError, ValueError) as exc:
        return _fail(_exit_code(exc), exc)


if __name__ == "__main__":
    sys.exit(main())
