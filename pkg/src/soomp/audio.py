"""Frame-wise simultaneous approximation of stereo audio.

Both channels of each frame share one set of atoms from the union of a
redundant DCT and a redundant DST dictionary (2L atoms each).  Every frame is
approximated until its mean squared error falls below a budget derived from a
target SNR; sparsity is reported as SR = 2N / K, K the total atom count.
"""

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dictionary import build_rdct, build_rdst, union
from .errors import SoompError
from .pursuit import SignalSet, StopMode, StopRule, run_somp, run_soomp

ALGORITHMS = {"soomp": run_soomp, "somp": run_somp}
CHANNEL_WEIGHTS = np.array([0.5, 0.5])


@dataclass
class StereoSignal:
    left: np.ndarray
    right: np.ndarray
    fs: float = 44100.0

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=float).ravel()
        self.right = np.asarray(self.right, dtype=float).ravel()
        if len(self.left) != len(self.right):
            raise ValueError("stereo channels differ in length")

    def __len__(self):
        return len(self.left)


@dataclass
class FrameReport:
    index: int
    atoms: int
    snr: float
    algorithm: str


@dataclass
class StereoApproximation:
    algorithm: str
    frame_len: int
    snr0: float
    frames: list
    snr: float
    sr: float
    total_atoms: int
    n_samples: int
    approximation: np.ndarray = field(repr=False, default=None)


def stereo_dictionary(frame_len):
    return union(build_rdct(frame_len, 2 * frame_len), build_rdst(frame_len, 2 * frame_len))


def frame_signal(signal, frame_len):
    """Split into floor(N / L) disjoint frames: array of shape (I, 2, L)."""
    if frame_len < 1:
        raise ValueError("frame length must be >= 1")
    n_frames = len(signal) // frame_len
    used = n_frames * frame_len
    chans = np.vstack([signal.left[:used], signal.right[:used]])
    return chans.reshape(2, n_frames, frame_len).transpose(1, 0, 2)


def frame_tolerance(frame, snr0):
    """rho_i = 10^(-snr0/10) * sum_q 1/2 ||f_i{q}||^2."""
    frame = np.asarray(frame, dtype=float)
    return 10.0 ** (-snr0 / 10.0) * 0.5 * float(np.sum(frame * frame))


def _snr(signal_energy, error_energy):
    if error_energy == 0:
        return float("inf")
    if signal_energy == 0:
        return float("nan")
    return 10.0 * np.log10(signal_energy / error_energy)


def approximate_stereo(signal, frame_len, snr0, algorithm="soomp", dictionary=None):
    run = ALGORITHMS[algorithm]
    dic = dictionary if dictionary is not None else stereo_dictionary(frame_len)
    frames = frame_signal(signal, frame_len)
    approx = np.zeros_like(frames)
    reports = []
    for i, frame in enumerate(frames):
        rho = frame_tolerance(frame, snr0)
        energy = 0.5 * float(np.sum(frame * frame))
        if rho == 0:
            reports.append(FrameReport(i, 0, float("nan"), algorithm))
            continue
        try:
            result = run(SignalSet(frame, CHANNEL_WEIGHTS), dic, StopRule(StopMode.SQUARED, rho))
        except SoompError as exc:
            exc.frame = i
            exc.args = (f"frame {i}: {exc}",) + exc.args[1:]
            raise
        approx[i] = frame - result.residuals
        err = 0.5 * float(np.sum(result.residuals ** 2))
        reports.append(FrameReport(i, result.iterations, _snr(energy, err), algorithm))
    total = sum(r.atoms for r in reports)
    n_samples = frames.shape[0] * frame_len
    err = frames - approx
    snr = _snr(float(np.sum(frames ** 2)), float(np.sum(err ** 2)))
    sr = 2 * n_samples / total if total else float("inf")
    joined = approx.transpose(1, 0, 2).reshape(2, -1)
    return StereoApproximation(algorithm, frame_len, snr0, reports, snr, sr, total,
                               n_samples, joined)


def sr_gain(sr_somp, sr_soomp):
    """Percentage gain of the second SR over the first."""
    return 100.0 * (sr_soomp - sr_somp) / sr_somp


def bench(signal, frame_len, snr0, repeats=5, label="signal", dictionary=None):
    """Run both algorithms ``repeats`` times; one row of the comparison table."""
    dic = dictionary if dictionary is not None else stereo_dictionary(frame_len)
    row = {"clip": label, "snr0": snr0}
    for name in ("somp", "soomp"):
        times, result = [], None
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            result = approximate_stereo(signal, frame_len, snr0, name, dic)
            times.append(time.perf_counter() - t0)
        row[f"sr_{name}"] = result.sr
        row[f"snr_{name}"] = result.snr
        row[f"atoms_{name}"] = result.total_atoms
        row[f"time_{name}"] = float(np.mean(times))
        row[f"time_std_{name}"] = float(np.std(times)) if len(times) > 1 else 0.0
    row["gain"] = sr_gain(row["sr_somp"], row["sr_soomp"])
    return row


TABLE_COLUMNS = ("clip", "snr0", "sr_somp", "sr_soomp", "gain",
                 "time_somp", "time_std_somp", "time_soomp", "time_std_soomp")


def bench_report(rows, fmt="text"):
    """Render rows from :func:`bench` as aligned text, CSV or JSON."""
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    head = f"{'clip':<12}{'SNR':>6}{'SOMP':>9}{'SOOMP':>9}{'Gain':>9}" \
           f"{'Time(1)':>10}{'std':>8}{'Time(2)':>10}{'std':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{str(r['clip']):<12}{r['snr0']:>4g}dB{r['sr_somp']:>9.1f}{r['sr_soomp']:>9.1f}"
            f"{r['gain']:>8.1f}%{r['time_somp']:>9.3f}s{r['time_std_somp']:>8.3f}"
            f"{r['time_soomp']:>9.3f}s{r['time_std_soomp']:>8.3f}"
        )
    return "\n".join(lines)


def read_wav(path):
    """16-bit PCM stereo WAV scaled to [-1, 1)."""
    from scipy.io import wavfile

    fs, data = wavfile.read(path)
    channels = 1 if data.ndim == 1 else data.shape[1]
    if channels < 2:
        raise ValueError(f"{path}: expected a stereo file, got {channels} channel")
    if data.dtype == np.int16:
        data = data.astype(float) / 32768.0
    else:
        data = data.astype(float)
    return StereoSignal(data[:, 0], data[:, 1], float(fs))


def write_wav(path, signal):
    from scipy.io import wavfile

    pcm = np.clip(np.round(np.vstack([signal.left, signal.right]).T * 32768), -32768, 32767)
    wavfile.write(path, int(signal.fs), pcm.astype(np.int16))


def frame_reports_dict(result):
    return [asdict(f) for f in result.frames]
