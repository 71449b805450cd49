"""ECG records: reading, R-peak detection, beat segmentation and reassembly.

Heartbeats are cut at the midpoints between consecutive R peaks, so the beats
partition the record exactly.  Each beat is placed in a zero-padded row such
that all R peaks fall in one common column; the row extents are kept so the
record can be rebuilt sample for sample.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import LengthMismatchError, NoPeaksError

log = logging.getLogger(__name__)

REFRACTORY_S = 0.2


@dataclass
class EcgRecord:
    samples: np.ndarray
    fs: float
    record_id: str = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive (got {self.fs})")
        if len(self.samples) < 2 * self.fs:
            raise ValueError(
                f"record too short: {len(self.samples)} samples at {self.fs} Hz (need >= 2 s)"
            )

    @property
    def mean_value(self):
        return float(self.samples.mean())

    def __len__(self):
        return len(self.samples)


@dataclass
class BeatMatrix:
    """Aligned, zero-padded heartbeats.

    ``beats[q, starts[q]:starts[q] + lengths[q]]`` holds the samples of beat q;
    the R peak of every beat sits in column ``peak_col``.
    """

    beats: np.ndarray
    lengths: np.ndarray
    starts: np.ndarray
    peak_col: int

    @property
    def count(self):
        return self.beats.shape[0]

    @property
    def width(self):
        return self.beats.shape[1]

    @property
    def peak_offsets(self):
        return np.full(self.count, self.peak_col, dtype=int)

    @property
    def record_length(self):
        return int(self.lengths.sum())


# --------------------------------------------------------------------------
# R-peak detection


def _bandpass(x, fs):
    hi = min(15.0, 0.45 * fs)
    b, a = sps.butter(3, [5.0 / (fs / 2), hi / (fs / 2)], btype="band")
    return sps.filtfilt(b, a, x)


def detect_r_peaks(record, refractory=REFRACTORY_S):
    """Pan-Tompkins style QRS detector.

    Band-pass (5-15 Hz), five-point derivative, squaring, 150 ms moving-window
    integration, then adaptive signal/noise thresholds with search-back for
    missed beats.  Returns sample indices of R peaks, strictly increasing and at
    least ``refractory`` seconds apart.
    """
    x = np.asarray(record.samples, dtype=float)
    fs = float(record.fs)
    if np.ptp(x) == 0:
        raise NoPeaksError("flat signal: no QRS complexes")

    bp = _bandpass(x - x.mean(), fs)
    deriv = np.convolve(bp, np.array([1, 2, 0, -2, -1]) * (fs / 8.0), mode="same")
    win = max(1, int(round(0.150 * fs)))
    mwi = np.convolve(deriv ** 2, np.ones(win) / win, mode="same")

    gap = max(1, int(round(refractory * fs)))
    cand, _ = sps.find_peaks(mwi, distance=gap)
    if len(cand) == 0:
        raise NoPeaksError("no candidate QRS complexes")

    learn = mwi[: int(2 * fs)]
    spk = 0.25 * learn.max()
    npk = 0.5 * learn.mean()
    thr1 = npk + 0.25 * (spk - npk)

    qrs = []
    rr = []
    last_checked = 0
    for i, c in enumerate(cand):
        v = mwi[c]
        if qrs and len(rr) >= 1:
            rr_avg = np.mean(rr[-8:])
            # search back for a missed beat between the last QRS and c
            if c - qrs[-1] > 1.66 * rr_avg:
                thr2 = 0.5 * thr1
                back = [b for b in cand[last_checked:i] if b - qrs[-1] >= gap and c - b >= gap]
                back = [b for b in back if mwi[b] > thr2]
                if back:
                    b = max(back, key=lambda t: mwi[t])
                    rr.append(b - qrs[-1])
                    qrs.append(b)
                    spk = 0.25 * mwi[b] + 0.75 * spk
        if v > thr1 and (not qrs or c - qrs[-1] >= gap):
            # T-wave check: a candidate soon after a QRS with much lower slope
            if qrs and c - qrs[-1] < 0.36 * fs:
                slope_c = np.max(np.abs(deriv[max(0, c - win):c + 1]))
                p = qrs[-1]
                slope_p = np.max(np.abs(deriv[max(0, p - win):p + 1]))
                if slope_c < 0.5 * slope_p:
                    npk = 0.125 * v + 0.875 * npk
                    thr1 = npk + 0.25 * (spk - npk)
                    continue
            if qrs:
                rr.append(c - qrs[-1])
            qrs.append(c)
            last_checked = i + 1
            spk = 0.125 * v + 0.875 * spk
        else:
            npk = 0.125 * v + 0.875 * npk
        thr1 = npk + 0.25 * (spk - npk)

    # locate the R apex: largest band-passed deflection near each integrator peak
    half = win
    peaks = []
    for c in qrs:
        lo, hi = max(0, c - half), min(len(x), c + half + 1)
        peaks.append(lo + int(np.argmax(np.abs(bp[lo:hi]))))
    peaks = np.unique(peaks)
    keep = [peaks[0]] if len(peaks) else []
    for p in peaks[1:]:
        if p - keep[-1] >= gap:
            keep.append(p)
        elif abs(bp[p]) > abs(bp[keep[-1]]):
            keep[-1] = p
    if len(keep) < 2:
        raise NoPeaksError(f"found {len(keep)} R peak(s); need at least 2")
    return np.array(keep, dtype=int)


# --------------------------------------------------------------------------
# segmentation


def beat_boundaries(n_samples, peaks):
    peaks = np.asarray(peaks, dtype=int)
    mids = (peaks[:-1] + peaks[1:]) // 2
    return np.concatenate([[0], mids, [n_samples]])


def segment_and_align(samples, peaks):
    """Cut ``samples`` at midpoints between ``peaks`` and align the R peaks."""
    x = np.asarray(getattr(samples, "samples", samples), dtype=float)
    peaks = np.asarray(peaks, dtype=int)
    if len(peaks) < 2:
        raise NoPeaksError("segmentation needs at least 2 R peaks")
    if np.any(np.diff(peaks) <= 0) or peaks[0] < 0 or peaks[-1] >= len(x):
        raise ValueError("peaks must be strictly increasing indices inside the record")
    bounds = beat_boundaries(len(x), peaks)
    lengths = np.diff(bounds)
    left = peaks - bounds[:-1]
    right = bounds[1:] - peaks
    col = int(left.max())
    width = col + int(right.max())
    starts = col - left
    beats = np.zeros((len(peaks), width))
    for q in range(len(peaks)):
        beats[q, starts[q]:starts[q] + lengths[q]] = x[bounds[q]:bounds[q + 1]]
    return BeatMatrix(beats, lengths.astype(int), starts.astype(int), col)


def reassemble(beat_matrix, rows=None, record_length=None, mean=0.0):
    """Concatenate the unpadded extent of each row (optionally of ``rows``)."""
    rows = beat_matrix.beats if rows is None else np.asarray(rows)
    lengths, starts = beat_matrix.lengths, beat_matrix.starts
    if rows.shape[0] != len(lengths):
        raise LengthMismatchError(f"{rows.shape[0]} rows for {len(lengths)} beats")
    total = int(lengths.sum())
    if record_length is not None and total != record_length:
        raise LengthMismatchError(
            f"beat lengths sum to {total}, record declares {record_length} samples"
        )
    out = np.concatenate([rows[q, starts[q]:starts[q] + lengths[q]] for q in range(len(lengths))])
    return out + mean if mean else out


# --------------------------------------------------------------------------
# file formats


def _parse_header(path):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    record_line = lines[0].split()
    nsig = int(record_line[1])
    fs = float(record_line[2].split("/")[0]) if len(record_line) > 2 else 250.0
    nsamp = int(record_line[3]) if len(record_line) > 3 else None
    sigs = []
    for ln in lines[1:1 + nsig]:
        parts = ln.split()
        fmt = parts[1].split("x")[0].split(":")[0]
        gain, baseline, units = 200.0, None, None
        if len(parts) > 2:
            m = re.match(r"([-\d.eE+]+)(?:\(([-\d]+)\))?(?:/(\S+))?", parts[2])
            if m:
                gain = float(m.group(1)) or 200.0
                baseline = int(m.group(2)) if m.group(2) else None
                units = m.group(3)
        adczero = int(parts[4]) if len(parts) > 4 else 0
        sigs.append({"file": parts[0], "format": fmt, "gain": gain,
                     "baseline": adczero if baseline is None else baseline,
                     "units": units, "description": " ".join(parts[8:])})
    return {"name": record_line[0], "nsig": nsig, "fs": fs, "nsamp": nsamp, "signals": sigs}


def unpack_212(raw):
    """Decode format-212 bytes: two 12-bit two's complement samples per 3 bytes."""
    b = np.frombuffer(raw, dtype=np.uint8)
    b = b[: len(b) - len(b) % 3].reshape(-1, 3).astype(np.int32)
    s0 = b[:, 0] | ((b[:, 1] & 0x0F) << 8)
    s1 = b[:, 2] | ((b[:, 1] & 0xF0) << 4)
    out = np.empty(2 * len(b), dtype=np.int32)
    out[0::2], out[1::2] = s0, s1
    out[out > 2047] -= 4096
    return out


def pack_212(values):
    v = np.asarray(values, dtype=np.int64)
    if np.any(v < -2048) or np.any(v > 2047):
        raise ValueError("format 212 holds 12-bit samples only")
    if len(v) % 2:
        v = np.append(v, 0)
    v = (v & 0xFFF).reshape(-1, 2)
    out = np.empty((len(v), 3), dtype=np.uint8)
    out[:, 0] = v[:, 0] & 0xFF
    out[:, 1] = ((v[:, 0] >> 8) & 0x0F) | ((v[:, 1] >> 4) & 0xF0)
    out[:, 2] = v[:, 1] & 0xFF
    return out.tobytes()


def read_mitbih212(dat_path, header_path=None, channel=0):
    """Read one channel (ADC units) of a MIT-BIH format-212 record."""
    dat_path = Path(dat_path)
    header_path = Path(header_path) if header_path else dat_path.with_suffix(".hea")
    hdr = _parse_header(header_path)
    if not 0 <= channel < hdr["nsig"]:
        raise ValueError(f"record has {hdr['nsig']} channel(s); channel {channel} requested")
    if hdr["signals"][channel]["format"] != "212":
        raise ValueError(f"unsupported storage format {hdr['signals'][channel]['format']}")
    flat = unpack_212(dat_path.read_bytes())
    nsig = hdr["nsig"]
    flat = flat[: len(flat) - len(flat) % nsig].reshape(-1, nsig)
    samples = flat[:, channel].astype(float)
    if hdr["nsamp"]:
        samples = samples[: hdr["nsamp"]]
    return EcgRecord(samples, hdr["fs"], record_id=hdr["name"])


def write_mitbih212(stem, channels, fs, gain=200.0, baseline=1024, description=None):
    """Write a format-212 record (``stem``.dat / ``stem``.hea)."""
    stem = Path(stem)
    channels = np.atleast_2d(np.asarray(channels, dtype=np.int64))
    nsig, n = channels.shape
    stem.with_suffix(".dat").write_bytes(pack_212(channels.T.ravel()))
    lines = [f"{stem.name} {nsig} {fs:g} {n}"]
    for s in range(nsig):
        desc = description[s] if description else f"ch{s}"
        lines.append(f"{stem.name}.dat 212 {gain:g}({baseline}) 11 {baseline} "
                     f"{int(channels[s, 0])} 0 0 {desc}")
    stem.with_suffix(".hea").write_text("\n".join(lines) + "\n")


def read_csv_record(path, fs, record_id=None):
    """One real sample per line (extra comma-separated columns are ignored)."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, usecols=0)
    return EcgRecord(data.ravel(), fs, record_id=record_id or Path(path).stem)


def read_peaks(path):
    peaks = np.loadtxt(path, dtype=int, ndmin=1)
    return np.asarray(peaks, dtype=int)


def write_peaks(path, peaks):
    np.savetxt(path, np.asarray(peaks, dtype=int), fmt="%d")
