"""Whole-record ECG encoder and decoder.

Encoding: subtract the record mean, locate R peaks, cut and align the beats,
approximate all beats in one common subspace of a CDF 9/7 dictionary up to
80% of the target PRDN, DCT the coefficient columns, then pick the
quantization step by bisection so that the fully decoded record hits the
target PRDN.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .. import dictionary as dictmod
from ..ecg import BeatMatrix, EcgRecord, detect_r_peaks, reassemble, segment_and_align
from ..errors import (
    CorruptContainerError,
    DegenerateSignalError,
    MalformedStreamError,
    UnreachableTargetError,
)
from ..pursuit import ApproximationResult, DictionaryExhaustedError, SignalSet, StopMode, StopRule, run_soomp
from .container import CompressedRecord
from .metrics import compression_ratio, prdn, raw_size
from .quantize import QuantizedStreams, dequantize, quantize
from .transform import inverse_transform_columns, transform_columns

log = logging.getLogger(__name__)

APPROX_FRACTION = 0.8
PRDN_TOLERANCE = 0.005
MAX_BISECTIONS = 60
GRID_POINTS = 1025


@dataclass
class EncodeResult:
    container: CompressedRecord
    blob: bytes
    reconstruction: np.ndarray
    target_prdn: float
    prdn: float
    approx_prdn: float
    delta: float
    beats: BeatMatrix
    pursuit: ApproximationResult
    peaks: np.ndarray
    converged: bool
    bisection_steps: int
    timings: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.pursuit.iterations

    @property
    def n_beats(self):
        return self.beats.count

    @property
    def cr(self):
        return compression_ratio(raw_size(len(self.reconstruction)), len(self.blob))


def approximation_tolerance(beats, target_prdn, fraction=APPROX_FRACTION):
    """rho = (fraction * target / 100) * mean_q ||f_q - mean(f_q)||."""
    f = beats.beats
    spread = np.linalg.norm(f - f.mean(axis=1, keepdims=True), axis=1)
    return fraction * target_prdn / 100.0 * spread.mean()


def _geometry(beat_lengths, peak_offsets, peak_col, width):
    lengths = np.asarray(beat_lengths, dtype=int)
    starts = peak_col - np.asarray(peak_offsets, dtype=int)
    return BeatMatrix(np.zeros((0, width)), lengths, starts, int(peak_col))


def reconstruct(streams, n_beats, atoms, geometry, mean):
    """Dequantize, invert the column DCT, rebuild beats and reassemble."""
    k = len(atoms)
    b = dequantize(streams, n_beats, k)
    c = inverse_transform_columns(b) if k else np.zeros((n_beats, 0))
    rows = c @ atoms
    return reassemble(geometry, rows) + mean


def encode_record(record, target_prdn, peaks=None, max_level=dictmod.MAX_LEVEL,
                  tolerance=PRDN_TOLERANCE):
    """Compress ``record`` so that the decoded PRDN equals ``target_prdn``."""
    if not 0 < target_prdn < 100:
        raise ValueError(f"target PRDN must lie in (0, 100) (got {target_prdn})")
    timings = {}
    t0 = time.perf_counter()
    x = record.samples
    mean = float(x.mean())
    centred = x - mean
    if np.ptp(centred) == 0:
        raise DegenerateSignalError("constant record")
    if peaks is None:
        peaks = detect_r_peaks(EcgRecord(centred, record.fs))
    peaks = np.asarray(peaks, dtype=int)
    beats = segment_and_align(centred, peaks)
    timings["segmentation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    width = max(beats.width, 16)
    if width != beats.width:
        beats = BeatMatrix(np.pad(beats.beats, ((0, 0), (0, width - beats.width))),
                           beats.lengths, beats.starts, beats.peak_col)
    dic = dictmod.build_cdf97(width, max_level)
    rho = approximation_tolerance(beats, target_prdn)
    signals = SignalSet(beats.beats)
    try:
        approx = run_soomp(signals, dic, StopRule(StopMode.NORM, rho))
    except DictionaryExhaustedError as exc:
        log.warning("dictionary exhausted after %d atoms", exc.result.iterations)
        approx = exc.result
    timings["approximation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    atoms = dic.atoms[approx.indices]
    b = transform_columns(approx.coefficients) if approx.iterations else np.zeros((beats.count, 0))
    geometry = _geometry(beats.lengths, beats.peak_col - beats.starts, beats.peak_col, width)

    def decoded_prdn(delta):
        rec = reconstruct(quantize(b, delta), beats.count, atoms, geometry, mean)
        return prdn(x, rec)

    approx_rows = approx.coefficients @ atoms
    approx_prdn = prdn(x, reassemble(beats, approx_rows) + mean)
    delta, achieved, converged, steps = _search_delta(decoded_prdn, b, target_prdn, tolerance,
                                                      approx_prdn)
    timings["quantization"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    streams = quantize(b, delta)
    container = CompressedRecord(
        family=int(dictmod.Family.CDF97), dict_dim=width, dict_param=max_level,
        n_beats=beats.count, n_atoms=approx.iterations, delta=delta, mean=mean,
        record_length=len(x), fs=float(record.fs), peak_col=beats.peak_col,
        atom_indices=approx.indices, magnitudes=streams.magnitudes, signs=streams.signs,
        index_deltas=streams.index_deltas, beat_lengths=beats.lengths,
        peak_offsets=beats.peak_col - beats.starts,
    )
    blob = container.to_bytes()
    reconstruction = reconstruct(streams, beats.count, atoms, geometry, mean)
    timings["entropy_coding"] = time.perf_counter() - t0
    return EncodeResult(container, blob, reconstruction, target_prdn, prdn(x, reconstruction),
                        approx_prdn, delta, beats, approx, peaks, converged, steps, timings)


def _search_delta(decoded_prdn, b, target, tolerance, approx_prdn):
    """Bisection (geometric) on the quantization step.

    Returns (delta, achieved PRDN, converged flag, evaluations).
    """
    bmax = float(np.abs(b).max()) if b.size else 0.0
    if bmax == 0.0:
        raise UnreachableTargetError("no nonzero coefficients to quantize", approx_prdn)
    lo, hi = 1e-6 * bmax, bmax
    p_lo = decoded_prdn(lo)
    steps = 1
    if p_lo > target + tolerance:
        raise UnreachableTargetError(
            f"target PRDN {target:.2f} unreachable: approximation alone gives {p_lo:.4f}", p_lo)
    best = (abs(p_lo - target), lo, p_lo)
    if best[0] <= tolerance:
        return lo, p_lo, True, steps
    p_hi = decoded_prdn(hi)
    steps += 1
    while p_hi < target:
        lo, hi = hi, 2 * hi
        p_hi = decoded_prdn(hi)
        steps += 1
        if hi > 1e6 * bmax:
            raise UnreachableTargetError(f"target PRDN {target:.2f} above the coarsest setting", p_hi)
    best = min(best, (abs(p_hi - target), hi, p_hi))

    for _ in range(MAX_BISECTIONS):
        mid = np.sqrt(lo * hi)
        p = decoded_prdn(mid)
        steps += 1
        best = min(best, (abs(p - target), mid, p))
        if abs(p - target) <= tolerance:
            return mid, p, True, steps
        if p < target:
            lo = mid
        else:
            hi = mid

    # Stalled on a jump of PRDN(delta): scan a neighbourhood of the bracket for
    # another crossing of the target.
    log.info("bisection stalled within %.3g of the target; scanning around delta=%.4g",
             best[0], best[1])
    centre = best[1]
    for spread in (1.05, 1.25, 2.0):
        for d in np.geomspace(centre / spread, centre * spread, GRID_POINTS):
            p = decoded_prdn(d)
            steps += 1
            best = min(best, (abs(p - target), d, p))
        if best[0] <= tolerance:
            break
    err, delta, p = best
    return delta, p, err <= tolerance, steps


def decode_record(blob):
    """Invert :func:`encode_record`; accepts container bytes or a CompressedRecord."""
    container = blob if isinstance(blob, CompressedRecord) else CompressedRecord.from_bytes(blob)
    try:
        dic = dictmod.rebuild(container.family, container.dict_dim, container.dict_param)
    except ValueError as exc:
        raise CorruptContainerError(f"cannot rebuild dictionary: {exc}") from None
    idx = np.asarray(container.atom_indices, dtype=int)
    if len(idx) and idx.max() >= len(dic):
        raise CorruptContainerError("atom index outside the dictionary")
    streams = QuantizedStreams(container.magnitudes, container.signs, container.index_deltas,
                               container.delta)
    geometry = _geometry(container.beat_lengths, container.peak_offsets, container.peak_col,
                         container.dict_dim)
    try:
        samples = reconstruct(streams, container.n_beats, dic.atoms[idx], geometry, container.mean)
    except MalformedStreamError as exc:
        raise CorruptContainerError(str(exc)) from None
    return EcgRecord(samples, container.fs)
