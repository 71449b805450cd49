"""Quality and size metrics."""

import numpy as np

from ..errors import DegenerateSignalError, LengthMismatchError

RAW_BYTES_PER_SAMPLE = 2


def prdn(original, reconstructed):
    """100 * ||f - f_a|| / ||f - mean(f)||, in percent."""
    f = np.asarray(original, dtype=float)
    fa = np.asarray(reconstructed, dtype=float)
    if f.shape != fa.shape:
        raise LengthMismatchError(f"shapes differ: {f.shape} vs {fa.shape}")
    denom = np.linalg.norm(f - f.mean())
    if denom == 0:
        raise DegenerateSignalError("PRDN is undefined for a constant signal")
    return 100.0 * np.linalg.norm(f - fa) / denom


def prdn_per_beat(beat_matrix, approx):
    """PRDN of every (padded) beat row against its approximation."""
    f = beat_matrix.beats
    approx = np.asarray(approx, dtype=float)
    if approx.shape != f.shape:
        raise LengthMismatchError(f"shapes differ: {f.shape} vs {approx.shape}")
    denom = np.linalg.norm(f - f.mean(axis=1, keepdims=True), axis=1)
    if np.any(denom == 0):
        raise DegenerateSignalError("a beat is constant; per-beat PRDN undefined")
    return 100.0 * np.linalg.norm(f - approx, axis=1) / denom


def compression_ratio(raw_bytes, compressed_bytes):
    return raw_bytes / compressed_bytes


def raw_size(n_samples, bytes_per_sample=RAW_BYTES_PER_SAMPLE):
    return n_samples * bytes_per_sample


def snr_db(signals, approximations):
    """10 log10(sum ||f||^2 / sum ||f - f_a||^2) over all channels."""
    f = np.asarray(signals, dtype=float)
    e = f - np.asarray(approximations, dtype=float)
    num, den = np.sum(f * f), np.sum(e * e)
    if den == 0:
        return np.inf
    return 10.0 * np.log10(num / den)
