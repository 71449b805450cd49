"""Mid-tread uniform quantization and the magnitude / sign / position streams.

The transformed array is read in column-major order.  Each entry becomes
floor(b / delta + 1/2); zeros are dropped and the survivors are described by
three streams: magnitudes, sign bits (1 for +, 0 for -) and the gaps between
successive 1-based positions (the first entry is the first position itself).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import MalformedStreamError


@dataclass
class QuantizedStreams:
    magnitudes: np.ndarray
    signs: np.ndarray
    index_deltas: np.ndarray
    delta: float

    def __len__(self):
        return len(self.magnitudes)

    @property
    def positions(self):
        return np.cumsum(self.index_deltas)


def quantize_values(b, delta):
    return np.floor(np.asarray(b, dtype=float) / delta + 0.5).astype(np.int64)


def quantize(b, delta):
    if not delta > 0:
        raise ValueError(f"quantization step must be positive (got {delta})")
    flat = np.asarray(b, dtype=float).ravel(order="F")
    q = quantize_values(flat, delta)
    nz = np.flatnonzero(q)
    pos = nz + 1
    return QuantizedStreams(
        magnitudes=np.abs(q[nz]),
        signs=(q[nz] > 0).astype(np.int64),
        index_deltas=np.diff(pos, prepend=0),
        delta=float(delta),
    )


def dequantize(streams, rows, cols):
    """Rebuild the (rows, cols) array; unlisted positions are zero."""
    total = rows * cols
    deltas = np.asarray(streams.index_deltas, dtype=np.int64)
    mags = np.asarray(streams.magnitudes, dtype=np.int64)
    signs = np.asarray(streams.signs, dtype=np.int64)
    if not (len(deltas) == len(mags) == len(signs)):
        raise MalformedStreamError("magnitude, sign and position streams differ in length")
    if len(deltas) and (deltas.min() < 1):
        raise MalformedStreamError("positions must be strictly increasing")
    pos = np.cumsum(deltas)
    if len(pos) and pos[-1] > total:
        raise MalformedStreamError(f"position {pos[-1]} exceeds array size {total}")
    if len(signs) and not np.isin(signs, (0, 1)).all():
        raise MalformedStreamError("sign stream must be binary")
    flat = np.zeros(total)
    flat[pos - 1] = (2 * signs - 1) * mags * streams.delta
    return flat.reshape((rows, cols), order="F")
