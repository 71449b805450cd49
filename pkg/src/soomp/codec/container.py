"""Bit-exact SECG container for a compressed ECG record.

Layout, all little endian::

    4s   magic "SECG"
    u8   version
    u8   dictionary family
    u32  dictionary dimension (padded beat length L)
    u32  dictionary parameter (max wavelet level, or atom count)
    u32  Q (beats)            u32  k (atoms)
    f64  quantization step    f64  record mean
    u32  record length        f64  sampling rate
    u32  R-peak column
    k x u32 atom indices
    five adaptive-Huffman streams: magnitudes, signs, index gaps,
    beat lengths, R-peak offsets inside each beat

The dictionary itself is never stored; it is regenerated from the family,
dimension and parameter.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptContainerError, MalformedStreamError
from .huffman import decode_stream, encode_stream

MAGIC = b"SECG"
VERSION = 1
_HEADER = struct.Struct("<4sBBIIIIddIdI")
STREAMS = ("magnitudes", "signs", "index_deltas", "beat_lengths", "peak_offsets")


@dataclass
class CompressedRecord:
    family: int
    dict_dim: int
    dict_param: int
    n_beats: int
    n_atoms: int
    delta: float
    mean: float
    record_length: int
    fs: float
    peak_col: int
    atom_indices: np.ndarray
    magnitudes: np.ndarray
    signs: np.ndarray
    index_deltas: np.ndarray
    beat_lengths: np.ndarray
    peak_offsets: np.ndarray

    def header_bytes(self):
        head = _HEADER.pack(MAGIC, VERSION, int(self.family), self.dict_dim, self.dict_param,
                            self.n_beats, self.n_atoms, float(self.delta), float(self.mean),
                            self.record_length, float(self.fs), self.peak_col)
        return head + np.asarray(self.atom_indices, dtype="<u4").tobytes()

    def stream_bytes(self):
        return {name: encode_stream(getattr(self, name)) for name in STREAMS}

    def to_bytes(self):
        streams = self.stream_bytes()
        return self.header_bytes() + b"".join(streams[name] for name in STREAMS)

    def size_report(self):
        sizes = {name: len(b) for name, b in self.stream_bytes().items()}
        sizes["header"] = len(self.header_bytes())
        sizes["total"] = sum(sizes.values())
        return sizes

    @classmethod
    def from_bytes(cls, blob):
        blob = bytes(blob)
        if blob[:4] != MAGIC[:len(blob)] or len(blob) < 4:
            raise CorruptContainerError(f"bad magic {blob[:4]!r}", offset=0)
        if len(blob) < _HEADER.size:
            raise CorruptContainerError("truncated header", offset=len(blob))
        fields = _HEADER.unpack_from(blob)
        if fields[1] != VERSION:
            raise CorruptContainerError(f"unsupported version {fields[1]}", offset=4)
        (_, _, family, dict_dim, dict_param, n_beats, n_atoms, delta, mean,
         record_length, fs, peak_col) = fields
        offset = _HEADER.size
        end = offset + 4 * n_atoms
        if end > len(blob):
            raise CorruptContainerError("truncated atom index table", offset=len(blob))
        indices = np.frombuffer(blob, dtype="<u4", count=n_atoms, offset=offset).astype(np.int64)
        offset = end
        streams = {}
        for name in STREAMS:
            try:
                streams[name], offset = decode_stream(blob, offset)
            except MalformedStreamError as exc:
                raise CorruptContainerError(f"{name} stream: {exc}", offset=offset) from None
        if offset != len(blob):
            raise CorruptContainerError(f"{len(blob) - offset} trailing bytes", offset=offset)
        rec = cls(family, dict_dim, dict_param, n_beats, n_atoms, delta, mean, record_length,
                  fs, peak_col, indices, **streams)
        rec.validate()
        return rec

    def validate(self):
        if not self.delta > 0 or not np.isfinite(self.delta):
            raise CorruptContainerError(f"invalid quantization step {self.delta}")
        if len(self.beat_lengths) != self.n_beats or len(self.peak_offsets) != self.n_beats:
            raise CorruptContainerError("beat side information does not match Q")
        if int(np.sum(self.beat_lengths)) != self.record_length:
            raise CorruptContainerError("beat lengths do not sum to the record length")
        if self.n_beats and np.any(self.peak_offsets > self.peak_col):
            raise CorruptContainerError("R-peak offset beyond the alignment column")
        starts = self.peak_col - np.asarray(self.peak_offsets)
        if self.n_beats and np.any(starts + self.beat_lengths > self.dict_dim):
            raise CorruptContainerError("beat extends past the padded length")
        n = len(self.magnitudes)
        if len(self.signs) != n or len(self.index_deltas) != n:
            raise CorruptContainerError("coefficient streams differ in length")
