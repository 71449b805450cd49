"""Redundant dictionaries with unit-norm atoms.

Atoms are stored as the rows of an ``(M, N)`` array.  Three constructions are
provided: the redundant discrete cosine and sine dictionaries used for audio
frames, and a Cohen-Daubechies-Feauveau 9/7 wavelet dictionary (scaling
function translates plus wavelet translates at scales 0..J, all on
half-integer shifts) used for heartbeats.
"""

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidLevelError,
)

__all__ = [
    "Atom",
    "Dictionary",
    "Family",
    "build_rdct",
    "build_rdst",
    "build_cdf97",
    "union",
    "rebuild",
    "cdf97_prototypes",
    "write_dictionary",
    "read_dictionary",
]

# CDF 9/7 lowpass filters, normalised to sum sqrt(2).  The 9-tap filter is
# centred on index 0 (taps -4..4), the 7-tap one on index 0 (taps -3..3).
CDF97_ANALYSIS_LOWPASS = np.array([
    0.03782845550726404,
    -0.023849465019556843,
    -0.11062440441843718,
    0.37740285561283066,
    0.8526986790088938,
    0.37740285561283066,
    -0.11062440441843718,
    -0.023849465019556843,
    0.03782845550726404,
])
CDF97_SYNTHESIS_LOWPASS = np.array([
    -0.06453888262869706,
    -0.04068941760916406,
    0.41809227322161724,
    0.7884856164055829,
    0.41809227322161724,
    -0.04068941760916406,
    -0.06453888262869706,
])

CASCADE_ITERATIONS = 8
MAX_LEVEL = 4
DISCARD_THRESHOLD = 1e-6


class Family(enum.IntEnum):
    RDCT = 0
    RDST = 1
    UNION = 2
    CDF97 = 3


@dataclass(frozen=True)
class Atom:
    values: np.ndarray
    label: tuple


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Ordered, immutable collection of unit-norm atoms of length N."""

    atoms: np.ndarray
    family: Family
    labels: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float, copy=True)
        if atoms.ndim != 2:
            raise InvalidDimensionError("atoms must be a 2-D array (M, N)")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "family", Family(self.family))
        if not self.labels:
            object.__setattr__(self, "labels", tuple((self.family.name, n) for n in range(len(atoms))))

    @property
    def ambient_dim(self):
        return self.atoms.shape[1]

    @property
    def size(self):
        return self.atoms.shape[0]

    def __len__(self):
        return self.atoms.shape[0]

    def atom(self, n):
        return Atom(self.atoms[n], self.labels[n])

    @classmethod
    def empty(cls, ambient_dim, family=Family.UNION):
        return cls(np.zeros((0, ambient_dim)), family)


def _check_dims(frame_len, atom_count):
    if frame_len < 1 or atom_count < 1:
        raise InvalidDimensionError(
            f"frame length and atom count must be >= 1 (got L={frame_len}, M={atom_count})"
        )


def _normalise_rows(raw):
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0):
        raise InvalidDimensionError("construction produced an all-zero atom")
    return raw / norms[:, None]


def build_rdct(frame_len, atom_count):
    """Redundant DCT: atom n has entries cos(pi (2i-1)(n-1) / 2M), i = 1..L."""
    _check_dims(frame_len, atom_count)
    i = np.arange(1, frame_len + 1)
    n = np.arange(1, atom_count + 1)
    raw = np.cos(np.pi * np.outer(n - 1, 2 * i - 1) / (2 * atom_count))
    labels = tuple(("cos", int(k)) for k in n)
    return Dictionary(_normalise_rows(raw), Family.RDCT, labels,
                      {"L": frame_len, "M": atom_count})


def build_rdst(frame_len, atom_count):
    """Redundant DST: atom n has entries sin(pi (2i-1) n / 2M), i = 1..L."""
    _check_dims(frame_len, atom_count)
    i = np.arange(1, frame_len + 1)
    n = np.arange(1, atom_count + 1)
    raw = np.sin(np.pi * np.outer(n, 2 * i - 1) / (2 * atom_count))
    labels = tuple(("sin", int(k)) for k in n)
    return Dictionary(_normalise_rows(raw), Family.RDST, labels,
                      {"L": frame_len, "M": atom_count})


def union(a, b):
    """Concatenate two dictionaries, atoms of ``a`` first."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatchError(
            f"cannot join dictionaries of dimension {a.ambient_dim} and {b.ambient_dim}"
        )
    if len(b) == 0:
        return a
    if len(a) == 0:
        return b
    return Dictionary(
        np.vstack([a.atoms, b.atoms]),
        Family.UNION,
        a.labels + b.labels,
        {"parts": (a.params, b.params)},
    )


def _cascade(lowpass, iterations):
    v = np.array([1.0])
    for _ in range(iterations):
        up = np.zeros(2 * len(v) - 1)
        up[::2] = v
        v = np.convolve(lowpass, up)
    return v * 2.0 ** (iterations / 2)


def cdf97_prototypes(iterations=CASCADE_ITERATIONS):
    """Scaling function and wavelet of the CDF 9/7 analysis pair.

    Returns ``(phi, phi_first, psi, psi_first)`` where ``phi[m]`` samples the
    scaling function at ``(m + phi_first) / 2**iterations`` and likewise for
    ``psi``.  Supports are [-4, 4] and [-3, 4].
    """
    scale = 2 ** iterations
    phi = _cascade(CDF97_ANALYSIS_LOWPASS, iterations)
    phi_first = -4 * (scale - 1)

    # psi(x) = sqrt(2) sum_k g_k phi(2x - k), g_k = (-1)^k h_{1-k}
    psi_first, psi_last = -3 * scale, 4 * scale
    m = np.arange(psi_first, psi_last + 1)
    psi = np.zeros(len(m))
    for k in range(-2, 5):
        g = (-1.0) ** k * CDF97_SYNTHESIS_LOWPASS[(1 - k) + 3]
        idx = 2 * m - k * scale - phi_first
        ok = (idx >= 0) & (idx < len(phi))
        psi[ok] += np.sqrt(2) * g * phi[idx[ok]]
    return phi, phi_first, psi, psi_first


def build_cdf97(interval_len, max_level=MAX_LEVEL):
    """CDF 9/7 dictionary on ``interval_len`` samples with scales 0..max_level.

    The partition is x_i = (i - 1) / 2**(max_level + 1), so that the finest
    wavelet translates are one sample apart.  Every half-integer translate whose
    restriction to the partition is not negligible becomes a unit-norm atom.
    """
    if interval_len < 16:
        raise InvalidDimensionError(f"CDF97 dictionary needs N >= 16 (got {interval_len})")
    if not 0 <= max_level <= MAX_LEVEL:
        raise InvalidLevelError(f"max_level must be in 0..{MAX_LEVEL} (got {max_level})")

    it = CASCADE_ITERATIONS
    grid = 2 ** it
    phi, phi_first, psi, psi_first = cdf97_prototypes(it)
    # argument s*x_i - k/2 in units of 1/grid: s*(i-1)*grid/2**(J+1) - k*grid/2
    steps_per_sample = grid // 2 ** (max_level + 1)
    i = np.arange(interval_len)
    span = (interval_len - 1) / 2 ** (max_level + 1)

    rows, labels = [], []
    scales = [("phi", 0, phi, phi_first, (-4, 4))]
    scales += [("psi", j, psi, psi_first, (-3, 4)) for j in range(max_level + 1)]
    for kind, j, proto, first, (a, b) in scales:
        s = 2 ** j
        k_lo = int(np.floor(-2 * b))
        k_hi = int(np.ceil(2 * (s * span - a)))
        raw, lab = [], []
        for k in range(k_lo, k_hi + 1):
            idx = s * i * steps_per_sample - k * (grid // 2) - first
            ok = (idx >= 0) & (idx < len(proto))
            if not ok.any():
                continue
            v = np.zeros(interval_len)
            v[ok] = np.sqrt(s) * proto[idx[ok]]
            raw.append(v)
            lab.append((kind, j, k))
        if not raw:
            continue
        raw = np.array(raw)
        norms = np.linalg.norm(raw, axis=1)
        keep = norms > DISCARD_THRESHOLD * norms.max()
        rows.append(raw[keep] / norms[keep, None])
        labels.extend(l for l, kp in zip(lab, keep) if kp)

    return Dictionary(np.vstack(rows), Family.CDF97, tuple(labels),
                      {"N": interval_len, "J": max_level})


def rebuild(family, ambient_dim, param):
    """Regenerate a dictionary from the parameters stored in a container."""
    family = Family(family)
    if family is Family.CDF97:
        return build_cdf97(ambient_dim, param)
    if family is Family.RDCT:
        return build_rdct(ambient_dim, param)
    if family is Family.RDST:
        return build_rdst(ambient_dim, param)
    return union(build_rdct(ambient_dim, param // 2), build_rdst(ambient_dim, param // 2))


_SDIC_HEADER = struct.Struct("<4sBBII")
_SDIC_VERSION = 1


def write_dictionary(dictionary, path):
    """Dump atoms to an SDIC file (debugging aid)."""
    with open(path, "wb") as fh:
        fh.write(_SDIC_HEADER.pack(b"SDIC", _SDIC_VERSION, int(dictionary.family),
                                   dictionary.ambient_dim, len(dictionary)))
        fh.write(np.ascontiguousarray(dictionary.atoms, dtype="<f8").tobytes())


def read_dictionary(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _SDIC_HEADER.size:
        raise ValueError("truncated SDIC header")
    magic, version, family, n, m = _SDIC_HEADER.unpack_from(blob)
    if magic != b"SDIC" or version != _SDIC_VERSION:
        raise ValueError("not an SDIC file")
    body = blob[_SDIC_HEADER.size:]
    if len(body) != 8 * n * m:
        raise ValueError("SDIC payload size does not match header")
    atoms = np.frombuffer(body, dtype="<f8").reshape(m, n)
    return Dictionary(atoms, Family(family))
