"""Adaptive (FGK) Huffman coding of nonnegative integer streams.

Encoder and decoder start from a tree holding only the NYT ("not yet
transmitted") leaf and update it identically after every symbol.  A symbol
seen for the first time is sent as the NYT code followed by a fixed-width
literal; the literal width is chosen per stream from its largest symbol and
stored in the stream header.

Nodes live in a list ordered by decreasing implicit number (root first), so
weights along that list are non-increasing and the leader of a weight block
is found by bisection.

Stream layout (little endian)::

    u32 symbol count | u8 literal bits | u32 payload bits | payload bytes
"""

import struct
from bisect import bisect_left

import numpy as np

from ..errors import MalformedStreamError

_HEADER = struct.Struct("<IBI")
_NONE = -1
_NYT = -2
_INTERNAL = -3


class AdaptiveHuffmanModel:
    def __init__(self):
        self.weight = [0]
        self.parent = [_NONE]
        self.left = [_NONE]
        self.right = [_NONE]
        self.symbol = [_NYT]
        self.order = [0]      # node ids, highest implicit number first
        self.neg = [0]        # -weight, aligned with ``order``
        self.pos = [0]        # node id -> index in ``order``
        self.leaf = {}
        self.nyt = 0
        self.root = 0

    def _new_node(self, sym, parent):
        node = len(self.weight)
        self.weight.append(0)
        self.parent.append(parent)
        self.left.append(_NONE)
        self.right.append(_NONE)
        self.symbol.append(sym)
        self.pos.append(len(self.order))
        self.order.append(node)
        self.neg.append(0)
        return node

    def path(self, node):
        bits = []
        while node != self.root:
            p = self.parent[node]
            bits.append(1 if self.right[p] == node else 0)
            node = p
        bits.reverse()
        return bits

    def _swap(self, a, b):
        pa, pb = self.parent[a], self.parent[b]
        if pa == pb:
            self.left[pa], self.right[pa] = self.right[pa], self.left[pa]
        else:
            if self.left[pa] == a:
                self.left[pa] = b
            else:
                self.right[pa] = b
            if self.left[pb] == b:
                self.left[pb] = a
            else:
                self.right[pb] = a
            self.parent[a], self.parent[b] = pb, pa
        ia, ib = self.pos[a], self.pos[b]
        self.order[ia], self.order[ib] = b, a
        self.pos[a], self.pos[b] = ib, ia

    def _bump(self, node):
        self.weight[node] += 1
        self.neg[self.pos[node]] -= 1

    def update(self, sym):
        node = self.leaf.get(sym)
        if node is None:
            old = self.nyt
            leaf = self._new_node(sym, old)
            nyt = self._new_node(_NYT, old)
            self.symbol[old] = _INTERNAL
            self.right[old], self.left[old] = leaf, nyt
            self.leaf[sym] = leaf
            self.nyt = nyt
            self._bump(leaf)
            self._bump(old)
            node = self.parent[old]
        while node != _NONE:
            w = self.weight[node]
            j = bisect_left(self.neg, -w)
            if self.order[j] == self.parent[node]:
                j += 1
            leader = self.order[j]
            if leader != node:
                self._swap(node, leader)
            self._bump(node)
            node = self.parent[node]


def _check_symbols(symbols):
    arr = np.asarray(symbols, dtype=np.int64).ravel()
    if len(arr) and arr.min() < 0:
        raise ValueError("symbols must be nonnegative integers")
    return arr


def encode_stream(symbols):
    """Encode a sequence of nonnegative integers; returns the stream bytes."""
    arr = _check_symbols(symbols)
    lit_bits = max(1, int(arr.max()).bit_length()) if len(arr) else 1
    if lit_bits > 63:
        raise ValueError("symbols above 2**63 are not supported")
    model = AdaptiveHuffmanModel()
    bits = []
    for s in arr.tolist():
        node = model.leaf.get(s)
        if node is None:
            bits.extend(model.path(model.nyt))
            bits.extend((s >> (lit_bits - 1 - i)) & 1 for i in range(lit_bits))
        else:
            bits.extend(model.path(node))
        model.update(s)
    payload = np.packbits(np.array(bits, dtype=np.uint8)).tobytes() if bits else b""
    return _HEADER.pack(len(arr), lit_bits, len(bits)) + payload


def decode_stream(buf, offset=0):
    """Decode one stream starting at ``offset``; returns (symbols, next offset)."""
    if len(buf) - offset < _HEADER.size:
        raise MalformedStreamError(f"truncated stream header at offset {offset}")
    count, lit_bits, n_bits = _HEADER.unpack_from(buf, offset)
    start = offset + _HEADER.size
    end = start + (n_bits + 7) // 8
    if end > len(buf):
        raise MalformedStreamError(f"stream payload truncated at offset {start}")
    if lit_bits < 1 or lit_bits > 63:
        raise MalformedStreamError(f"invalid literal width {lit_bits}")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=end - start, offset=start))
    bits = bits[:n_bits].tolist()

    model = AdaptiveHuffmanModel()
    out = []
    i = 0
    try:
        for _ in range(count):
            node = model.root
            while model.symbol[node] == _INTERNAL:
                node = model.right[node] if bits[i] else model.left[node]
                i += 1
            if model.symbol[node] == _NYT:
                s = 0
                for _ in range(lit_bits):
                    s = (s << 1) | bits[i]
                    i += 1
            else:
                s = model.symbol[node]
            out.append(s)
            model.update(s)
    except IndexError:
        raise MalformedStreamError("stream ended before all symbols were decoded") from None
    if i != n_bits:
        raise MalformedStreamError(f"{n_bits - i} unused payload bits")
    return np.array(out, dtype=np.int64), end
