"""ECG record codec: column DCT, mid-tread quantizer, adaptive Huffman streams."""

from .container import CompressedRecord
from .encoder import EncodeResult, decode_record, encode_record
from .huffman import decode_stream, encode_stream
from .metrics import compression_ratio, prdn, prdn_per_beat, raw_size, snr_db
from .quantize import QuantizedStreams, dequantize, quantize
from .transform import inverse_transform_columns, transform_columns

__all__ = [
    "CompressedRecord",
    "EncodeResult",
    "QuantizedStreams",
    "compression_ratio",
    "decode_record",
    "decode_stream",
    "dequantize",
    "encode_record",
    "encode_stream",
    "inverse_transform_columns",
    "prdn",
    "prdn_per_beat",
    "quantize",
    "raw_size",
    "snr_db",
    "transform_columns",
]
