"""Bit-exact binary serialization of quantized tensors (".lpqt").

Layout (little-endian throughout, every section zero-padded to an
8-byte boundary):

    header   magic "LPQT" | version u16 | format u8 | granularity u8 |
             block_size u32 | rows u64 | cols u64 | bias_shift u8 |
             7 reserved zero bytes                          (36 -> 40)
    scales          one binary16 per block
    zero points     one binary16 per block (INT4 only)
    folded scales   one binary16 per block (iff bias_shift)
    payload         minifloat: u64 seg4 length + bytes, then
                               u64 tail length + bytes
                    INT4:      u64 nibble length + bytes

Raw tensors are headerless row-major dumps read with shape and dtype
supplied out of band.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (BadMagic, InvalidInput, InvariantViolation,
                     LengthMismatch, TruncatedPayload, UnsupportedVersion)
from .packing import PackedSegments, seg4_length, tail_length
from .quantizer import Granularity, QuantScheme, QuantizedTensor, TensorFormat, num_blocks

MAGIC = b"LPQT"
VERSION = 1
_HEADER = struct.Struct("<4sHBBIQQB7s")

_FORMAT_CODES = {TensorFormat.FP6_E3M2: 0, TensorFormat.FP5_E3M1: 1,
                 TensorFormat.INT4_ASYM: 2}
_FORMATS_BY_CODE = {v: k for k, v in _FORMAT_CODES.items()}
_GRANULARITY_CODES = {Granularity.CGQ: 0, Granularity.FGQ: 1}
_GRANULARITY_BY_CODE = {v: k for k, v in _GRANULARITY_CODES.items()}


def _pad8(buf: bytearray) -> None:
    buf.extend(b"\x00" * (-len(buf) % 8))


def write_lpqt(q: QuantizedTensor) -> bytes:
    """Serialize a quantized tensor to the canonical byte layout."""
    buf = bytearray()
    buf += _HEADER.pack(
        MAGIC, VERSION,
        _FORMAT_CODES[q.scheme.fmt],
        _GRANULARITY_CODES[q.scheme.granularity],
        q.scheme.block_size if q.scheme.granularity is Granularity.FGQ else 0,
        q.rows, q.cols,
        1 if q.bias_shift else 0,
        b"\x00" * 7)
    _pad8(buf)

    buf += np.ascontiguousarray(q.scales, dtype="<f2").tobytes()
    _pad8(buf)
    if q.scheme.fmt is TensorFormat.INT4_ASYM:
        buf += np.ascontiguousarray(q.zero_points, dtype="<f2").tobytes()
        _pad8(buf)
    if q.bias_shift:
        buf += np.ascontiguousarray(q.folded_scales, dtype="<f2").tobytes()
        _pad8(buf)

    if isinstance(q.payload, PackedSegments):
        seg4 = q.payload.seg4.tobytes()
        tail = q.payload.seg_tail.tobytes()
        buf += struct.pack("<Q", len(seg4)) + seg4
        _pad8(buf)
        buf += struct.pack("<Q", len(tail)) + tail
        _pad8(buf)
    else:
        nibbles = np.asarray(q.payload, dtype=np.uint8).tobytes()
        buf += struct.pack("<Q", len(nibbles)) + nibbles
        _pad8(buf)
    return bytes(buf)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayload(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def align8(self) -> None:
        pad = self.take(-self.pos % 8)
        if pad.strip(b"\x00"):
            raise InvariantViolation("section padding is not zero")

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def _read_f16_section(r: _Reader, count: int) -> np.ndarray:
    values = np.frombuffer(r.take(count * 2), dtype="<f2").copy()
    r.align8()
    return values


def read_lpqt(data: bytes) -> QuantizedTensor:
    """Parse and validate a container stream (exact inverse of write)."""
    r = _Reader(data)
    header = r.take(_HEADER.size)
    magic, version, fmt_code, gran_code, block_size, rows, cols, bias_flag, reserved = \
        _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagic(f"bad container magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"container version {version} not supported")
    if fmt_code not in _FORMATS_BY_CODE:
        raise InvariantViolation(f"unknown format code {fmt_code}")
    if gran_code not in _GRANULARITY_BY_CODE:
        raise InvariantViolation(f"unknown granularity code {gran_code}")
    if bias_flag not in (0, 1):
        raise InvariantViolation(f"bias_shift flag must be 0 or 1, got {bias_flag}")
    if reserved != b"\x00" * 7:
        raise InvariantViolation("reserved header bytes are not zero")
    r.align8()

    fmt = _FORMATS_BY_CODE[fmt_code]
    granularity = _GRANULARITY_BY_CODE[gran_code]
    if granularity is Granularity.CGQ and block_size != 0:
        raise InvariantViolation("CGQ containers must store block_size 0")
    if granularity is Granularity.FGQ and block_size < 1:
        raise InvariantViolation("FGQ containers need block_size >= 1")
    if fmt is TensorFormat.INT4_ASYM and bias_flag:
        raise InvariantViolation("bias shift is not defined for INT4 payloads")
    scheme = QuantScheme(granularity=granularity, fmt=fmt, block_size=block_size)
    bias_shift = bool(bias_flag)

    nblocks = num_blocks(rows, cols, scheme)
    scales = _read_f16_section(r, nblocks)
    if nblocks and not np.all(np.isfinite(scales.astype(np.float64)) & (scales > 0)):
        raise InvariantViolation("scales must be positive and finite")
    zero_points = None
    if fmt is TensorFormat.INT4_ASYM:
        zero_points = _read_f16_section(r, nblocks)
        if nblocks and not np.all(np.isfinite(zero_points.astype(np.float64))):
            raise InvariantViolation("zero points must be finite")
    folded = None
    if bias_shift:
        folded = _read_f16_section(r, nblocks)
        if nblocks and not np.all(np.isfinite(folded.astype(np.float64)) & (folded > 0)):
            raise InvariantViolation("folded scales must be positive and finite")

    code_count = rows * cols
    mf = fmt.minifloat
    if mf is not None:
        n_seg4 = r.u64()
        if n_seg4 != seg4_length(code_count):
            raise InvariantViolation(
                f"seg4 length {n_seg4} does not match {code_count} codes")
        seg4 = np.frombuffer(r.take(n_seg4), dtype=np.uint8).copy()
        r.align8()
        n_tail = r.u64()
        if n_tail != tail_length(mf, code_count):
            raise InvariantViolation(
                f"tail length {n_tail} does not match {code_count} codes")
        tail = np.frombuffer(r.take(n_tail), dtype=np.uint8).copy()
        r.align8()
        payload: PackedSegments | np.ndarray = PackedSegments(seg4, tail, code_count)
    else:
        n_nib = r.u64()
        if n_nib != (code_count + 1) // 2:
            raise InvariantViolation(
                f"nibble length {n_nib} does not match {code_count} levels")
        payload = np.frombuffer(r.take(n_nib), dtype=np.uint8).copy()
        r.align8()

    if r.pos != len(data):
        raise InvariantViolation(f"{len(data) - r.pos} trailing bytes after payload")

    return QuantizedTensor(rows=rows, cols=cols, scheme=scheme, scales=scales,
                           zero_points=zero_points, payload=payload,
                           bias_shift=bias_shift, folded_scales=folded)


_RAW_DTYPES = {"f32le": "<f4", "f16le": "<f2"}


def read_raw(data: bytes, rows: int, cols: int, dtype: str) -> np.ndarray:
    """Read a headerless row-major dense tensor."""
    if dtype not in _RAW_DTYPES:
        raise InvalidInput(f"unknown raw dtype {dtype!r}")
    np_dtype = np.dtype(_RAW_DTYPES[dtype])
    expected = rows * cols * np_dtype.itemsize
    if len(data) != expected:
        raise LengthMismatch(
            f"raw stream of {len(data)} bytes does not hold {rows}x{cols} {dtype}")
    return np.frombuffer(data, dtype=np_dtype).astype(np.float64).reshape(rows, cols)
