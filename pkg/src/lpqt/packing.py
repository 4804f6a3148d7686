"""Segmented bit-packed payload layouts.

Minifloat codes are split into a 4-bit segment (sign + 3 exponent bits)
and a tail segment holding the remaining mantissa bits (2 for FP6, 1
for FP5), each stored in its own packed byte array so both can be
loaded word-aligned.  Byte lanes are little-endian: the even-index code
sits in the low nibble / low bits of its byte.  Both arrays are
zero-padded up to a 4-byte multiple.

INT4 levels need no split and pack two per byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .codec import MiniFloatFormat
from .errors import InvalidCode, PayloadMismatch


def _align4(n: int) -> int:
    return (n + 3) // 4 * 4


def seg4_length(code_count: int) -> int:
    """Byte length of the 4-bit segment array for ``code_count`` codes."""
    return _align4((code_count + 1) // 2)


def tail_length(fmt: MiniFloatFormat, code_count: int) -> int:
    """Byte length of the tail segment array for ``code_count`` codes."""
    bits = code_count * fmt.mantissa_bits
    return _align4((bits + 7) // 8)


@dataclass(frozen=True)
class PackedSegments:
    """The split 4 + tail bit arrays storing one code stream."""

    seg4: np.ndarray      # uint8, seg4_length(code_count) bytes
    seg_tail: np.ndarray  # uint8, tail_length(fmt, code_count) bytes
    code_count: int


def split_code(fmt: MiniFloatFormat, code: int) -> tuple[int, int]:
    """Split one code into its (sign+exponent, mantissa) segments."""
    code = int(code)
    if not 0 <= code < fmt.code_count:
        raise InvalidCode(f"code {code:#x} does not fit {fmt.total_bits} bits")
    return code >> fmt.mantissa_bits, code & fmt.mantissa_mask


def _as_code_array(fmt: MiniFloatFormat, codes: Iterable[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(codes)
    if arr.size and (arr.min() < 0 or arr.max() >= fmt.code_count):
        raise InvalidCode(f"codes must fit {fmt.total_bits} bits")
    return arr.astype(np.uint8)


def pack(fmt: MiniFloatFormat, codes: Iterable[int] | np.ndarray) -> PackedSegments:
    """Pack a code stream into split segment arrays."""
    arr = _as_code_array(fmt, codes)
    n = arr.size

    s4 = arr >> fmt.mantissa_bits
    pad2 = -n % 2
    if pad2:
        s4 = np.concatenate([s4, np.zeros(pad2, dtype=np.uint8)])
    seg4 = s4[0::2] | (s4[1::2] << 4)
    seg4 = np.concatenate([seg4, np.zeros(seg4_length(n) - seg4.size, dtype=np.uint8)])

    tail_bits = arr & fmt.mantissa_mask
    if fmt.mantissa_bits == 2:
        pad4 = -n % 4
        if pad4:
            tail_bits = np.concatenate([tail_bits, np.zeros(pad4, dtype=np.uint8)])
        t = (tail_bits[0::4]
             | (tail_bits[1::4] << 2)
             | (tail_bits[2::4] << 4)
             | (tail_bits[3::4] << 6))
    elif fmt.mantissa_bits == 1:
        t = np.packbits(tail_bits, bitorder="little")
    else:  # pragma: no cover - no such format defined
        raise InvalidCode(f"unsupported tail width {fmt.mantissa_bits}")
    seg_tail = np.concatenate([t, np.zeros(tail_length(fmt, n) - t.size, dtype=np.uint8)])

    return PackedSegments(seg4=seg4, seg_tail=seg_tail, code_count=n)


def unpack(fmt: MiniFloatFormat, segments: PackedSegments) -> np.ndarray:
    """Recover the first ``code_count`` codes; pad bits are ignored."""
    n = segments.code_count
    seg4 = np.asarray(segments.seg4, dtype=np.uint8)
    seg_tail = np.asarray(segments.seg_tail, dtype=np.uint8)
    if seg4.size != seg4_length(n) or seg_tail.size != tail_length(fmt, n):
        raise PayloadMismatch(
            f"segment lengths ({seg4.size}, {seg_tail.size}) inconsistent "
            f"with code count {n}")

    s4 = np.empty(seg4.size * 2, dtype=np.uint8)
    s4[0::2] = seg4 & 0x0F
    s4[1::2] = seg4 >> 4
    s4 = s4[:n]

    if fmt.mantissa_bits == 2:
        t = np.empty(seg_tail.size * 4, dtype=np.uint8)
        t[0::4] = seg_tail & 0x03
        t[1::4] = (seg_tail >> 2) & 0x03
        t[2::4] = (seg_tail >> 4) & 0x03
        t[3::4] = (seg_tail >> 6) & 0x03
    else:
        t = np.unpackbits(seg_tail, bitorder="little")
    t = t[:n]

    return (s4 << fmt.mantissa_bits) | t


def pack_int4(levels: Iterable[int] | np.ndarray) -> np.ndarray:
    """Pack INT4 levels two per byte, even index in the low nibble."""
    arr = np.asarray(levels)
    if arr.size and (arr.min() < 0 or arr.max() > 15):
        raise InvalidCode("INT4 levels must lie in [0, 15]")
    arr = arr.astype(np.uint8)
    if arr.size % 2:
        arr = np.concatenate([arr, np.zeros(1, dtype=np.uint8)])
    return arr[0::2] | (arr[1::2] << 4)


def unpack_int4(data: np.ndarray, count: int) -> np.ndarray:
    """Recover ``count`` INT4 levels from a nibble array."""
    data = np.asarray(data, dtype=np.uint8)
    if data.size != (count + 1) // 2:
        raise PayloadMismatch(
            f"nibble array of {data.size} bytes cannot hold {count} levels")
    levels = np.empty(data.size * 2, dtype=np.uint8)
    levels[0::2] = data & 0x0F
    levels[1::2] = data >> 4
    return levels[:count]
