"""Scalar dequantization paths producing bit-exact binary16 results.

The naive path decodes each code to its exact binary16 value (an
exponent rebias plus mantissa padding, with a separate subnormal rule)
and then multiplies by the quantization scale.  The folded-scale path
instead reinterprets the stored exponent field directly under the
binary16 bias: the code bits are padded into a binary16 pattern as
``sign<<15 | E<<10 | M<<(10-mantissa_bits)`` and multiplied by the
scale pre-shifted by 2**12.  Subnormal codes need no special case on
the folded path because a zero exponent field stays a zero exponent
field.

Note: the bias gap between binary16 (bias 15) and both supported code
formats (bias 3) is 12, so the fold constant is 2**12 for FP5 as well
as FP6; the single-bit FP5 mantissa alignment is absorbed by the
``M<<9`` bit placement.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .codec import MiniFloatFormat, value_table_f16
from .errors import InvalidInput, ScaleOverflow
from .packing import PackedSegments, unpack

_F16_MAX = 65504.0
FOLD_SHIFT = 12  # binary16 bias 15 minus the stored bias 3


@lru_cache(maxsize=None)
def compose_table_f16(fmt: MiniFloatFormat) -> np.ndarray:
    """Binary16 bit patterns obtained by padding each code, as float16."""
    codes = np.arange(fmt.code_count, dtype=np.uint16)
    sign = (codes >> fmt.sign_shift) & 1
    e_field = (codes >> fmt.mantissa_bits) & fmt.exponent_mask
    m_field = codes & fmt.mantissa_mask
    bits = (sign << 15) | (e_field << 10) | (m_field << (10 - fmt.mantissa_bits))
    table = bits.astype(np.uint16).view(np.float16)
    table.setflags(write=False)
    return table


def fold_scale(fmt: MiniFloatFormat, scale: float | np.float16) -> np.float16:
    """Shift a scale's exponent up by the bias gap (exact, or error).

    A binary16 subnormal scale becomes normal exactly; a scale at or
    above 16 would push past the binary16 maximum and is rejected.
    """
    s = float(np.float16(scale))
    if not (s > 0.0 and np.isfinite(s)):
        raise InvalidInput(f"scale must be a positive finite binary16, got {scale!r}")
    folded = s * float(1 << FOLD_SHIFT)
    if folded > _F16_MAX:
        raise ScaleOverflow(f"folded scale {folded} exceeds binary16 range")
    return np.float16(folded)


def fold_scale_array(fmt: MiniFloatFormat, scales: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fold_scale` over a binary16 scale array."""
    s = np.asarray(scales, dtype=np.float16).astype(np.float64)
    if s.size and not np.all((s > 0.0) & np.isfinite(s)):
        raise InvalidInput("scales must be positive finite binary16 values")
    folded = s * float(1 << FOLD_SHIFT)
    if s.size and folded.max() > _F16_MAX:
        raise ScaleOverflow("folded scale exceeds binary16 range")
    return folded.astype(np.float16)


def dequant_naive_array(fmt: MiniFloatFormat, codes: np.ndarray,
                        scale: np.float16 | np.ndarray) -> np.ndarray:
    """Two-step path: exact binary16 cast of each code, then scale.

    ``scale`` may be a scalar or an array broadcastable to ``codes``.
    """
    values = value_table_f16(fmt)[np.asarray(codes, dtype=np.uint8)]
    return values * np.asarray(scale, dtype=np.float16)


def dequant_bias_shift_array(fmt: MiniFloatFormat, codes: np.ndarray,
                             folded: np.float16 | np.ndarray) -> np.ndarray:
    """Folded path: bit-level pad to binary16, one multiply."""
    composed = compose_table_f16(fmt)[np.asarray(codes, dtype=np.uint8)]
    return composed * np.asarray(folded, dtype=np.float16)


def dequant_naive(fmt: MiniFloatFormat, code: int,
                  scale: float | np.float16) -> np.float16:
    """Dequantize one code via the two-step path."""
    return dequant_naive_array(fmt, np.array([code]), np.float16(scale))[0]


def dequant_bias_shift(fmt: MiniFloatFormat, code: int,
                       folded: np.float16) -> np.float16:
    """Dequantize one code via the folded-scale path."""
    return dequant_bias_shift_array(fmt, np.array([code]), np.float16(folded))[0]


def dequant_block(fmt: MiniFloatFormat, segments: PackedSegments,
                  scale: float | np.float16, path: str = "naive",
                  folded_scale: np.float16 | None = None) -> np.ndarray:
    """Dequantize every code in a packed block to binary16.

    ``path`` selects "naive" or "bias_shift"; the folded scale is
    derived from ``scale`` when not supplied explicitly.
    """
    codes = unpack(fmt, segments)
    if path == "naive":
        return dequant_naive_array(fmt, codes, np.float16(scale))
    if path == "bias_shift":
        folded = fold_scale(fmt, scale) if folded_scale is None else np.float16(folded_scale)
        return dequant_bias_shift_array(fmt, codes, folded)
    raise ValueError(f"unknown dequantization path {path!r}")
