"""Scalar minifloat codecs for the FP6 (E3M2) and FP5 (E3M1) code spaces.

A code is an unsigned integer laid out MSB->LSB as sign, exponent,
mantissa.  All codes are finite values: the formats reserve no NaN/Inf
patterns, an all-zero exponent field marks a subnormal (no implicit
leading one, exponent fixed at ``1 - stored_bias``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidCode, InvalidInput


@dataclass(frozen=True)
class MiniFloatFormat:
    """Static description of one low-bit minifloat layout."""

    name: str
    exponent_bits: int
    mantissa_bits: int
    stored_bias: int
    total_bits: int
    max_value: float

    @property
    def code_count(self) -> int:
        return 1 << self.total_bits

    @property
    def sign_shift(self) -> int:
        return self.total_bits - 1

    @property
    def mantissa_mask(self) -> int:
        return (1 << self.mantissa_bits) - 1

    @property
    def exponent_mask(self) -> int:
        return (1 << self.exponent_bits) - 1


FP6_E3M2 = MiniFloatFormat("FP6_E3M2", exponent_bits=3, mantissa_bits=2,
                           stored_bias=3, total_bits=6, max_value=28.0)
FP5_E3M1 = MiniFloatFormat("FP5_E3M1", exponent_bits=3, mantissa_bits=1,
                           stored_bias=3, total_bits=5, max_value=24.0)

MINIFLOAT_FORMATS = (FP6_E3M2, FP5_E3M1)


def _check_code(fmt: MiniFloatFormat, code: int) -> int:
    code = int(code)
    if not 0 <= code < fmt.code_count:
        raise InvalidCode(f"code {code:#x} does not fit {fmt.total_bits} bits")
    return code


def decode(fmt: MiniFloatFormat, code: int) -> float:
    """Exact real value of a code.

    Normal codes (exponent field > 0) decode to
    ``sign * 2**(E - bias) * (1 + M / 2**mbits)``; subnormal codes keep
    the minimum exponent with no implicit one:
    ``sign * (M / 2**mbits) * 2**(1 - bias)``.  The sign of the zero
    code is preserved (code with only the sign bit set decodes to -0.0).
    """
    code = _check_code(fmt, code)
    negative = (code >> fmt.sign_shift) & 1
    e_field = (code >> fmt.mantissa_bits) & fmt.exponent_mask
    m_field = code & fmt.mantissa_mask
    if e_field == 0:
        magnitude = math.ldexp(m_field / (1 << fmt.mantissa_bits),
                               1 - fmt.stored_bias)
    else:
        magnitude = math.ldexp(1.0 + m_field / (1 << fmt.mantissa_bits),
                               e_field - fmt.stored_bias)
    return -magnitude if negative else magnitude


@lru_cache(maxsize=None)
def _magnitude_grid(fmt: MiniFloatFormat) -> np.ndarray:
    """Decoded values of the non-negative codes, ascending (float64)."""
    half = fmt.code_count // 2
    return np.array([decode(fmt, c) for c in range(half)], dtype=np.float64)


@lru_cache(maxsize=None)
def _grid_midpoints(fmt: MiniFloatFormat) -> np.ndarray:
    grid = _magnitude_grid(fmt)
    # grid values have short significands, so midpoints are exact
    return (grid[:-1] + grid[1:]) / 2.0


@lru_cache(maxsize=None)
def value_table(fmt: MiniFloatFormat) -> np.ndarray:
    """All 2**total_bits decoded values, indexed by code bits (float64)."""
    table = np.array([decode(fmt, c) for c in range(fmt.code_count)],
                     dtype=np.float64)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def value_table_f16(fmt: MiniFloatFormat) -> np.ndarray:
    """Same table rounded to binary16 (exact: every value fits binary16)."""
    table = value_table(fmt).astype(np.float16)
    table.setflags(write=False)
    return table


def encode_rtn_array(fmt: MiniFloatFormat, x: np.ndarray) -> np.ndarray:
    """Vectorized round-to-nearest encode; see :func:`encode_rtn`."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInput("cannot encode non-finite values")
    mids = _grid_midpoints(fmt)
    mag = np.abs(x)
    # searchsorted(side="right") rounds half away from zero; exact-midpoint
    # hits are then nudged to the even magnitude index (ties-to-even)
    idx = np.searchsorted(mids, mag, side="right")
    below = idx > 0
    tie = np.zeros(x.shape, dtype=bool)
    tie[below] = mag[below] == mids[idx[below] - 1]
    idx = np.where(tie & (idx & 1 == 1), idx - 1, idx)
    negative = np.signbit(x) & (x != 0.0)  # exact +-0.0 canonicalizes to +0
    codes = (negative.astype(np.uint8) << fmt.sign_shift) | idx.astype(np.uint8)
    return codes


def encode_rtn(fmt: MiniFloatFormat, x: float) -> int:
    """Code whose decoded value is nearest to ``x``.

    Values beyond ``+-max_value`` saturate to the extreme codes.  Exact
    midpoints round to the code with even low mantissa bit (the IEEE
    ties-to-even convention applied to the code's magnitude bits).
    ``+0.0`` and ``-0.0`` both encode to the all-zero code; nonzero
    inputs keep their sign even when the magnitude rounds to zero.
    """
    if not math.isfinite(x):
        raise InvalidInput(f"cannot encode non-finite value {x!r}")
    return int(encode_rtn_array(fmt, np.array([x]))[0])


def codebook(fmt: MiniFloatFormat) -> list[tuple[int, float]]:
    """All ``(code, decoded value)`` pairs, ordered by code bits."""
    return [(c, decode(fmt, c)) for c in range(fmt.code_count)]
