"""Block partitioning, scale computation and whole-tensor quantization.

Blocks never cross row boundaries.  Coarse-grain (CGQ) uses one block
per row; fine-grain (FGQ) cuts each row into ``block_size``-wide blocks
with a possibly short trailing block.  Scales and zero points are
stored as binary16 and all quantization arithmetic uses the rounded
stored values, so dequantization reproduces exactly what quantization
assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import codec, dequant, packing
from .codec import FP5_E3M1, FP6_E3M2, MiniFloatFormat
from .errors import InvalidInput, InvalidScheme, PayloadMismatch, PathUnavailable, ShapeError
from .packing import PackedSegments

_F16_TINY = 2.0 ** -24  # smallest positive binary16
_INT4_LEVELS = 15  # 2**4 - 1


class Granularity(Enum):
    CGQ = "cgq"
    FGQ = "fgq"


class TensorFormat(Enum):
    FP6_E3M2 = "fp6"
    FP5_E3M1 = "fp5"
    INT4_ASYM = "int4"

    @property
    def minifloat(self) -> MiniFloatFormat | None:
        if self is TensorFormat.FP6_E3M2:
            return FP6_E3M2
        if self is TensorFormat.FP5_E3M1:
            return FP5_E3M1
        return None


@dataclass(frozen=True)
class QuantScheme:
    """Granularity plus numeric format; ``block_size`` is FGQ-only."""

    granularity: Granularity
    fmt: TensorFormat
    block_size: int = 0


@dataclass(frozen=True)
class BlockParams:
    """Per-block scale (and zero point for INT4), stored as binary16."""

    scale: np.float16
    zero_point: np.float16 | None = None


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    max_abs_error: float
    sqnr_db: float


@dataclass(frozen=True)
class QuantizedTensor:
    rows: int
    cols: int
    scheme: QuantScheme
    scales: np.ndarray                    # float16, one per block, row-major
    zero_points: np.ndarray | None        # float16, INT4 only
    payload: PackedSegments | np.ndarray  # segments (minifloat) / nibbles (INT4)
    bias_shift: bool = False
    folded_scales: np.ndarray | None = None

    @property
    def num_blocks(self) -> int:
        return int(self.scales.size)


def _validate_scheme(scheme: QuantScheme) -> None:
    if scheme.granularity is Granularity.FGQ and scheme.block_size < 1:
        raise InvalidScheme(f"FGQ requires block_size >= 1, got {scheme.block_size}")


def blocks_per_row(cols: int, scheme: QuantScheme) -> int:
    _validate_scheme(scheme)
    if cols == 0:
        return 0
    if scheme.granularity is Granularity.CGQ:
        return 1
    return -(-cols // scheme.block_size)


def block_widths(cols: int, scheme: QuantScheme) -> np.ndarray:
    """Widths of the blocks inside one row."""
    bpr = blocks_per_row(cols, scheme)
    if scheme.granularity is Granularity.CGQ:
        return np.array([cols] * bpr, dtype=np.int64)
    d = scheme.block_size
    widths = np.full(bpr, d, dtype=np.int64)
    if bpr and cols % d:
        widths[-1] = cols % d
    return widths


def num_blocks(rows: int, cols: int, scheme: QuantScheme) -> int:
    if rows == 0 or cols == 0:
        return 0
    return rows * blocks_per_row(cols, scheme)


def partition_blocks(rows: int, cols: int,
                     scheme: QuantScheme) -> list[tuple[int, int, int]]:
    """Block descriptors ``(row, col_start, col_end)`` in row-major order."""
    if rows < 0 or cols < 0:
        raise InvalidScheme("dimensions must be non-negative")
    _validate_scheme(scheme)
    widths = block_widths(cols, scheme)
    bounds = np.concatenate([[0], np.cumsum(widths)])
    out = []
    for r in range(rows if cols else 0):
        for j in range(len(widths)):
            out.append((r, int(bounds[j]), int(bounds[j + 1])))
    return out


def _check_finite_block(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInput("block must be non-empty")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("block contains non-finite values")
    return v


def _round_scales_f16(raw: np.ndarray) -> np.ndarray:
    """Round positive float64 scales to binary16, guarding the extremes.

    Underflow clamps to the smallest positive binary16 so the stored
    scale stays > 0; overflow means the data cannot be represented and
    is an error.
    """
    s16 = raw.astype(np.float16)
    if np.any(np.isinf(s16)):
        raise InvalidInput("block magnitude too large for a binary16 scale")
    s16[s16 == 0] = np.float16(_F16_TINY)
    return s16


def compute_scale_fp(values: np.ndarray, fmt: MiniFloatFormat) -> BlockParams:
    """Max-abs scale mapping the block onto the full minifloat range."""
    v = _check_finite_block(values)
    peak = float(np.abs(v).max())
    if peak == 0.0:
        return BlockParams(scale=np.float16(1.0))
    scale = _round_scales_f16(np.array([peak / fmt.max_value]))[0]
    return BlockParams(scale=scale)


def compute_affine_params_int4(values: np.ndarray) -> BlockParams:
    """Min/max affine parameters for asymmetric INT4."""
    v = _check_finite_block(values)
    lo = float(v.min())
    hi = float(v.max())
    zero_point = np.float16(lo)
    if np.isinf(zero_point):
        raise InvalidInput("block minimum too large for a binary16 zero point")
    if hi == lo:
        return BlockParams(scale=np.float16(1.0), zero_point=zero_point)
    scale = _round_scales_f16(np.array([(hi - lo) / _INT4_LEVELS]))[0]
    return BlockParams(scale=scale, zero_point=zero_point)


def _flat_block_layout(rows: int, cols: int, scheme: QuantScheme):
    """Row-major flat start index and width of every block."""
    widths_row = block_widths(cols, scheme)
    starts_row = np.concatenate([[0], np.cumsum(widths_row)[:-1]]) if widths_row.size else np.array([], dtype=np.int64)
    starts = (np.arange(rows, dtype=np.int64)[:, None] * cols + starts_row[None, :]).ravel()
    widths = np.tile(widths_row, rows)
    return starts, widths


def quantize_tensor(W: np.ndarray, scheme: QuantScheme,
                    bias_shift: bool = False) -> QuantizedTensor:
    """Quantize a dense matrix under ``scheme``.

    With ``bias_shift`` the folded scales are computed and stored
    alongside the originals (minifloat formats only).
    """
    _validate_scheme(scheme)
    W = np.ascontiguousarray(np.asarray(W, dtype=np.float64))
    if W.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise InvalidInput("weight matrix contains non-finite values")
    mf = scheme.fmt.minifloat
    if bias_shift and mf is None:
        raise InvalidScheme("bias shift applies to minifloat formats only")

    rows, cols = W.shape
    nblocks = num_blocks(rows, cols, scheme)
    flat = W.ravel()

    if nblocks == 0:
        scales = np.zeros(0, dtype=np.float16)
        if mf is not None:
            payload: PackedSegments | np.ndarray = packing.pack(mf, np.zeros(0, dtype=np.uint8))
            zero_points = None
        else:
            payload = packing.pack_int4(np.zeros(0, dtype=np.uint8))
            zero_points = np.zeros(0, dtype=np.float16)
        folded = np.zeros(0, dtype=np.float16) if bias_shift else None
        return QuantizedTensor(rows, cols, scheme, scales, zero_points,
                               payload, bias_shift, folded)

    starts, widths = _flat_block_layout(rows, cols, scheme)

    if mf is not None:
        peak = np.maximum.reduceat(np.abs(flat), starts)
        # all-zero blocks fall back to scale 1.0
        scales = _round_scales_f16(np.where(peak == 0.0, 1.0, peak / mf.max_value))
        scale_per_elem = np.repeat(scales.astype(np.float64), widths)
        codes = codec.encode_rtn_array(mf, flat / scale_per_elem)
        payload = packing.pack(mf, codes)
        zero_points = None
    else:
        lo = np.minimum.reduceat(flat, starts)
        hi = np.maximum.reduceat(flat, starts)
        zero_points = lo.astype(np.float16)
        if np.any(np.isinf(zero_points)):
            raise InvalidInput("block minimum too large for a binary16 zero point")
        span = hi - lo
        # constant blocks fall back to scale 1.0 (every level hits zero_point)
        scales = _round_scales_f16(np.where(span == 0.0, 1.0, span / _INT4_LEVELS))
        s_elem = np.repeat(scales.astype(np.float64), widths)
        z_elem = np.repeat(zero_points.astype(np.float64), widths)
        levels = np.clip(np.rint((flat - z_elem) / s_elem), 0, _INT4_LEVELS)
        payload = packing.pack_int4(levels.astype(np.uint8))

    folded = dequant.fold_scale_array(mf, scales) if bias_shift else None
    return QuantizedTensor(rows, cols, scheme, scales, zero_points,
                           payload, bias_shift, folded)


def _payload_codes(q: QuantizedTensor) -> np.ndarray:
    """Unpacked codes/levels for the whole tensor, length rows*cols."""
    n = q.rows * q.cols
    mf = q.scheme.fmt.minifloat
    if mf is not None:
        if not isinstance(q.payload, PackedSegments) or q.payload.code_count != n:
            raise PayloadMismatch("payload does not hold rows*cols codes")
        return packing.unpack(mf, q.payload)
    data = np.asarray(q.payload, dtype=np.uint8)
    return packing.unpack_int4(data, n)


def _per_element(q: QuantizedTensor, per_block: np.ndarray,
                 dtype: type) -> np.ndarray:
    _, widths = _flat_block_layout(q.rows, q.cols, q.scheme)
    return np.repeat(per_block.astype(dtype), widths)


def dequantize_tensor(q: QuantizedTensor, path: str = "naive") -> np.ndarray:
    """Element-exact inverse of the per-block quantization map.

    Minifloat tensors reconstruct ``scale * decoded_code`` through the
    selected path's algebra, carried in float64 so the product is exact
    (both factors have short significands); the two paths are therefore
    bit-identical here, while their binary16 rounding behaviour is the
    dequant module's concern.  INT4 reconstructs
    ``zero_point + scale * level`` in float64.
    """
    if q.rows == 0 or q.cols == 0:
        return np.zeros((q.rows, q.cols), dtype=np.float64)
    if q.num_blocks != num_blocks(q.rows, q.cols, q.scheme):
        raise PayloadMismatch("block parameter count does not match the scheme")
    codes = _payload_codes(q)
    mf = q.scheme.fmt.minifloat
    if mf is not None:
        if path == "naive":
            values = codec.value_table(mf)[codes] \
                * _per_element(q, q.scales, np.float64)
        elif path == "bias_shift":
            if q.folded_scales is None:
                raise PathUnavailable("tensor carries no folded scales")
            composed = dequant.compose_table_f16(mf)[codes].astype(np.float64)
            values = composed * _per_element(q, q.folded_scales, np.float64)
        else:
            raise ValueError(f"unknown dequantization path {path!r}")
        return values.reshape(q.rows, q.cols)
    s_elem = _per_element(q, q.scales, np.float64)
    z_elem = _per_element(q, q.zero_points, np.float64)
    return (z_elem + s_elem * codes.astype(np.float64)).reshape(q.rows, q.cols)


def error_report(W: np.ndarray, W_hat: np.ndarray) -> ErrorReport:
    """Element-wise MSE / max-abs / SQNR between a tensor and its proxy."""
    W = np.asarray(W, dtype=np.float64)
    W_hat = np.asarray(W_hat, dtype=np.float64)
    if W.shape != W_hat.shape:
        raise ShapeError(f"shape mismatch: {W.shape} vs {W_hat.shape}")
    if W.size == 0:
        return ErrorReport(mse=0.0, max_abs_error=0.0, sqnr_db=float("inf"))
    err = W - W_hat
    mse = float(np.mean(err * err))
    max_abs = float(np.max(np.abs(err)))
    signal = float(np.mean(W * W))
    if mse == 0.0:
        sqnr = float("inf")
    elif signal == 0.0:
        sqnr = float("-inf")
    else:
        sqnr = 10.0 * np.log10(signal / mse)
    return ErrorReport(mse=mse, max_abs_error=max_abs, sqnr_db=float(sqnr))
