"""Reference dequantize-on-the-fly matrix multiply ``Y = W_hat @ X``.

Scale application follows the quantization granularity: fine-grain
schemes accumulate each block's raw-code partial dot product and apply
the block scale before adding into the row accumulator; coarse-grain
schemes apply the row scale once after the whole row is accumulated.
Accumulation is binary32 in fixed ascending-k order, so results are
bit-reproducible regardless of thread count.
"""

from __future__ import annotations

import numpy as np

from . import codec
from .errors import PayloadMismatch, ShapeError
from .quantizer import (Granularity, QuantizedTensor, block_widths,
                        error_report, ErrorReport, num_blocks, _payload_codes)


def _check_activation(X: np.ndarray, k: int) -> None:
    if X.ndim != 2:
        raise ShapeError(f"activations must be 2-D, got shape {X.shape}")
    if X.shape[0] != k:
        raise ShapeError(f"inner dimensions differ: weights K={k}, activations K={X.shape[0]}")


def gemm_reference(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Double-precision oracle with the same ascending-k ordering."""
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeError(f"weights must be 2-D, got shape {W.shape}")
    _check_activation(X, W.shape[1])
    acc = np.zeros((W.shape[0], X.shape[1]), dtype=np.float64)
    for k in range(W.shape[1]):
        acc += W[:, k:k + 1] * X[k:k + 1, :]
    return acc


def gemm_dense(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Binary32 dense multiply, ascending-k (deterministic baseline)."""
    W = np.asarray(W, dtype=np.float32)
    X = np.asarray(X, dtype=np.float32)
    if W.ndim != 2:
        raise ShapeError(f"weights must be 2-D, got shape {W.shape}")
    _check_activation(X, W.shape[1])
    acc = np.zeros((W.shape[0], X.shape[1]), dtype=np.float32)
    for k in range(W.shape[1]):
        acc += W[:, k:k + 1] * X[k:k + 1, :]
    return acc


def _raw_code_values(wq: QuantizedTensor) -> np.ndarray:
    """Unscaled codebook values (or INT4 levels) as a float32 matrix."""
    codes = _payload_codes(wq)
    mf = wq.scheme.fmt.minifloat
    if mf is not None:
        raw = codec.value_table(mf).astype(np.float32)[codes]
    else:
        raw = codes.astype(np.float32)
    return raw.reshape(wq.rows, wq.cols)


def gemm_quantized(wq: QuantizedTensor, X: np.ndarray) -> np.ndarray:
    """Multiply a quantized weight matrix (N x K) by activations (K x M)."""
    if wq.num_blocks != num_blocks(wq.rows, wq.cols, wq.scheme):
        raise PayloadMismatch("block parameter count does not match the scheme")
    X32 = np.asarray(X, dtype=np.float32)
    _check_activation(X32, wq.cols)
    n, k_total, m = wq.rows, wq.cols, X32.shape[1]
    out = np.zeros((n, m), dtype=np.float32)
    if n == 0 or k_total == 0 or m == 0:
        return out

    raw = _raw_code_values(wq)
    widths = block_widths(wq.cols, wq.scheme)
    bpr = len(widths)
    scales = wq.scales.astype(np.float32).reshape(n, bpr)
    is_int4 = wq.scheme.fmt.minifloat is None
    if is_int4:
        zps = wq.zero_points.astype(np.float32).reshape(n, bpr)

    if wq.scheme.granularity is Granularity.CGQ:
        acc = np.zeros((n, m), dtype=np.float32)
        for k in range(k_total):
            acc += raw[:, k:k + 1] * X32[k:k + 1, :]
        out = scales[:, 0:1] * acc
        if is_int4:
            sum_x = np.zeros(m, dtype=np.float32)
            for k in range(k_total):
                sum_x += X32[k, :]
            out = out + zps[:, 0:1] * sum_x[None, :]
        return out

    c0 = 0
    for j, width in enumerate(widths):
        c1 = c0 + int(width)
        partial = np.zeros((n, m), dtype=np.float32)
        for k in range(c0, c1):
            partial += raw[:, k:k + 1] * X32[k:k + 1, :]
        contrib = scales[:, j:j + 1] * partial
        if is_int4:
            sum_x = np.zeros(m, dtype=np.float32)
            for k in range(c0, c1):
                sum_x += X32[k, :]
            contrib = contrib + zps[:, j:j + 1] * sum_x[None, :]
        out += contrib
        c0 = c1
    return out


def compare_outputs(Y: np.ndarray, Y_ref: np.ndarray) -> ErrorReport:
    """Element-wise comparison report between two GEMM outputs."""
    return error_report(Y_ref, Y)


def gemm_tolerance(k: int, W_hat: np.ndarray, X: np.ndarray) -> float:
    """Element-wise binary32-vs-binary64 accumulation bound."""
    peak_w = float(np.max(np.abs(W_hat))) if np.asarray(W_hat).size else 0.0
    peak_x = float(np.max(np.abs(X))) if np.asarray(X).size else 0.0
    return 4.0 * float(np.finfo(np.float32).eps) * k * peak_w * peak_x
