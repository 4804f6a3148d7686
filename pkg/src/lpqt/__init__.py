"""lpqt: weight-only FP6/FP5/INT4 quantization toolkit.

Round-to-nearest quantization with coarse- (per row) and fine-grain
(block-k) scaling, a 4+2 segmented bit-packed storage format, two
bit-equivalent dequantization paths (naive and folded-scale), a
deterministic reference GEMM, and a binary ".lpqt" tensor container.
"""

from .codec import (FP5_E3M1, FP6_E3M2, MINIFLOAT_FORMATS, MiniFloatFormat,
                    codebook, decode, encode_rtn, encode_rtn_array,
                    value_table, value_table_f16)
from .container import read_lpqt, read_raw, write_lpqt
from .dequant import (FOLD_SHIFT, compose_table_f16, dequant_bias_shift,
                      dequant_bias_shift_array, dequant_block, dequant_naive,
                      dequant_naive_array, fold_scale, fold_scale_array)
from .errors import (BadMagic, InvalidCode, InvalidInput, InvalidScheme,
                     InvariantViolation, LengthMismatch, LpqtError,
                     PathUnavailable, PayloadMismatch, ScaleOverflow,
                     ShapeError, TruncatedPayload, UnsupportedVersion)
from .gemm import (compare_outputs, gemm_dense, gemm_quantized,
                   gemm_reference, gemm_tolerance)
from .packing import (PackedSegments, pack, pack_int4, seg4_length,
                      split_code, tail_length, unpack, unpack_int4)
from .quantizer import (BlockParams, ErrorReport, Granularity, QuantScheme,
                        QuantizedTensor, TensorFormat, block_widths,
                        compute_affine_params_int4, compute_scale_fp,
                        dequantize_tensor, error_report, num_blocks,
                        partition_blocks, quantize_tensor)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
