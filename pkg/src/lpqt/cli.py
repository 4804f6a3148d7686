"""Command-line front end for quantization workflows.

All success output is machine-parsable ``key=value`` lines on stdout;
failures print a single ``error=...`` line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec, container, gemm, packing, quantizer
from .errors import LpqtError
from .quantizer import Granularity, QuantScheme, TensorFormat

DEFAULT_FGQ_BLOCK = 256
_BENCH_INT4_BLOCK = 128
_BENCH_SEED = 20240

_FORMAT_FLAGS = {"fp6": TensorFormat.FP6_E3M2, "fp5": TensorFormat.FP5_E3M1,
                 "int4": TensorFormat.INT4_ASYM}
_SCHEME_FLAGS = {"cgq": Granularity.CGQ, "fgq": Granularity.FGQ}
_PATH_FLAGS = {"naive": "naive", "bias-shift": "bias_shift"}
_DTYPE_FLAGS = {"f32": "f32le", "f16": "f16le"}


@dataclass(frozen=True)
class BenchPreset:
    name: str
    rows: int
    cols: int
    batch: int


BENCH_PRESETS = {
    p.name: p for p in (
        BenchPreset("ffn1-1b", 5504, 2048, 8),
        BenchPreset("ffn2-1b", 2048, 5504, 8),
        BenchPreset("ffn1-13b", 13824, 5120, 8),
        BenchPreset("ffn2-13b", 5120, 13824, 8),
        BenchPreset("ffn1-65b", 22016, 8192, 8),
        BenchPreset("ffn2-65b", 8192, 22016, 8),
    )
}


def _parse_shape(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise LpqtError(f"shape must look like ROWSxCOLS, got {text!r}") from None
    if rows < 0 or cols < 0:
        raise LpqtError("shape dimensions must be non-negative")
    return rows, cols


def _load_raw(path: str, shape: str, dtype: str) -> np.ndarray:
    rows, cols = _parse_shape(shape)
    return container.read_raw(Path(path).read_bytes(), rows, cols,
                              _DTYPE_FLAGS[dtype])


def _payload_bytes(q: quantizer.QuantizedTensor) -> int:
    if isinstance(q.payload, packing.PackedSegments):
        return int(q.payload.seg4.size + q.payload.seg_tail.size)
    return int(np.asarray(q.payload).size)


def _weight_stream_bytes(q: quantizer.QuantizedTensor) -> int:
    """Payload plus per-block parameters, as read at inference time."""
    params = q.num_blocks * 2
    if q.zero_points is not None:
        params += q.num_blocks * 2
    return _payload_bytes(q) + params


def cmd_quantize(args: argparse.Namespace) -> int:
    fmt = _FORMAT_FLAGS[args.format]
    granularity = _SCHEME_FLAGS[args.scheme]
    block_size = args.block_size if granularity is Granularity.FGQ else 0
    scheme = QuantScheme(granularity=granularity, fmt=fmt, block_size=block_size)
    W = _load_raw(args.input, args.shape, args.dtype)
    q = quantizer.quantize_tensor(W, scheme, bias_shift=args.bias_shift)
    data = container.write_lpqt(q)
    Path(args.output).write_bytes(data)
    payload = _payload_bytes(q)
    baseline = q.rows * q.cols * 2
    ratio = _weight_stream_bytes(q) / baseline if baseline else 0.0
    print(f"rows={q.rows}")
    print(f"cols={q.cols}")
    print(f"blocks={q.num_blocks}")
    print(f"payload_bytes={payload}")
    print(f"container_bytes={len(data)}")
    print(f"ratio_vs_fp16={ratio:.6f}")
    return 0


def cmd_dequantize(args: argparse.Namespace) -> int:
    q = container.read_lpqt(Path(args.input).read_bytes())
    W_hat = quantizer.dequantize_tensor(q, path=_PATH_FLAGS[args.path])
    Path(args.output).write_bytes(W_hat.astype("<f4").tobytes())
    print(f"rows={q.rows}")
    print(f"cols={q.cols}")
    print(f"path={args.path}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    q = container.read_lpqt(Path(args.input).read_bytes())
    W = _load_raw(args.reference, args.shape, args.dtype)
    W_hat = quantizer.dequantize_tensor(q)
    report = quantizer.error_report(W, W_hat)
    print(f"mse={report.mse:.12g}")
    print(f"max_abs={report.max_abs_error:.12g}")
    print(f"sqnr_db={report.sqnr_db:.12g}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    q = container.read_lpqt(Path(args.input).read_bytes())
    print(f"magic={container.MAGIC.decode()}")
    print(f"version={container.VERSION}")
    print(f"format={q.scheme.fmt.value}")
    print(f"granularity={q.scheme.granularity.value}")
    print(f"block_size={q.scheme.block_size}")
    print(f"rows={q.rows}")
    print(f"cols={q.cols}")
    print(f"bias_shift={int(q.bias_shift)}")
    print(f"blocks={q.num_blocks}")
    head = ",".join(f"{float(s):.9g}" for s in q.scales[:8])
    print(f"scales_head={head}")
    if isinstance(q.payload, packing.PackedSegments):
        print(f"seg4_bytes={q.payload.seg4.size}")
        print(f"tail_bytes={q.payload.seg_tail.size}")
    else:
        print(f"nibble_bytes={np.asarray(q.payload).size}")
    return 0


def cmd_gemm(args: argparse.Namespace) -> int:
    wq = container.read_lpqt(Path(args.weights).read_bytes())
    X = _load_raw(args.activations, f"{wq.cols}x{args.m}", args.dtype)
    Y = gemm.gemm_quantized(wq, X)
    if args.output:
        Path(args.output).write_bytes(Y.astype("<f4").tobytes())
    print(f"rows={Y.shape[0]}")
    print(f"m={Y.shape[1]}")
    if args.check:
        W_hat = quantizer.dequantize_tensor(wq)
        Y_ref = gemm.gemm_reference(W_hat, X)
        report = gemm.compare_outputs(Y, Y_ref)
        tol = gemm.gemm_tolerance(wq.cols, W_hat, X)
        print(f"check_max_abs={report.max_abs_error:.12g}")
        print(f"check_tolerance={tol:.12g}")
        if report.max_abs_error > tol:
            print("check=fail")
            return 1
        print("check=pass")
    return 0


def _bench_paths(rows: int, cols: int, batch: int):
    rng = np.random.default_rng(_BENCH_SEED)
    W = rng.standard_normal((rows, cols)).astype(np.float32)
    X = rng.standard_normal((cols, batch)).astype(np.float16)
    W16 = W.astype(np.float16)
    q6 = quantizer.quantize_tensor(
        W, QuantScheme(Granularity.CGQ, TensorFormat.FP6_E3M2), bias_shift=True)
    q4 = quantizer.quantize_tensor(
        W, QuantScheme(Granularity.FGQ, TensorFormat.INT4_ASYM,
                       block_size=min(_BENCH_INT4_BLOCK, cols)))
    return [
        ("fp16_dense", lambda: gemm.gemm_dense(W16, X), rows * cols * 2),
        ("fp6_naive",
         lambda: gemm.gemm_dense(quantizer.dequantize_tensor(q6, "naive"), X),
         _weight_stream_bytes(q6)),
        ("fp6_bias_shift",
         lambda: gemm.gemm_dense(quantizer.dequantize_tensor(q6, "bias_shift"), X),
         _weight_stream_bytes(q6)),
        ("int4_fgq",
         lambda: gemm.gemm_dense(quantizer.dequantize_tensor(q4), X),
         _weight_stream_bytes(q4)),
    ]


def cmd_bench(args: argparse.Namespace) -> int:
    if args.preset:
        preset = BENCH_PRESETS.get(args.preset)
        if preset is None:
            raise LpqtError(f"unknown preset {args.preset!r}; "
                            f"choose from {sorted(BENCH_PRESETS)}")
        rows, cols, batch = preset.rows, preset.cols, preset.batch
    elif args.shape:
        rows, cols = _parse_shape(args.shape)
        batch = args.batch
    else:
        raise LpqtError("bench needs --preset or --shape")
    if rows < 1 or cols < 1 or batch < 1 or args.repeat < 1:
        raise LpqtError("bench dimensions and repeat must be positive")
    print(f"shape={rows}x{cols}")
    print(f"batch={batch}")
    print(f"repeat={args.repeat}")
    for name, run, weight_bytes in _bench_paths(rows, cols, batch):
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            run()
            times.append((time.perf_counter() - t0) * 1e3)
        median = sorted(times)[len(times) // 2]
        print(f"path={name} median_ms={median:.3f} weight_bytes={weight_bytes}")
    return 0


def cmd_codebook(args: argparse.Namespace) -> int:
    fmt = _FORMAT_FLAGS[args.format].minifloat
    entries = codec.codebook(fmt)
    # value order makes the range endpoints obvious
    for code, value in sorted(entries, key=lambda cv: (cv[1], cv[0])):
        seg4, tail = packing.split_code(fmt, code)
        print(f"code=0b{code:0{fmt.total_bits}b} value={value:.9g} "
              f"seg4=0b{seg4:04b} tail=0b{tail:0{fmt.mantissa_bits}b}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpqt",
        description="Weight-only FP6/FP5/INT4 quantization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize a raw dense tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", required=True, help="ROWSxCOLS")
    p.add_argument("--dtype", choices=["f32", "f16"], default="f32")
    p.add_argument("--format", choices=["fp6", "fp5", "int4"], required=True)
    p.add_argument("--scheme", choices=["cgq", "fgq"], default="cgq")
    p.add_argument("--block-size", type=int, default=DEFAULT_FGQ_BLOCK)
    p.add_argument("--bias-shift", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("dequantize", help="expand an .lpqt file to raw f32")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--path", choices=["naive", "bias-shift"], default="naive")
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("stats", help="error report against a reference tensor")
    p.add_argument("--input", required=True, help=".lpqt file")
    p.add_argument("--reference", required=True, help="raw reference tensor")
    p.add_argument("--shape", required=True)
    p.add_argument("--dtype", choices=["f32", "f16"], default="f32")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("inspect", help="dump container header and sizes")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("gemm", help="multiply quantized weights by activations")
    p.add_argument("--weights", required=True, help=".lpqt file")
    p.add_argument("--activations", required=True, help="raw KxM tensor")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--dtype", choices=["f32", "f16"], default="f32")
    p.add_argument("--output")
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("bench", help="CPU reference microbenchmark")
    p.add_argument("--preset", help="|".join(sorted(BENCH_PRESETS)))
    p.add_argument("--shape", help="ROWSxCOLS")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("codebook", help="print every code of a minifloat format")
    p.add_argument("--format", choices=["fp6", "fp5"], required=True)
    p.set_defaults(func=cmd_codebook)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except LpqtError as exc:
        print(f"error={type(exc).__name__} msg={exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error=OSError msg={exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
