"""End-to-end command-line tests (run in-process via cli.main)."""

import numpy as np
import pytest

from lpqt import read_raw
from lpqt.cli import BENCH_PRESETS, main


def _write_raw(path, array, dtype="<f4"):
    path.write_bytes(np.ascontiguousarray(array, dtype=dtype).tobytes())


def _kv(capsys):
    out = capsys.readouterr().out
    pairs = {}
    for line in out.strip().splitlines():
        for token in line.split():
            if "=" in token:
                key, value = token.split("=", 1)
                pairs[key] = value
    return pairs


@pytest.fixture
def weights_file(tmp_path):
    rng = np.random.default_rng(51)
    W = rng.standard_normal((4, 8))
    path = tmp_path / "w.f32"
    _write_raw(path, W)
    return path, W


class TestQuantizeCommand:
    def test_fp6_cgq_reports_sizes(self, tmp_path, weights_file, capsys):
        path, W = weights_file
        out = tmp_path / "w.lpqt"
        rc = main(["quantize", "--input", str(path), "--shape", "4x8",
                   "--dtype", "f32", "--format", "fp6", "--scheme", "cgq",
                   "--output", str(out)])
        assert rc == 0
        kv = _kv(capsys)
        assert kv["blocks"] == "4"
        # 6-bit payload (4+2 split, both arrays 4-byte aligned) plus one
        # scale per row over the 16-bit baseline
        from lpqt import FP6_E3M2, seg4_length, tail_length
        payload = seg4_length(32) + tail_length(FP6_E3M2, 32)
        assert int(kv["payload_bytes"]) == payload
        expected_ratio = (payload + 4 * 2) / (4 * 8 * 2)
        assert float(kv["ratio_vs_fp16"]) == pytest.approx(expected_ratio)
        assert out.exists()

    def test_fgq_default_block_size_is_256(self, tmp_path, capsys):
        rng = np.random.default_rng(52)
        W = rng.standard_normal((1, 1024))
        src = tmp_path / "w.f32"
        _write_raw(src, W)
        out = tmp_path / "w.lpqt"
        rc = main(["quantize", "--input", str(src), "--shape", "1x1024",
                   "--format", "fp6", "--scheme", "fgq",
                   "--output", str(out)])
        assert rc == 0
        assert _kv(capsys)["blocks"] == "4"
        main(["inspect", "--input", str(out)])
        assert _kv(capsys)["block_size"] == "256"

    def test_int4_with_bias_shift_rejected(self, tmp_path, weights_file, capsys):
        path, _ = weights_file
        rc = main(["quantize", "--input", str(path), "--shape", "4x8",
                   "--format", "int4", "--bias-shift",
                   "--output", str(tmp_path / "x.lpqt")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error=") and "\n" not in err.strip()

    def test_missing_input_file(self, tmp_path, capsys):
        rc = main(["quantize", "--input", str(tmp_path / "nope"),
                   "--shape", "1x1", "--format", "fp6",
                   "--output", str(tmp_path / "x.lpqt")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error=")


class TestDequantizeCommand:
    def test_grid_exact_round_trip_reproduces_f32_bytes(self, tmp_path, capsys):
        # every element is scale * codebook value with the max pinned
        W = np.array([[1.75, -0.5, 0.25, 7.0],
                      [3.5, 0.0625, -7.0, 7.0]], dtype=np.float32)
        src = tmp_path / "w.f32"
        _write_raw(src, W)
        lpqt_path = tmp_path / "w.lpqt"
        out = tmp_path / "back.f32"
        assert main(["quantize", "--input", str(src), "--shape", "2x4",
                     "--format", "fp6", "--output", str(lpqt_path)]) == 0
        assert main(["dequantize", "--input", str(lpqt_path),
                     "--output", str(out)]) == 0
        assert out.read_bytes() == src.read_bytes()

    def test_both_paths_identical_files(self, tmp_path, weights_file):
        path, _ = weights_file
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "fp6", "--bias-shift", "--output", str(lpqt_path)])
        a, b = tmp_path / "a.f32", tmp_path / "b.f32"
        assert main(["dequantize", "--input", str(lpqt_path), "--output",
                     str(a), "--path", "naive"]) == 0
        assert main(["dequantize", "--input", str(lpqt_path), "--output",
                     str(b), "--path", "bias-shift"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bias_shift_without_folded_scales(self, tmp_path, weights_file, capsys):
        path, _ = weights_file
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "fp6", "--output", str(lpqt_path)])
        rc = main(["dequantize", "--input", str(lpqt_path),
                   "--output", str(tmp_path / "x.f32"), "--path", "bias-shift"])
        assert rc == 1
        assert "PathUnavailable" in capsys.readouterr().err


class TestStatsCommand:
    def test_exact_reconstruction_reports_zero_mse(self, tmp_path, capsys):
        W = np.array([[1.75, -0.875, 7.0, 0.0]], dtype=np.float32)
        src = tmp_path / "w.f32"
        _write_raw(src, W)
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(src), "--shape", "1x4",
              "--format", "fp6", "--output", str(lpqt_path)])
        capsys.readouterr()
        rc = main(["stats", "--input", str(lpqt_path), "--reference",
                   str(src), "--shape", "1x4", "--dtype", "f32"])
        kv = _kv(capsys)
        assert rc == 0
        assert float(kv["mse"]) == 0.0
        assert kv["sqnr_db"] == "inf"

    def test_fp6_beats_int4_on_gaussian(self, tmp_path, capsys):
        rng = np.random.default_rng(53)
        W = rng.standard_normal((32, 64))
        src = tmp_path / "w.f32"
        _write_raw(src, W)
        mses = {}
        for fmt in ("fp6", "int4"):
            lpqt_path = tmp_path / f"{fmt}.lpqt"
            main(["quantize", "--input", str(src), "--shape", "32x64",
                  "--format", fmt, "--output", str(lpqt_path)])
            capsys.readouterr()
            main(["stats", "--input", str(lpqt_path), "--reference",
                  str(src), "--shape", "32x64"])
            mses[fmt] = float(_kv(capsys)["mse"])
        assert mses["fp6"] < mses["int4"]

    def test_missing_reference(self, tmp_path, weights_file, capsys):
        path, _ = weights_file
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "fp6", "--output", str(lpqt_path)])
        rc = main(["stats", "--input", str(lpqt_path), "--reference",
                   str(tmp_path / "nope"), "--shape", "4x8"])
        assert rc == 1


class TestInspectCommand:
    def test_dump_fields(self, tmp_path, weights_file, capsys):
        path, _ = weights_file
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "fp5", "--scheme", "fgq", "--block-size", "4",
              "--output", str(lpqt_path)])
        capsys.readouterr()
        rc = main(["inspect", "--input", str(lpqt_path)])
        kv = _kv(capsys)
        assert rc == 0
        assert kv["format"] == "fp5"
        assert kv["granularity"] == "fgq"
        assert kv["block_size"] == "4"
        assert kv["blocks"] == "8"
        assert "tail_bytes" in kv

    def test_bad_magic(self, tmp_path, capsys):
        bad = tmp_path / "bad.lpqt"
        bad.write_bytes(b"QPT?" + b"\x00" * 60)
        rc = main(["inspect", "--input", str(bad)])
        assert rc == 1
        assert "BadMagic" in capsys.readouterr().err


class TestGemmCommand:
    def test_identity_check_passes(self, tmp_path, capsys):
        # scale lands exactly on 0.0625, so the identity is grid-exact
        W = 1.75 * np.eye(4, dtype=np.float32)
        src, act = tmp_path / "w.f32", tmp_path / "x.f32"
        _write_raw(src, W)
        rng = np.random.default_rng(54)
        X = rng.standard_normal((4, 3)).astype(np.float32)
        _write_raw(act, X)
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(src), "--shape", "4x4",
              "--format", "fp6", "--output", str(lpqt_path)])
        capsys.readouterr()
        out = tmp_path / "y.f32"
        rc = main(["gemm", "--weights", str(lpqt_path), "--activations",
                   str(act), "--m", "3", "--output", str(out), "--check"])
        kv = _kv(capsys)
        assert rc == 0
        assert kv["check"] == "pass"
        Y = read_raw(out.read_bytes(), 4, 3, "f32le")
        assert np.allclose(Y, 1.75 * X, rtol=1e-6)

    def test_random_check_passes(self, tmp_path, weights_file, capsys):
        path, W = weights_file
        act = tmp_path / "x.f32"
        rng = np.random.default_rng(55)
        _write_raw(act, rng.standard_normal((8, 5)).astype(np.float32))
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "int4", "--scheme", "fgq", "--block-size", "4",
              "--output", str(lpqt_path)])
        capsys.readouterr()
        rc = main(["gemm", "--weights", str(lpqt_path), "--activations",
                   str(act), "--m", "5", "--output",
                   str(tmp_path / "y.f32"), "--check"])
        assert rc == 0
        assert _kv(capsys)["check"] == "pass"

    def test_mismatched_k(self, tmp_path, weights_file, capsys):
        path, _ = weights_file
        lpqt_path = tmp_path / "w.lpqt"
        main(["quantize", "--input", str(path), "--shape", "4x8",
              "--format", "fp6", "--output", str(lpqt_path)])
        act = tmp_path / "x.f32"
        _write_raw(act, np.zeros((4, 2), dtype=np.float32))  # K=8 expected
        rc = main(["gemm", "--weights", str(lpqt_path), "--activations",
                   str(act), "--m", "2", "--output", str(tmp_path / "y.f32")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error=")


class TestBenchCommand:
    def test_preset_table_matches_published_shapes(self):
        shapes = {name: (p.rows, p.cols, p.batch)
                  for name, p in BENCH_PRESETS.items()}
        assert shapes["ffn1-1b"] == (5504, 2048, 8)
        assert shapes["ffn2-1b"] == (2048, 5504, 8)
        assert shapes["ffn1-13b"] == (13824, 5120, 8)
        assert shapes["ffn2-13b"] == (5120, 13824, 8)
        assert shapes["ffn1-65b"] == (22016, 8192, 8)
        assert shapes["ffn2-65b"] == (8192, 22016, 8)

    def test_minimal_smoke_run(self, capsys):
        rc = main(["bench", "--shape", "24x32", "--batch", "4",
                   "--repeat", "1"])
        out = capsys.readouterr().out
        assert rc == 0
        for path in ("fp16_dense", "fp6_naive", "fp6_bias_shift", "int4_fgq"):
            assert f"path={path}" in out

    def test_weight_bytes_column(self, capsys):
        rc = main(["bench", "--shape", "16x64", "--batch", "2",
                   "--repeat", "1"])
        assert rc == 0
        lines = {line.split()[0].split("=")[1]: line.split()
                 for line in capsys.readouterr().out.splitlines()
                 if line.startswith("path=")}
        dense = int(lines["fp16_dense"][2].split("=")[1])
        fp6 = int(lines["fp6_naive"][2].split("=")[1])
        assert dense == 16 * 64 * 2
        # packed payload is 37.5% of fp16 plus one scale per row
        assert fp6 == int(0.375 * dense) + 16 * 2

    def test_unknown_preset(self, capsys):
        rc = main(["bench", "--preset", "ffn9-99b"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error=")

    def test_needs_preset_or_shape(self, capsys):
        assert main(["bench"]) == 1


class TestCodebookCommand:
    def test_fp6_lists_64_rows_ending_at_max(self, capsys):
        rc = main(["codebook", "--format", "fp6"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert rc == 0
        assert len(lines) == 64
        assert "value=28" in lines[-1]
        assert "value=-28" in lines[0]
        assert "seg4=" in lines[0] and "tail=" in lines[0]

    def test_fp5_lists_32_rows_ending_at_24(self, capsys):
        rc = main(["codebook", "--format", "fp5"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert rc == 0
        assert len(lines) == 32
        assert "value=24" in lines[-1]

    def test_invalid_format_is_usage_error(self, capsys):
        assert main(["codebook", "--format", "fp4"]) != 0


class TestDeterminism:
    def test_quantize_twice_same_bytes(self, tmp_path, weights_file):
        path, _ = weights_file
        out1, out2 = tmp_path / "a.lpqt", tmp_path / "b.lpqt"
        for out in (out1, out2):
            assert main(["quantize", "--input", str(path), "--shape", "4x8",
                         "--format", "fp6", "--scheme", "fgq",
                         "--block-size", "3", "--output", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
