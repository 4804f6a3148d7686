"""Dequantization path tests: naive vs folded-scale bit equivalence."""

import numpy as np
import pytest

from lpqt import (FP5_E3M1, FP6_E3M2, InvalidInput, ScaleOverflow,
                  compose_table_f16, decode, dequant_bias_shift,
                  dequant_bias_shift_array, dequant_block, dequant_naive,
                  dequant_naive_array, fold_scale, fold_scale_array, pack)

FORMATS = [FP6_E3M2, FP5_E3M1]

F16_MAX = 65504.0


def _all_in_range_scales() -> np.ndarray:
    """Every positive binary16 whose folded value stays finite.

    Positive binary16 ordering is monotone in the bit pattern; 0x4BFF
    (15.9921875) is the largest value with 4096 * S <= 65504.
    """
    bits = np.arange(0x0001, 0x4C00, dtype=np.uint16)
    scales = bits.view(np.float16)
    assert float(scales[-1]) * 4096.0 == F16_MAX
    return scales


class TestFoldScale:
    def test_exponent_shift(self):
        assert fold_scale(FP6_E3M2, np.float16(2.0 ** -5)) == np.float16(128.0)

    def test_unit_scale(self):
        assert fold_scale(FP6_E3M2, np.float16(1.0)) == np.float16(4096.0)

    def test_overflow_rejected(self):
        with pytest.raises(ScaleOverflow):
            fold_scale(FP6_E3M2, np.float16(32.0))
        with pytest.raises(ScaleOverflow):
            fold_scale(FP6_E3M2, np.float16(16.0))

    def test_largest_in_range_scale(self):
        top = np.float16(15.9921875)
        assert float(fold_scale(FP6_E3M2, top)) == F16_MAX

    def test_subnormal_scale_becomes_normal_exactly(self):
        tiny = np.float16(2.0 ** -24)
        folded = fold_scale(FP6_E3M2, tiny)
        assert float(folded) == 2.0 ** -12

    def test_every_in_range_fold_is_exact(self):
        scales = _all_in_range_scales()
        folded = fold_scale_array(FP6_E3M2, scales)
        assert np.array_equal(folded.astype(np.float64),
                              scales.astype(np.float64) * 4096.0)

    def test_rejects_non_positive(self):
        with pytest.raises(InvalidInput):
            fold_scale(FP6_E3M2, np.float16(0.0))
        with pytest.raises(InvalidInput):
            fold_scale(FP6_E3M2, np.float16(-1.0))


class TestNaivePath:
    def test_max_code_small_scale(self):
        assert float(dequant_naive(FP6_E3M2, 0b011111, np.float16(2 ** -5))) == 0.875

    def test_zero_code(self):
        assert float(dequant_naive(FP6_E3M2, 0b000000, np.float16(0.25))) == 0.0

    def test_subnormal_code(self):
        assert float(dequant_naive(FP6_E3M2, 0b000001, np.float16(1.0))) == 0.0625

    @pytest.mark.parametrize("fmt", FORMATS)
    def test_unit_scale_reproduces_codebook(self, fmt):
        for code in range(fmt.code_count):
            assert float(dequant_naive(fmt, code, np.float16(1.0))) == decode(fmt, code)


class TestBiasShiftPath:
    def test_composed_bits_of_max_code(self):
        composed = compose_table_f16(FP6_E3M2)[0b011111]
        assert composed.view(np.uint16) == 0x1F00
        assert float(composed) == 0.0068359375
        assert float(dequant_bias_shift(FP6_E3M2, 0b011111, np.float16(128.0))) == 0.875

    def test_subnormal_needs_no_special_case(self):
        assert float(dequant_bias_shift(FP6_E3M2, 0b000001, np.float16(4096.0))) == 0.0625

    def test_signed_zero(self):
        out = dequant_bias_shift(FP6_E3M2, 0b100000, np.float16(4096.0))
        assert out == 0.0 and np.signbit(out)

    @pytest.mark.parametrize("fmt", FORMATS)
    def test_exhaustive_equivalence_with_naive(self, fmt):
        """The central claim: both paths are bit-identical over the
        whole code space crossed with every in-range binary16 scale."""
        scales = _all_in_range_scales()
        codes = np.arange(fmt.code_count, dtype=np.uint8)
        naive = dequant_naive_array(fmt, codes[:, None], scales[None, :])
        folded = fold_scale_array(fmt, scales)
        shifted = dequant_bias_shift_array(fmt, codes[:, None], folded[None, :])
        assert np.array_equal(naive.view(np.uint16), shifted.view(np.uint16))

    @pytest.mark.parametrize("fmt", FORMATS)
    def test_subnormal_codes_exact_on_both_paths(self, fmt):
        rng = np.random.default_rng(21)
        sign_bit = 1 << (fmt.total_bits - 1)
        subnormals = [c | s for c in range(1, 1 << fmt.mantissa_bits)
                      for s in (0, sign_bit)]
        scale_bits = rng.integers(1, 0x4C00, size=100, dtype=np.uint16)
        for sb in scale_bits:
            scale = sb.view(np.float16)
            folded = fold_scale(fmt, scale)
            for code in subnormals:
                frac = (code & ((1 << fmt.mantissa_bits) - 1)) / (1 << fmt.mantissa_bits)
                sign = -1.0 if code & sign_bit else 1.0
                exact = np.float16(float(scale) * sign * frac * 2.0 ** (1 - fmt.stored_bias))
                assert dequant_naive(fmt, code, scale) == exact
                assert dequant_bias_shift(fmt, code, folded) == exact


class TestPowerOfTwoExactness:
    @pytest.mark.parametrize("fmt", FORMATS)
    @pytest.mark.parametrize("exp", [-10, -5, -1, 0, 1, 3])
    def test_no_rounding_for_pow2_scales(self, fmt, exp):
        scale = np.float16(2.0 ** exp)
        for code in range(fmt.code_count):
            out = float(dequant_naive(fmt, code, scale))
            assert out == decode(fmt, code) * 2.0 ** exp


class TestDequantBlock:
    def test_zero_block(self):
        seg = pack(FP6_E3M2, [0] * 8)
        out = dequant_block(FP6_E3M2, seg, np.float16(1.0))
        assert np.array_equal(out, np.zeros(8, np.float16))

    def test_documented_four_code_block(self):
        seg = pack(FP6_E3M2, [0b011111, 0b001100, 0b000000, 0b100001])
        out = dequant_block(FP6_E3M2, seg, np.float16(1.0))
        assert list(out.astype(np.float64)) == [28.0, 1.0, 0.0, -0.0625]

    def test_paths_agree_on_random_blocks(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            n = int(rng.integers(1, 100))
            codes = rng.integers(0, 64, size=n, dtype=np.uint8)
            scale = np.float16(float(rng.uniform(2e-5, 15.0)))
            if scale == 0:
                continue
            seg = pack(FP6_E3M2, codes)
            a = dequant_block(FP6_E3M2, seg, scale, path="naive")
            b = dequant_block(FP6_E3M2, seg, scale, path="bias_shift")
            assert np.array_equal(a.view(np.uint16), b.view(np.uint16))

    def test_explicit_folded_scale(self):
        seg = pack(FP6_E3M2, [0b011111])
        out = dequant_block(FP6_E3M2, seg, np.float16(2 ** -5),
                            path="bias_shift", folded_scale=np.float16(128.0))
        assert float(out[0]) == 0.875

    def test_unknown_path(self):
        seg = pack(FP6_E3M2, [0])
        with pytest.raises(ValueError):
            dequant_block(FP6_E3M2, seg, np.float16(1.0), path="fast")
