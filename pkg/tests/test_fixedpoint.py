import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msld.fixedpoint import (
    FixedPoint,
    FixedPointOverflowError,
    div_round_half_away,
    div_round_half_away_i64,
    fx_add,
    fx_div,
    fx_from_int,
    fx_from_real,
    fx_mul,
    fx_reciprocal,
    fx_sqrt,
    fx_sub,
    fx_to_real,
)

F = 18
ULP = 2.0 ** -F


def fx(v, f=F):
    return fx_from_real(v, f)


class TestConversion:
    def test_one_and_a_half(self):
        assert fx(1.5).raw == 393216

    def test_zero(self):
        assert fx(0.0).raw == 0

    def test_half_ulp_rounds_up(self):
        assert fx(2.0 ** -19).raw == 1

    def test_negative_half_ulp_rounds_away(self):
        assert fx(-(2.0 ** -19)).raw == -1

    def test_roundtrip_on_representable(self):
        for v in (0.25, -3.125, 100.0, 0.0, -0.5):
            assert fx_to_real(fx(v)) == v

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fx(float("nan"))
        with pytest.raises(ValueError):
            fx(float("inf"))

    def test_overflow_rejected(self):
        with pytest.raises(FixedPointOverflowError):
            fx_from_real(2.0 ** 50, F)
        with pytest.raises(FixedPointOverflowError):
            FixedPoint(1 << 63, F)


class TestAddSub:
    def test_exact_add(self):
        assert fx_to_real(fx_add(fx(1.25), fx(0.75))) == 2.0

    def test_self_cancel(self):
        a = fx(0.8125)
        assert fx_sub(a, a).raw == 0

    def test_mismatched_widths_rejected(self):
        with pytest.raises(ValueError):
            fx_add(fx_from_real(1.0, 18), fx_from_real(1.0, 16))

    @given(a=st.integers(-10**9, 10**9), b=st.integers(-10**9, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_add_sub_match_rationals(self, a, b):
        fa, fb = FixedPoint(a, F), FixedPoint(b, F)
        ra, rb = Fraction(a, 1 << F), Fraction(b, 1 << F)
        assert Fraction(fx_add(fa, fb).raw, 1 << F) == ra + rb
        assert Fraction(fx_sub(fa, fb).raw, 1 << F) == ra - rb


class TestMul:
    def test_exact_quarters(self):
        assert fx_to_real(fx_mul(fx(0.5), fx(0.5))) == 0.25

    def test_identity(self):
        one = fx(1.0)
        for v in (0.75, -12.625, 0.0):
            assert fx_mul(fx(v), one).raw == fx(v).raw

    @given(a=st.integers(-10**7, 10**7), b=st.integers(-10**7, 10**7))
    @settings(max_examples=200, deadline=None)
    def test_within_half_ulp_of_real_product(self, a, b):
        fa, fb = FixedPoint(a, F), FixedPoint(b, F)
        exact = Fraction(a, 1 << F) * Fraction(b, 1 << F)
        got = Fraction(fx_mul(fa, fb).raw, 1 << F)
        assert abs(got - exact) <= Fraction(1, 1 << (F + 1))


class TestDivSqrt:
    def test_sqrt_one(self):
        assert fx_to_real(fx_sqrt(fx(1.0))) == 1.0

    def test_sqrt_four(self):
        assert fx_to_real(fx_sqrt(fx(4.0))) == 2.0

    def test_sqrt_negative_rejected(self):
        with pytest.raises(ValueError):
            fx_sqrt(fx(-1.0))

    def test_divide_by_zero_rejected(self):
        with pytest.raises(ZeroDivisionError):
            fx_div(fx(1.0), fx(0.0))

    @given(a=st.integers(-10**7, 10**7), b=st.integers(-10**7, 10**7).filter(lambda x: x != 0))
    @settings(max_examples=200, deadline=None)
    def test_div_within_one_ulp(self, a, b):
        fa, fb = FixedPoint(a, F), FixedPoint(b, F)
        exact = Fraction(a, b)
        got = Fraction(fx_div(fa, fb).raw, 1 << F)
        assert abs(got - exact) <= Fraction(1, 1 << F)

    @given(a=st.integers(0, 10**12))
    @settings(max_examples=200, deadline=None)
    def test_sqrt_within_one_ulp(self, a):
        got = fx_sqrt(FixedPoint(a, F)).value
        exact = math.sqrt(a / (1 << F))
        assert abs(got - exact) <= ULP


class TestReciprocal:
    def test_power_of_two_exact(self):
        assert fx_reciprocal(4, F).raw == (1 << F) // 4

    def test_one_is_identity_multiplier(self):
        r = fx_reciprocal(1, F)
        assert fx_mul(fx(123.5), r).raw == fx(123.5).raw

    @given(n=st.integers(1, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_within_half_ulp(self, n):
        got = Fraction(fx_reciprocal(n, F).raw, 1 << F)
        assert abs(got - Fraction(1, n)) <= Fraction(1, 1 << (F + 1))


class TestRoundingHelpers:
    @given(num=st.integers(-10**12, 10**12), den=st.integers(1, 10**6))
    @settings(max_examples=300, deadline=None)
    def test_scalar_matches_fraction_rounding(self, num, den):
        got = div_round_half_away(num, den)
        frac = Fraction(num, den)
        floor = frac.numerator // frac.denominator
        rem = frac - floor
        expected = floor + 1 if rem > Fraction(1, 2) else floor
        if rem == Fraction(1, 2):
            expected = floor + 1 if num >= 0 else floor
        assert got == expected

    @given(
        nums=st.lists(st.integers(-10**9, 10**9), min_size=1, max_size=32),
        den=st.integers(1, 10**6),
    )
    @settings(max_examples=200, deadline=None)
    def test_vector_matches_scalar(self, nums, den):
        arr = np.array(nums, dtype=np.int64)
        got = div_round_half_away_i64(arr, den)
        expected = [div_round_half_away(int(n), den) for n in nums]
        assert got.tolist() == expected


def test_from_int_scales_exactly():
    assert fx_from_int(255, F).raw == 255 << F
    assert fx_from_int(-3, F).raw == -(3 << F)
