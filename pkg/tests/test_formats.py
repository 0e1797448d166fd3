from fractions import Fraction

import pytest

from perfid.errors import UnsupportedFormatError
from perfid.formats import (
    FormatSpec,
    classify_format,
    de_lathauwer_bound,
    expected_generic_rank,
    format_to_string,
    is_perfect,
    monomial_exponents,
    parse_format,
    plane_curve_divisor,
    unbalanced_count,
)


@pytest.mark.parametrize("text, groups", [
    ("3,4,5", ((3, 1), (4, 1), (5, 1))),
    ("sym5:3", ((3, 5),)),
    ("sym3:3,2,2", ((3, 3), (2, 1), (2, 1))),
    (" 2, 2 ", ((2, 1), (2, 1))),
])
def test_parse_format(text, groups):
    fmt = parse_format(text)
    assert fmt.groups == groups
    assert parse_format(format_to_string(fmt)) == fmt


@pytest.mark.parametrize("bad", ["", "3,,4", "sym:3", "symx:3", "3,a", "1,4", "sym0:3"])
def test_parse_format_rejects(bad):
    with pytest.raises(ValueError):
        parse_format(bad)


def test_ambient_and_blocks():
    fmt = parse_format("sym3:3,2,2")
    assert fmt.block_sizes == (10, 2, 2)
    assert fmt.ambient_dim == 40
    assert fmt.order == 5
    assert not fmt.is_ordinary


@pytest.mark.parametrize("text, R", [
    ("3,4,5", Fraction(6)),
    ("2,2,2,3", Fraction(4)),
    ("sym5:3", Fraction(7)),
    ("sym7:3", Fraction(12)),
    ("sym3:3,2,2", Fraction(8)),
    ("2,2", Fraction(4, 3)),
])
def test_expected_generic_rank(text, R):
    assert expected_generic_rank(parse_format(text)) == R
    assert is_perfect(parse_format(text)) == (R.denominator == 1)


@pytest.mark.parametrize("k", range(2, 9))
def test_two_k_k_rank(k):
    assert expected_generic_rank(FormatSpec.ordinary(2, k, k)) == k


def test_classify():
    assert classify_format(parse_format("3,3,5")) == {"perfect": True, "balanced": False, "regime": "boundary"}
    assert classify_format(parse_format("3,4,5")) == {"perfect": True, "balanced": True, "regime": "balanced"}
    assert classify_format(parse_format("5,4,3"))["regime"] == "balanced"
    assert classify_format(parse_format("2,2,9"))["regime"] == "unbalanced"
    # 2 == 2*2 - 2 puts (2,2,2) on the boundary
    assert classify_format(parse_format("2,2,2")) == {"perfect": True, "balanced": False, "regime": "boundary"}
    with pytest.raises(UnsupportedFormatError):
        classify_format(parse_format("sym3:3,2,2"))


@pytest.mark.parametrize("text, r, count", [
    ("2,5,5", 5, 1),
    ("3,3,5", 5, 6),
    ("3,4,7", 7, 120),
    ("3,5,9", 9, 5005),
    ("3,6,11", 11, 352716),
    ("4,4,10", 10, 184756),
    ("2,2,2,5", 5, 6),
    ("2,2,3,8", 8, 495),
])
def test_boundary_counts(text, r, count):
    assert unbalanced_count(parse_format(text)) == {"generic_rank": r, "num_decompositions": count}


def test_unbalanced_and_balanced_counts():
    assert unbalanced_count(parse_format("2,2,9")) == {"generic_rank": 4, "num_decompositions": "infinite"}
    with pytest.raises(UnsupportedFormatError):
        unbalanced_count(parse_format("3,4,5"))


def test_de_lathauwer():
    assert de_lathauwer_bound(parse_format("3,4,5")) == 5
    assert de_lathauwer_bound(parse_format("2,2,2,3")) == 3


def test_plane_curve_divisor():
    assert plane_curve_divisor(5) == 1
    assert plane_curve_divisor(10) == 16 and 320 == 20 * 16
    assert plane_curve_divisor(11) == 21 and 2016 == 96 * 21
    for d in (3, 4, 6, 9):
        with pytest.raises(ValueError):
            plane_curve_divisor(d)


def test_monomial_order():
    assert monomial_exponents(3, 3)[:4] == [(3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0)]
    assert monomial_exponents(3, 3)[-1] == (0, 0, 3)
    assert len(monomial_exponents(3, 5)) == 21
    assert monomial_exponents(4, 1) == [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]
