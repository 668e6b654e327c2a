"""
Tests for prime field arithmetic and linear algebra over F_p
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from models.errors import CodeConstructionError, FieldMismatchError, NoInverseError
from models.field import FieldElem, is_prime
from services.field_service import (
    ArithKind,
    arith,
    choose_field_size,
    field_array,
    independent_rows,
    inv,
    left_inverse,
    mat_vec,
    matrix_rank,
    next_prime,
    vec_combine,
)

PRIMES = [2, 3, 5, 7, 11, 13]


@pytest.mark.parametrize("a, b, kind, expected", [
    (3, 4, "add", 2),
    (3, 4, "sub", 4),
    (3, 4, "mul", 2),
    (0, 0, ArithKind.ADD, 0),
    (1, 1, ArithKind.SUB, 0),
])
def test_arith_examples_f5(a, b, kind, expected):
    assert arith(FieldElem(a, 5), FieldElem(b, 5), kind) == FieldElem(expected, 5)


def test_inverse_and_division():
    assert inv(FieldElem(3, 5)) == FieldElem(2, 5)
    assert FieldElem(2, 5) / FieldElem(3, 5) == FieldElem(4, 5)
    assert FieldElem(1, 2).inverse() == FieldElem(1, 2)
    assert FieldElem(2, 3) ** -1 == FieldElem(2, 3)


def test_zero_has_no_inverse():
    with pytest.raises(NoInverseError):
        inv(FieldElem(0, 7))
    with pytest.raises(ZeroDivisionError):
        FieldElem(1, 7) / FieldElem(0, 7)


def test_mixed_moduli_rejected():
    with pytest.raises(FieldMismatchError):
        arith(FieldElem(1, 2), FieldElem(1, 3), "add")
    with pytest.raises(TypeError):
        FieldElem(1, 2) * FieldElem(1, 3)


@pytest.mark.parametrize("value, p", [(5, 5), (-1, 5), (0, 4)])
def test_element_construction_validates(value, p):
    with pytest.raises(ValueError):
        FieldElem(value, p)


def test_of_reduces_and_repr():
    assert FieldElem.of(-1, 5) == FieldElem(4, 5)
    assert int(FieldElem.of(12, 7)) == 5
    assert repr(FieldElem(3, 7)) == "F_7(3)"


@given(p=st.sampled_from(PRIMES), a=st.integers(0, 1000), b=st.integers(1, 1000), c=st.integers(0, 1000))
def test_field_axioms(p, a, b, c):
    x, y, z = FieldElem.of(a, p), FieldElem.of(b, p), FieldElem.of(c, p)
    assert x * (y + z) == x * y + x * z
    assert x + (-x) == FieldElem(0, p)
    assert x - y + y == x
    if y.value:
        assert (x * y) / y == x
        assert y * y.inverse() == FieldElem(1, p)


@pytest.mark.parametrize("n, expected", [(0, 2), (2, 2), (3, 3), (4, 5), (6, 7), (14, 17)])
def test_next_prime(n, expected):
    assert next_prime(n) == expected
    assert is_prime(expected)


def test_choose_field_size(load):
    assert choose_field_size(load("butterfly")) == 2
    assert choose_field_size(load("single_edge")) == 2
    assert choose_field_size(load("combination_3_2")) == 3
    assert choose_field_size(load("combination_4_2")) == 7


def test_field_array_is_cached_and_checked():
    assert field_array(5) is field_array(5)
    with pytest.raises(ValueError):
        field_array(4)


def test_matrix_rank():
    assert matrix_rank([[1, 1], [1, 1]], 2) == 1
    assert matrix_rank([[1, 1], [1, 2]], 3) == 2
    assert matrix_rank([[1, 2], [2, 4]], 5) == 1
    assert matrix_rank([], 5) == 0


def test_independent_rows_picks_in_order():
    assert independent_rows([[1, 0], [1, 0], [0, 1], [1, 1]], 2) == [0, 2]
    assert independent_rows([[1, 0], [0, 1], [1, 1]], 2, count=2) == [0, 1]


@pytest.mark.parametrize("rows, p", [
    ([[1, 0], [1, 1], [0, 1]], 2),
    ([[1, 2], [1, 1]], 3),
    ([[0, 1], [1, 0], [3, 4]], 5),
    ([[1]], 7),
])
def test_left_inverse_decodes(rows, p):
    decode = np.array(left_inverse(rows, p))
    h = len(rows[0])
    assert decode.shape == (h, len(rows))
    np.testing.assert_array_equal(decode @ np.array(rows) % p, np.eye(h, dtype=int))


def test_left_inverse_rank_deficient():
    with pytest.raises(CodeConstructionError):
        left_inverse([[1, 1], [1, 1]], 2)


def test_vector_helpers():
    assert vec_combine([[1, 0], [0, 1]], [1, 1], 2, 2) == [1, 1]
    assert vec_combine([[1, 2], [2, 2]], [2, 1], 3, 2) == [1, 0]
    assert mat_vec([[1, 1], [0, 1]], [1, 1], 2) == [0, 1]
