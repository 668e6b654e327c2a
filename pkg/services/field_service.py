"""
Prime field arithmetic and small linear algebra over F_p
"""

import logging
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence

import galois
import numpy as np

from models.errors import CodeConstructionError, FieldMismatchError, NoInverseError
from models.field import FieldElem, is_prime

logger = logging.getLogger(__name__)


class ArithKind(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"


def arith(a: FieldElem, b: FieldElem, kind) -> FieldElem:
    """
    Apply a field operation to two elements of the same field

    Args:
        a: Left operand
        b: Right operand
        kind: ArithKind or one of "add", "sub", "mul"

    Returns:
        The result in the shared field
    """
    if a.p != b.p:
        raise FieldMismatchError(f"modulus mismatch: {a.p} vs {b.p}")
    kind = ArithKind(kind)
    if kind is ArithKind.ADD:
        return a + b
    if kind is ArithKind.SUB:
        return a - b
    return a * b


def inv(a: FieldElem) -> FieldElem:
    """Multiplicative inverse; zero raises NoInverseError"""
    if a.value == 0:
        raise NoInverseError(f"0 has no inverse in F_{a.p}")
    return a.inverse()


def next_prime(n: int) -> int:
    """Smallest prime >= n"""
    candidate = max(2, n)
    while not is_prime(candidate):
        candidate += 1
    return candidate


def choose_field_size(network) -> int:
    """
    Smallest prime p >= max(2, |T|), enough for a linear multicast code

    Args:
        network: Network (or UnitNetwork) with a targets list

    Returns:
        Recommended prime field size
    """
    return next_prime(max(2, len(network.targets)))


@lru_cache(maxsize=32)
def field_array(p: int):
    """galois field class GF(p), cached per modulus"""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    return galois.GF(p)


def _to_int(array) -> np.ndarray:
    return np.asarray(array.view(np.ndarray), dtype=np.int64)


def matrix_rank(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank over F_p of a matrix given as a list of rows"""
    if len(rows) == 0:
        return 0
    GF = field_array(p)
    return int(np.linalg.matrix_rank(GF(np.asarray(rows, dtype=np.int64) % p)))


def independent_rows(rows: Sequence[Sequence[int]], p: int, count: Optional[int] = None) -> List[int]:
    """Greedily pick indices of rows that increase the rank, in order"""
    chosen: List[int] = []
    for index in range(len(rows)):
        trial = [rows[i] for i in chosen] + [rows[index]]
        if matrix_rank(trial, p) == len(trial):
            chosen.append(index)
            if count is not None and len(chosen) == count:
                break
    return chosen


def left_inverse(rows: Sequence[Sequence[int]], p: int) -> List[List[int]]:
    """
    Left inverse D of an m x h matrix M of full column rank, so that D M = I

    Rows outside a maximal independent subset get zero columns in D.

    Args:
        rows: The m rows of M
        p: Field size

    Returns:
        D as h lists of m integers
    """
    m = len(rows)
    h = len(rows[0]) if m else 0
    chosen = independent_rows(rows, p, count=h)
    if len(chosen) < h:
        raise CodeConstructionError(f"matrix has rank {len(chosen)} < {h} over F_{p}")
    GF = field_array(p)
    square = GF(np.asarray([rows[i] for i in chosen], dtype=np.int64) % p)
    square_inv = _to_int(np.linalg.inv(square))
    decode = np.zeros((h, m), dtype=np.int64)
    for column, row_index in enumerate(chosen):
        decode[:, row_index] = square_inv[:, column]
    return decode.tolist()


def mat_vec(matrix: Sequence[Sequence[int]], vector: Sequence[int], p: int) -> List[int]:
    """Matrix-vector product over F_p"""
    if len(matrix) == 0:
        return []
    product = np.asarray(matrix, dtype=np.int64) @ np.asarray(vector, dtype=np.int64)
    return [int(x) % p for x in product]


def vec_combine(vectors: Sequence[Sequence[int]], coefficients: Sequence[int], p: int, length: int) -> List[int]:
    """Sum_i coefficients[i] * vectors[i] over F_p"""
    total = np.zeros(length, dtype=np.int64)
    for coefficient, vector in zip(coefficients, vectors):
        total = (total + int(coefficient) * np.asarray(vector, dtype=np.int64)) % p
    return [int(x) for x in total]
