"""
Prime field element model
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from models.errors import FieldMismatchError, NoInverseError


@lru_cache(maxsize=256)
def is_prime(n: int) -> bool:
    """Trial-division primality test (moduli here are small)"""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for i in range(3, math.isqrt(n) + 1, 2):
        if n % i == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldElem:
    """Element of the prime field F_p; the modulus travels with the value"""

    value: int
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not is_prime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")
        if not 0 <= self.value < self.p:
            raise ValueError(f"{self.value} not in field range [0, {self.p})")

    @classmethod
    def of(cls, value: int, p: int) -> "FieldElem":
        """Build an element from any integer, reducing it mod p"""
        return cls(value % p, p)

    def _check(self, other: "FieldElem") -> None:
        if not isinstance(other, FieldElem):
            raise FieldMismatchError(f"cannot combine F_{self.p} element with {type(other).__name__}")
        if other.p != self.p:
            raise FieldMismatchError(f"cannot combine F_{self.p} and F_{other.p} elements")

    def __add__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value + other.value) % self.p, self.p)

    def __sub__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value - other.value) % self.p, self.p)

    def __mul__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value * other.value) % self.p, self.p)

    def __neg__(self) -> "FieldElem":
        return FieldElem(-self.value % self.p, self.p)

    def inverse(self) -> "FieldElem":
        if self.value == 0:
            raise NoInverseError(f"0 has no inverse in F_{self.p}")
        return FieldElem(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return self * other.inverse()

    def __pow__(self, exponent: int) -> "FieldElem":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return FieldElem(pow(self.value, exponent, self.p), self.p)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"F_{self.p}({self.value})"
