"""Arithmetic over the prime field Z_P and the P-th roots of unity.

Field elements and phase exponents are plain Python ints kept in the
canonical range ``[0, P)``. They are only turned into complex numbers when a
dense amplitude vector is built.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# An exponent ``a`` standing for omega_P ** a.
PhaseExponent = int


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def smallest_prime_geq(n: int) -> int:
    """Return the least prime ``P`` with ``P >= n``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    p = max(n, 2)
    while not is_prime(p):
        p += 1
    return p


@dataclass(frozen=True)
class PrimeField:
    modulus: int

    def __post_init__(self):
        if not isinstance(self.modulus, (int, np.integer)) or not is_prime(int(self.modulus)):
            raise ValidationError("prime_modulus", f"modulus {self.modulus!r} is not prime")
        object.__setattr__(self, "modulus", int(self.modulus))

    def element(self, x: int) -> int:
        """Reduce an arbitrary integer to its canonical representative."""
        return int(x) % self.modulus

    def add(self, x: int, y: int) -> int:
        return (x + y) % self.modulus

    def mul(self, x: int, y: int) -> int:
        return (x * y) % self.modulus

    def neg(self, x: int) -> int:
        return -x % self.modulus

    def sub(self, x: int, y: int) -> int:
        return (x - y) % self.modulus

    def elements(self) -> range:
        return range(self.modulus)

    def omega(self, a: PhaseExponent) -> complex:
        return omega_power(self, a)

    def omega_table(self) -> np.ndarray:
        """``omega**a`` for every ``a`` in ``[0, P)``."""
        return omega_table(self.modulus)


def omega_power(field: PrimeField | int, a: PhaseExponent) -> complex:
    """``exp(2*pi*i*a/P)`` for an exponent ``a`` (reduced mod P first)."""
    p = field.modulus if isinstance(field, PrimeField) else int(field)
    a = int(a) % p
    if a == 0:
        return 1 + 0j
    return cmath.exp(2j * math.pi * a / p)


_OMEGA_CACHE: dict[int, np.ndarray] = {}


def omega_table(p: int) -> np.ndarray:
    table = _OMEGA_CACHE.get(p)
    if table is None:
        table = np.array([omega_power(p, a) for a in range(p)], dtype=complex)
        table.setflags(write=False)
        _OMEGA_CACHE[p] = table
    return table
