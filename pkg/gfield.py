"""
Prime Field Module
Exact arithmetic over GF(D) plus primitive-root and root-of-unity discovery.

D doubles as the number of subcarriers per OFDM symbol, so subcarrier index
arithmetic and field arithmetic are the same thing. That is why D has to be
prime (521 by default) rather than a power of two.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import List

import numpy as np

from errors import NotDivisorError, NotPrimeError, OutOfRangeError, ZeroInverseError


def is_prime(d: int) -> bool:
    """Trial-division primality test, fine for subcarrier-sized moduli."""
    if d < 2:
        return False
    if d < 4:
        return True
    if d % 2 == 0:
        return False
    i = 3
    while i * i <= d:
        if d % i == 0:
            return False
        i += 2
    return True


def prime_factors(value: int) -> List[int]:
    """Distinct prime factors of value, ascending."""
    factors = []
    q = 2
    while q * q <= value:
        if value % q == 0:
            factors.append(q)
            while value % q == 0:
                value //= q
        q += 1
    if value > 1:
        factors.append(value)
    return factors


def multiplicative_order(a: int, d: int) -> int:
    """Smallest k > 0 with a^k = 1 mod d (a must be a unit)."""
    if a % d == 0:
        raise ZeroInverseError(f"0 has no multiplicative order in GF({d})")
    k = 1
    x = a % d
    while x != 1:
        x = (x * a) % d
        k += 1
    return k


def smallest_primitive_root(d: int) -> int:
    """Smallest generator of GF(d)*; deterministic so every run agrees on alpha."""
    group_order = d - 1
    factors = prime_factors(group_order)
    for g in range(2, d):
        if all(pow(g, group_order // q, d) != 1 for q in factors):
            return g
    raise NotPrimeError(f"GF({d}) has no primitive root; {d} is not prime")


@dataclass(frozen=True)
class FieldParams:
    """GF(d) together with the primitive root alpha and the order-n element beta."""

    d: int
    alpha: int
    n: int
    beta: int

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.d

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.d

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.d

    def inv(self, a: int) -> int:
        if a % self.d == 0:
            raise ZeroInverseError(f"0 has no inverse in GF({self.d})")
        return pow(a, self.d - 2, self.d)

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return pow(self.inv(a), -e, self.d)
        return pow(a, e, self.d)

    @cached_property
    def n_inv(self) -> int:
        return self.inv(self.n % self.d)

    @cached_property
    def beta_powers(self) -> np.ndarray:
        """beta^j for j = 0..n-1 (exponents are taken mod n by callers)."""
        powers = np.empty(self.n, dtype=np.int64)
        x = 1
        for j in range(self.n):
            powers[j] = x
            x = (x * self.beta) % self.d
        return powers

    def check_element(self, a: int) -> None:
        if not 0 <= a < self.d:
            raise OutOfRangeError(f"{a} is not a canonical element of GF({self.d})")


def field_new(d: int, n: int) -> FieldParams:
    """Build validated field parameters for prime d and code length n | d-1."""
    if d < 3:
        raise NotPrimeError(f"field size must be an odd prime >= 3, got {d}")
    if not is_prime(d):
        raise NotPrimeError(f"{d} is not prime")
    if n < 1:
        raise NotDivisorError(f"code length must be >= 1, got {n}")
    if (d - 1) % n != 0:
        raise NotDivisorError(f"{n} does not divide {d - 1}")
    alpha = smallest_primitive_root(d)
    beta = pow(alpha, (d - 1) // n, d)
    return FieldParams(d=d, alpha=alpha, n=n, beta=beta)


def f_arith(op: str, a: int, b: int, params: FieldParams) -> int:
    """Dispatch one of add|sub|mul|inv|pow; b is the exponent for pow and unused for inv."""
    params.check_element(a)
    if op == "inv":
        return params.inv(a)
    if op == "pow":
        return params.pow(a, b)
    params.check_element(b)
    if op == "add":
        return params.add(a, b)
    if op == "sub":
        return params.sub(a, b)
    if op == "mul":
        return params.mul(a, b)
    raise ValueError(f"unknown field operation {op!r}")
