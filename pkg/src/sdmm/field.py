"""Exact arithmetic over prime fields.

Scalars are plain Python ints in ``[0, q)``; :class:`FieldElement` wraps one
together with its :class:`PrimeField` for callers that want operator syntax.
Matrices are ``numpy`` int64 arrays reduced mod ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Sequence

import numpy as np

# Largest modulus for which int64 matrix products cannot overflow for the
# matrix sizes used here (q^2 * 2^15 < 2^63).
MAX_MATRIX_MODULUS = 1 << 24


class FieldError(ValueError):
    """Invalid field construction or operand."""


class NotInvertibleError(ArithmeticError):
    """Zero has no multiplicative inverse."""


class SingularMatrixError(ArithmeticError):
    """A linear system has no unique solution."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    i = 5
    while i * i <= n:
        if n % i == 0 or n % (i + 2) == 0:
            return False
        i += 6
    return True


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of ``n`` in increasing order."""
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def smallest_prime_above(n: int) -> int:
    """Least prime strictly greater than ``n``.

    For ``n > 1`` the result is below ``2n`` (Bertrand's postulate), so
    the search is short.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    p = n + 1
    while not is_prime(p):
        p += 1
    return p


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or not is_prime(int(self.q)):
            raise FieldError(f"field size must be prime, got {self.q!r}")

    def __call__(self, value) -> FieldElement:
        return FieldElement(int(value) % self.q, self)

    # scalar ops on ints
    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise NotInvertibleError(f"0 has no inverse in F_{self.q}")
        return pow(a, self.q - 2, self.q)

    def div(self, a: int, b: int) -> int:
        return (a * self.inv(b)) % self.q

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return pow(self.inv(a), -e, self.q)
        return pow(a, e, self.q)

    # matrix helpers
    def array(self, values) -> np.ndarray:
        if self.q > MAX_MATRIX_MODULUS:
            raise FieldError(f"matrix arithmetic limited to q <= 2^24, got {self.q}")
        return np.asarray(values, dtype=np.int64) % self.q

    def zeros(self, rows: int, cols: int) -> np.ndarray:
        return np.zeros((rows, cols), dtype=np.int64)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)) % self.q

    def random_matrix(self, rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
        # Generator.integers is unbiased (rejection-based) for any bound.
        return rng.integers(0, self.q, size=(rows, cols), dtype=np.int64)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField = dc_field(repr=False)

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise FieldError(f"{self.value} outside [0, {self.field.q})")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field.q != self.field.q:
                raise FieldError("operands from different fields")
            return other.value
        return int(other) % self.field.q

    def __add__(self, other):
        return self.field(self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.field(self.value - self._coerce(other))

    def __rsub__(self, other):
        return self.field(self._coerce(other) - self.value)

    def __mul__(self, other):
        return self.field(self.value * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * field_inverse(self.field(self._coerce(other)))

    def __neg__(self):
        return self.field(-self.value)

    def __pow__(self, e: int):
        return self.field(self.field.pow(self.value, e))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field.q == other.field.q and self.value == other.value
        if isinstance(other, (int, np.integer)):
            return self.value == int(other) % self.field.q
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field.q))

    def __int__(self):
        return self.value

    __index__ = __int__

    def __bool__(self):
        return self.value != 0

    def inverse(self) -> FieldElement:
        return field_inverse(self)


def field_inverse(a: FieldElement) -> FieldElement:
    return FieldElement(a.field.inv(a.value), a.field)


@dataclass(frozen=True)
class MultIsomorphism:
    """Discrete-log tables for the cyclic group of nonzero elements of F_q.

    ``log(a)`` maps ``a != 0`` to the exponent ``i`` with ``g^i = a``; the
    convention ``log(0) = 0`` lets zero flow through the same code path,
    with zero-ness tracked separately by the caller.
    """

    q: int
    generator: int
    exp_table: tuple[int, ...]
    log_table: tuple[int, ...]

    def log(self, a: int) -> int:
        return self.log_table[a % self.q]

    def exp(self, i: int) -> int:
        return self.exp_table[i % (self.q - 1)]


def _is_generator(g: int, q: int, factors: Sequence[int]) -> bool:
    return all(pow(g, (q - 1) // r, q) != 1 for r in factors)


@lru_cache(maxsize=64)
def build_mult_isomorphism(q: int) -> MultIsomorphism:
    if not is_prime(q):
        raise FieldError(f"field size must be prime, got {q}")
    if q < 3:
        raise FieldError("multiplicative group needs q >= 3")
    factors = prime_factors(q - 1)
    g = next(g for g in range(2, q) if _is_generator(g, q, factors))
    exp_table = [1] * (q - 1)
    for i in range(1, q - 1):
        exp_table[i] = exp_table[i - 1] * g % q
    log_table = [0] * q
    for i, v in enumerate(exp_table):
        log_table[v] = i
    return MultIsomorphism(q, g, tuple(exp_table), tuple(log_table))


def _as_int_rows(field: PrimeField, rows) -> list[list[int]]:
    return [[int(v) % field.q for v in row] for row in rows]


def solve_linear_system(field: PrimeField, coeffs, rhs):
    """Solve ``coeffs @ x = rhs`` over ``field`` by Gauss-Jordan elimination.

    ``rhs`` may be a vector (returns a list of ints) or a 2-D array with one
    right-hand side per column (returns an int64 array). Raises
    :class:`SingularMatrixError` if the system has no unique solution.
    """
    q = field.q
    a = _as_int_rows(field, coeffs)
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("coefficient matrix must be square")
    rhs_arr = np.asarray(rhs, dtype=object)
    vector = rhs_arr.ndim == 1
    b = [[int(v) % q] for v in rhs_arr] if vector else _as_int_rows(field, rhs_arr)
    if len(b) != n:
        raise ValueError("rhs length does not match matrix")
    rows = [a[i] + b[i] for i in range(n)]
    width = len(rows[0])
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col]), None)
        if pivot is None:
            raise SingularMatrixError(f"matrix is singular over F_{q}")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        prow = rows[col]
        inv = pow(prow[col], q - 2, q)
        prow = [v * inv % q for v in prow]
        rows[col] = prow
        for r in range(n):
            factor = rows[r][col]
            if r != col and factor:
                row = rows[r]
                rows[r] = [(row[j] - factor * prow[j]) % q for j in range(width)]
    sol = [row[n:] for row in rows]
    if vector:
        return [s[0] for s in sol]
    return np.array(sol, dtype=np.int64).reshape(n, width - n)


def invert_matrix(field: PrimeField, matrix) -> np.ndarray:
    n = len(matrix)
    return solve_linear_system(field, matrix, np.eye(n, dtype=np.int64))


def vandermonde_rows(field: PrimeField, points: Sequence[int], first_power: int, count: int) -> list[list[int]]:
    """Rows ``[x^first_power, ..., x^(first_power+count-1)]`` for each point."""
    q = field.q
    return [[pow(int(x), first_power + j, q) for j in range(count)] for x in points]


@dataclass(frozen=True)
class CsaDecodeMatrix:
    """Square Cauchy-Vandermonde matrix used to decode aligned answers.

    Row ``n`` is ``[1/(f_1+a_n), ..., 1/(f_S+a_n), 1, a_n, ..., a_n^(x_total-1)]``.
    """

    field: PrimeField
    f_consts: tuple[int, ...]
    alphas: tuple[int, ...]
    x_total: int
    entries: tuple[tuple[int, ...], ...]
    inverse: np.ndarray = dc_field(repr=False, compare=False)

    @property
    def N(self) -> int:
        return len(self.alphas)


def build_csa_matrix(field: PrimeField, f_consts: Sequence[int], alphas: Sequence[int], x_total: int) -> CsaDecodeMatrix:
    q = field.q
    f = tuple(int(v) % q for v in f_consts)
    a = tuple(int(v) % q for v in alphas)
    if x_total < 0:
        raise FieldError("x_total must be >= 0")
    if len(f) + x_total != len(a):
        raise FieldError(f"need S + x_total = N, got {len(f)} + {x_total} != {len(a)}")
    if len(set(f)) != len(f):
        raise FieldError("f constants must be distinct")
    if len(set(a)) != len(a):
        raise FieldError("alphas must be distinct")
    bad = [x for x in a if any((x + fs) % q == 0 for fs in f)]
    if bad:
        raise FieldError(f"alphas {bad} collide with -f_s")
    entries = tuple(
        tuple(field.inv(fs + x) for fs in f) + tuple(pow(x, t, q) for t in range(x_total))
        for x in a
    )
    # Invertibility is guaranteed for valid inputs; verify rather than trust.
    inverse = invert_matrix(field, entries)
    return CsaDecodeMatrix(field, f, a, x_total, entries, inverse)
