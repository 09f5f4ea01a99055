"""Exact rational linear algebra used by the certification layer.

Positive-definiteness is decided over the rationals, never in floating
point: the leading principal minors are computed with fraction-free
(Bareiss) elimination on an integer-scaled copy of the matrix, so the only
big-number operations are integer multiply and exact divide.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

FracMatrix = tuple[tuple[Fraction, ...], ...]


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and [num, den] pairs to Fraction; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (tuple, list)) and len(value) == 2:
        num, den = value
        if isinstance(num, int) and isinstance(den, int):
            return Fraction(num, den)
    raise TypeError(f"expected an exact rational, got {value!r}")


def frac_to_pair(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


def freeze_matrix(rows) -> FracMatrix:
    return tuple(tuple(as_fraction(v) for v in row) for row in rows)


def _integer_scaled(g: Sequence[Sequence[Fraction]]) -> tuple[list[list[int]], int]:
    """Return (L*g as integers, L) where L is the lcm of all denominators."""
    scale = 1
    for row in g:
        for v in row:
            scale = scale * v.denominator // math.gcd(scale, v.denominator)
    m = [[int(v * scale) for v in row] for row in g]
    return m, scale


def leading_minors(g: Sequence[Sequence[Fraction]]) -> tuple[list[Fraction], int | None]:
    """Leading principal minors of a symmetric rational matrix.

    Fraction-free elimination; stops at the first non-positive minor.
    Returns (minors, stop) where minors[k] = det of the (k+1)x(k+1) leading
    block. stop is the index of the first non-positive minor, or None when
    every minor is positive (the matrix is positive definite by Sylvester's
    criterion).
    """
    n = len(g)
    if n == 0:
        return [], None
    a, scale = _integer_scaled(g)
    minors: list[Fraction] = []
    prev = 1
    for k in range(n):
        piv = a[k][k]
        minors.append(Fraction(piv, scale ** (k + 1)))
        if piv <= 0:
            return minors, k
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(i, n):
                row_i[j] = (row_i[j] * piv - aik * row_k[j]) // prev
            for j in range(k + 1, i):
                row_i[j] = a[j][i]
        prev = piv
    return minors, None


def pivots_from_minors(minors: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """LDL^T pivots d_k = M_k / M_{k-1} from the leading minors."""
    out = []
    prev = Fraction(1)
    for m in minors:
        out.append(m / prev)
        prev = m
    return tuple(out)


def ldlt(g: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Full rational LDL^T of a positive definite matrix.

    Returns (L, d) with unit lower-triangular L and positive pivots d such
    that L diag(d) L^T equals g exactly. Raises ArithmeticError on a
    non-positive pivot; use `leading_minors` when rejection is an expected
    outcome.
    """
    n = len(g)
    L = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    d: list[Fraction] = []
    for j in range(n):
        dj = g[j][j] - sum(L[j][k] * L[j][k] * d[k] for k in range(j))
        if dj <= 0:
            raise ArithmeticError(f"non-positive pivot {dj} at index {j}")
        d.append(dj)
        for i in range(j + 1, n):
            s = g[i][j] - sum(L[i][k] * L[j][k] * d[k] for k in range(j))
            L[i][j] = s / dj
    return L, d


def solve_posdef(g: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Exact solution of g x = rhs for symmetric positive definite rational g."""
    L, d = ldlt(g)
    n = len(rhs)
    y = list(rhs)
    for i in range(n):
        y[i] -= sum(L[i][k] * y[k] for k in range(i))
    for i in range(n):
        y[i] /= d[i]
    for i in reversed(range(n)):
        y[i] -= sum(L[k][i] * y[k] for k in range(i + 1, n))
    return y


def snap_dyadic(x: float, bits: int) -> Fraction:
    """Round a float to the nearest multiple of 2^-bits."""
    q = 1 << bits
    return Fraction(round(x * q), q)


def snap_sq_dist(x: float, bits: int) -> Fraction:
    """Snap a squared distance into the open interval (0, 4) on the dyadic grid."""
    q = 1 << bits
    n = round(x * q)
    n = min(max(n, 1), 4 * q - 1)
    return Fraction(n, q)


def snap_sq_dist_floor(x: float, bits: int) -> Fraction:
    """Snap a squared distance downward (never exceeding x); stays positive."""
    q = 1 << bits
    n = math.floor(x * q)
    n = min(max(n, 1), 4 * q - 1)
    return Fraction(n, q)
