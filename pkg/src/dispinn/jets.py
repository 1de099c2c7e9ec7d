"""Truncated bivariate Taylor jets in (t, x).

A :class:`Jet2` stores the Taylor-normalised coefficients

    c[i][j] = d^i/dt^i d^j/dx^j f / (i! j!)

of a scalar field at an expansion point, for ``i <= I`` and ``j <= J``.
Each coefficient is an array (possibly with batch axes, so one jet holds the
expansions at many collocation points and hidden units at once), the plain
Python number ``0`` marking a structural zero that arithmetic skips, or
``None`` for a coefficient that is not tracked at all.  Untracked entries must
form an upper set of the index table (if ``(i, j)`` is untracked so is every
``(p, q) >= (i, j)``): every tracked coefficient of a product or of ``tanh``
depends only on lower indices, so dropping them is exact, not approximate.
Residuals that need ``u_t`` but no mixed derivatives use this to skip most of
the ``t``-row.

Coefficients are kept as a nested tuple rather than one stacked array: the
reverse pass through stacked/sliced coefficient tensors is an order of
magnitude slower under XLA than through independent arrays.
"""
from __future__ import annotations

from math import factorial
from numbers import Number
from typing import Sequence

import jax.numpy as jnp
import numpy as np

Degrees = tuple[int, int]

TIME = "time"
SPACE = "space"


def _check_degrees(degrees: Sequence[int]) -> Degrees:
    if len(degrees) != 2:
        raise ValueError(f"degrees must be a pair (I, J), got {degrees!r}")
    I, J = int(degrees[0]), int(degrees[1])
    if I < 0 or J < 0:
        raise ValueError(f"degrees must be non-negative, got {degrees!r}")
    return I, J


def is_zero(c) -> bool:
    return isinstance(c, Number) and c == 0


def _mul(a, b):
    if is_zero(a) or is_zero(b):
        return 0
    return a * b


def _add(a, b):
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return a + b


class Jet2:
    """Immutable truncated Taylor polynomial in (t, x)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        if hasattr(coeffs, "ndim"):
            if coeffs.ndim < 2:
                raise ValueError("jet coefficient arrays need two leading axes (I+1, J+1)")
            coeffs = [[coeffs[i, j] for j in range(coeffs.shape[1])] for i in range(coeffs.shape[0])]
        rows = tuple(tuple(row) for row in coeffs)
        if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("jet coefficients must form a full (I+1) x (J+1) table")
        if rows[0][0] is None:
            raise ValueError("the constant coefficient must be tracked")
        for i, row in enumerate(rows):
            for j, c in enumerate(row):
                if c is not None and ((i and rows[i - 1][j] is None) or (j and row[j - 1] is None)):
                    raise ValueError(f"tracked coefficient ({i},{j}) above an untracked one")
        object.__setattr__(self, "coeffs", rows)

    def __setattr__(self, name, value):
        raise AttributeError("Jet2 is immutable")

    @property
    def degrees(self) -> Degrees:
        return len(self.coeffs) - 1, len(self.coeffs[0]) - 1

    @property
    def tracked(self) -> tuple[tuple[bool, ...], ...]:
        return tuple(tuple(c is not None for c in row) for row in self.coeffs)

    @property
    def value(self):
        return self.coeffs[0][0]

    def coefficient(self, i: int, j: int):
        return self.coeffs[i][j]

    def derivative(self, i: int, j: int):
        """Return d^i/dt^i d^j/dx^j at the expansion point."""
        I, J = self.degrees
        if i > I or j > J:
            raise ValueError(f"derivative ({i},{j}) exceeds jet degrees {self.degrees}")
        c = self.coeffs[i][j]
        if c is None:
            raise ValueError(f"coefficient ({i},{j}) is not tracked by this jet")
        return c * float(factorial(i) * factorial(j))

    def array(self):
        """Dense coefficient array of shape ``(I + 1, J + 1, *batch)``."""
        if not all(all(row) for row in self.tracked):
            raise ValueError("dense view needs every coefficient tracked")
        shape = jnp.broadcast_shapes(*(jnp.shape(c) for row in self.coeffs for c in row))
        return jnp.stack([jnp.stack([jnp.broadcast_to(jnp.asarray(c, dtype=float), shape) for c in row])
                          for row in self.coeffs])

    def __add__(self, other):
        return jet_add(self, _lift(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return jet_add(self, jet_scale(_lift(other, self), -1.0))

    def __rsub__(self, other):
        return jet_add(_lift(other, self), jet_scale(self, -1.0))

    def __neg__(self):
        return jet_scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return jet_mul(self, other)
        return jet_scale(self, other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Jet2(degrees={self.degrees})"


def _lift(other, like: Jet2) -> Jet2:
    if isinstance(other, Jet2):
        return other
    return constant(other, like.degrees, row_degrees=_row_degrees_of(like))


def _row_degrees_of(a: Jet2) -> tuple[int, ...]:
    return tuple(sum(row) - 1 for row in a.tracked)


def _require_same_degrees(a: Jet2, b: Jet2) -> None:
    if a.degrees != b.degrees:
        raise ValueError(f"jet degree mismatch: {a.degrees} vs {b.degrees}")
    if a.tracked != b.tracked:
        raise ValueError("jets track different coefficient sets")


def row_degrees_for(degrees: Sequence[int], row_degrees: Sequence[int] | None = None) -> tuple[int, ...]:
    """Highest tracked x-order in every t-row; defaults to the full table."""
    I, J = _check_degrees(degrees)
    if row_degrees is None:
        return (J,) * (I + 1)
    rd = tuple(int(r) for r in row_degrees)
    if len(rd) != I + 1 or rd[0] != J or any(b > a for a, b in zip(rd, rd[1:])) or rd[-1] < 0:
        raise ValueError(f"row degrees {row_degrees!r} must start at J={J} and not increase")
    return rd


def _table(I: int, J: int, row_degrees: Sequence[int] | None = None):
    rd = row_degrees_for((I, J), row_degrees)
    return [[0 if j <= rd[i] else None for j in range(J + 1)] for i in range(I + 1)]


def constant(value, degrees: Sequence[int], row_degrees: Sequence[int] | None = None) -> Jet2:
    """Jet of a constant function: only the (0, 0) entry is non-zero."""
    I, J = _check_degrees(degrees)
    c = _table(I, J, row_degrees)
    c[0][0] = jnp.asarray(value, dtype=float)
    return Jet2(c)


def seed_input(which: str, value, degrees: Sequence[int],
               row_degrees: Sequence[int] | None = None) -> Jet2:
    """Jet of the coordinate function ``t`` or ``x`` evaluated at ``value``."""
    I, J = _check_degrees(degrees)
    value = jnp.asarray(value, dtype=float)
    c = _table(I, J, row_degrees)
    c[0][0] = value
    one = jnp.ones_like(value)
    if which == TIME:
        if I >= 1:
            c[1][0] = one
    elif which == SPACE:
        if J >= 1:
            c[0][1] = one
    else:
        raise ValueError(f"which must be 'time' or 'space', got {which!r}")
    return Jet2(c)


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    _require_same_degrees(a, b)
    return Jet2([[None if x is None else _add(x, y) for x, y in zip(ra, rb)]
                 for ra, rb in zip(a.coeffs, b.coeffs)])


def jet_scale(a: Jet2, s) -> Jet2:
    return Jet2([[None if x is None else _mul(x, s) for x in row] for row in a.coeffs])


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Truncated Cauchy product ``out[i,j] = sum a[p,q] b[i-p,j-q]``."""
    _require_same_degrees(a, b)
    I, J = a.degrees
    A, B = a.coeffs, b.coeffs
    out = _table(I, J, _row_degrees_of(a))
    for i in range(I + 1):
        for j in range(J + 1):
            if out[i][j] is None:
                continue
            acc = 0
            for p in range(i + 1):
                for q in range(j + 1):
                    acc = _add(acc, _mul(A[p][q], B[i - p][j - q]))
            out[i][j] = acc
    return Jet2(out)


def tanh_coefficients(A, I: int, J: int):
    """Coefficients of ``tanh(a)`` and ``1 - tanh(a)**2`` as nested lists.

    Column 0 is filled along t from ``d_t y = s d_t a``; each further column
    follows from ``d_x y = s d_x a`` with t-truncated products, where
    ``s = 1 - y**2`` only needs columns that are already known.
    """
    rd = tuple(sum(c is not None for c in row) - 1 for row in A)
    y = _table(I, J, rd)
    s = _table(I, J, rd)
    y[0][0] = jnp.tanh(A[0][0])
    s[0][0] = 1.0 - y[0][0] * y[0][0]

    for i in range(I):
        acc = 0
        for p in range(i + 1):
            acc = _add(acc, _mul(s[p][0], _mul(A[i - p + 1][0], float(i - p + 1))))
        y[i + 1][0] = _mul(acc, 1.0 / (i + 1))
        sq = 0
        for r in range(i + 2):
            sq = _add(sq, _mul(y[r][0], y[i + 1 - r][0]))
        s[i + 1][0] = _mul(sq, -1.0)

    for j in range(J):
        for i in range(I + 1):
            if y[i][j + 1] is None:
                continue
            acc = 0
            for p in range(i + 1):
                for q in range(j + 1):
                    acc = _add(acc, _mul(s[p][q], _mul(A[i - p][j - q + 1], float(j - q + 1))))
            y[i][j + 1] = _mul(acc, 1.0 / (j + 1))
        for i in range(I + 1):
            if s[i][j + 1] is None:
                continue
            sq = 0
            for p in range(i + 1):
                for q in range(j + 2):
                    sq = _add(sq, _mul(y[p][q], y[i - p][j + 1 - q]))
            s[i][j + 1] = _mul(sq, -1.0)
    return y, s


def jet_tanh(a: Jet2) -> Jet2:
    I, J = a.degrees
    y, _ = tanh_coefficients(a.coeffs, I, J)
    return Jet2(y)


def jet_affine(a: Jet2, weight, bias=None) -> Jet2:
    """Apply ``z -> z @ weight.T + bias`` along the last axis of every coefficient.

    The bias only touches the constant coefficient.
    """
    wt = jnp.asarray(weight).T
    out = [[c if c is None or is_zero(c) else c @ wt for c in row] for row in a.coeffs]
    if bias is not None:
        out[0][0] = _add(out[0][0], bias)
    return Jet2(out)


def factorial_table(degrees: Sequence[int]) -> np.ndarray:
    """``i! j!`` for every multi-index; multiplies coefficients into derivatives."""
    I, J = _check_degrees(degrees)
    return np.array([[factorial(i) * factorial(j) for j in range(J + 1)] for i in range(I + 1)],
                    dtype=float)
