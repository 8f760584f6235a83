"""Prime-field arithmetic and dense matrix operations over F_p.

Field elements are plain ints in [0, p); a Field object owns the modulus
and does the reductions. Matrices are dense and row-major. Everything
downstream (MDS encoding, query planning, decoding, rank audits) runs on
these primitives.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class DimError(ValueError):
    """Operands have incompatible shapes."""


class SingularError(ValueError):
    """Square system has no unique solution over F_p."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def smallest_prime_gt(n: int) -> int:
    """Least prime strictly greater than n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = n + 1
    while not is_prime(c):
        c += 1
    return c


class Field:
    """Prime field F_p."""

    __slots__ = ("p",)

    def __init__(self, p: int):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def neg(self, a: int) -> int:
        return (-a) % self.p

    def inv(self, a: int) -> int:
        if a % self.p == 0:
            raise ZeroDivisionError(f"inverse of zero in F_{self.p}")
        return pow(a, self.p - 2, self.p)

    def rand(self, rng) -> int:
        return rng.randrange(self.p)

    def __eq__(self, other) -> bool:
        return isinstance(other, Field) and self.p == other.p

    def __hash__(self) -> int:
        return hash(self.p)

    def __repr__(self) -> str:
        return f"Field({self.p})"


class Matrix:
    """Dense matrix over a prime field, entries stored row-major."""

    __slots__ = ("field", "rows", "cols", "data")

    def __init__(self, field: Field, rows: int, cols: int, data: Sequence[int]):
        if len(data) != rows * cols:
            raise DimError(f"need {rows * cols} entries, got {len(data)}")
        self.field = field
        self.rows = rows
        self.cols = cols
        self.data = [x % field.p for x in data]

    @classmethod
    def zeros(cls, field: Field, rows: int, cols: int) -> "Matrix":
        return cls(field, rows, cols, [0] * (rows * cols))

    @classmethod
    def identity(cls, field: Field, n: int) -> "Matrix":
        m = cls.zeros(field, n, n)
        for i in range(n):
            m.data[i * n + i] = 1
        return m

    @classmethod
    def from_rows(cls, field: Field, rows: Sequence[Sequence[int]]) -> "Matrix":
        r = len(rows)
        c = len(rows[0]) if r else 0
        flat = []
        for row in rows:
            if len(row) != c:
                raise DimError("ragged rows")
            flat.extend(row)
        return cls(field, r, c, flat)

    @classmethod
    def random(cls, field: Field, rows: int, cols: int, rng) -> "Matrix":
        return cls(field, rows, cols, [rng.randrange(field.p) for _ in range(rows * cols)])

    def at(self, r: int, c: int) -> int:
        return self.data[r * self.cols + c]

    def row(self, r: int) -> list[int]:
        return self.data[r * self.cols : (r + 1) * self.cols]

    def col(self, c: int) -> list[int]:
        return self.data[c :: self.cols]

    def to_rows(self) -> list[list[int]]:
        return [self.row(r) for r in range(self.rows)]

    def transpose(self) -> "Matrix":
        out = Matrix.zeros(self.field, self.cols, self.rows)
        for r in range(self.rows):
            base = r * self.cols
            for c in range(self.cols):
                out.data[c * self.rows + r] = self.data[base + c]
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Matrix)
            and self.field == other.field
            and self.rows == other.rows
            and self.cols == other.cols
            and self.data == other.data
        )

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols} over F_{self.field.p})"


def _same_field(A: Matrix, B: Matrix) -> Field:
    if A.field != B.field:
        raise DimError("operands live in different fields")
    return A.field


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    f = _same_field(A, B)
    if A.rows != B.rows or A.cols != B.cols:
        raise DimError("shape mismatch in addition")
    return Matrix(f, A.rows, A.cols, [x + y for x, y in zip(A.data, B.data)])


def mat_scale(A: Matrix, s: int) -> Matrix:
    return Matrix(A.field, A.rows, A.cols, [s * x for x in A.data])


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    f = _same_field(A, B)
    if A.cols != B.rows:
        raise DimError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")
    p = f.p
    out = [0] * (A.rows * B.cols)
    for i in range(A.rows):
        arow = A.data[i * A.cols : (i + 1) * A.cols]
        obase = i * B.cols
        for t, a in enumerate(arow):
            if a == 0:
                continue
            brow = B.data[t * B.cols : (t + 1) * B.cols]
            for j, b in enumerate(brow):
                out[obase + j] += a * b
    return Matrix(f, A.rows, B.cols, [x % p for x in out])


def dot(field: Field, u: Sequence[int], v: Sequence[int]) -> int:
    if len(u) != len(v):
        raise DimError("vector length mismatch")
    return sum(a * b for a, b in zip(u, v)) % field.p


def kron(A: Matrix, B: Matrix) -> Matrix:
    f = _same_field(A, B)
    rows, cols = A.rows * B.rows, A.cols * B.cols
    out = [0] * (rows * cols)
    for i1 in range(A.rows):
        for j1 in range(A.cols):
            a = A.at(i1, j1)
            if a == 0:
                continue
            for i2 in range(B.rows):
                rbase = (i1 * B.rows + i2) * cols + j1 * B.cols
                brow = B.data[i2 * B.cols : (i2 + 1) * B.cols]
                for j2, b in enumerate(brow):
                    out[rbase + j2] = (a * b) % f.p
    return Matrix(f, rows, cols, out)


def vec(A: Matrix) -> Matrix:
    """Flatten row-by-row into a 1 x (rows*cols) row vector."""
    return Matrix(A.field, 1, A.rows * A.cols, list(A.data))


def rank(A: Matrix) -> int:
    """Row rank over F_p, by Gaussian elimination with first-nonzero pivoting."""
    arr = np.array(A.data, dtype=np.int64).reshape(A.rows, A.cols)
    return rank_mod(arr, A.field.p)


def rank_mod(arr: np.ndarray, p: int, panel: int = 32) -> int:
    """Rank of an integer array over F_p.

    For moduli small enough that every intermediate stays below 2**53 the
    elimination runs in float64 (exact, and the trailing updates ride on
    BLAS); otherwise a plain exact row elimination takes over.
    """
    a = np.asarray(arr)
    if a.ndim != 2:
        raise DimError("rank expects a 2-d array")
    m, n = a.shape
    if m == 0 or n == 0:
        return 0
    if (p - 1) ** 2 * (n + panel + 2) < 2**53:
        return _rank_blocked_float(a, p, panel)
    return _rank_rowstep(a, p)


def _rank_blocked_float(arr: np.ndarray, p: int, panel: int) -> int:
    """Blocked elimination in exact float64.

    Pivots are found panel by panel on a reduced contiguous copy of the
    panel columns; the trailing block receives one matrix-product update
    per panel and is only reduced when its columns become a panel. The
    caller guarantees (p-1)^2 * (n + panel + 2) < 2**53, which bounds
    every intermediate below 2**53, so all float64 arithmetic is exact.
    """
    a = np.asarray(arr, dtype=np.float64) % p
    m, n = a.shape
    r = 0
    c0 = 0
    while r < m and c0 < n:
        c1 = min(c0 + panel, n)
        rows = m - r
        P = a[r:m, c0:c1] % p
        piv_local: list[int] = []
        swaps: list[tuple[int, int]] = []
        rr = 0
        for j in range(c1 - c0):
            nz = np.flatnonzero(P[rr:, j])
            if nz.size == 0:
                continue
            t = rr + int(nz[0])
            if t != rr:
                P[[rr, t], :] = P[[t, rr], :]
                swaps.append((rr, t))
            inv = pow(int(P[rr, j]), p - 2, p)
            if rr + 1 < rows:
                f = (P[rr + 1 :, j] * inv) % p
                P[rr + 1 :, j + 1 :] = (P[rr + 1 :, j + 1 :] - np.outer(f, P[rr, j + 1 :])) % p
                # keep the multipliers in the pivot column for the block update
                P[rr + 1 :, j] = f
            piv_local.append(j)
            rr += 1
        npiv = rr
        if npiv and c1 < n:
            T = a[r:m, c1:n]
            for x, y in swaps:
                T[[x, y], :] = T[[y, x], :]
            u = T[:npiv, :]
            u %= p
            lo = P[:npiv, :][:, piv_local]
            for t in range(1, npiv):
                u[t] = (u[t] - lo[t, :t] @ u[:t]) % p
            if npiv < rows:
                T[npiv:, :] -= P[npiv:, :][:, piv_local] @ u
        r += npiv
        c0 = c1
    return r


def _rank_rowstep(arr: np.ndarray, p: int) -> int:
    """Unblocked exact elimination; handles arbitrarily large moduli."""
    dtype = np.int64 if (p - 1) ** 2 * 2 < 2**63 else object
    a = np.array(arr, dtype=dtype) % p
    m, n = a.shape
    r = 0
    for c in range(n):
        nz = np.flatnonzero(a[r:m, c])
        if nz.size == 0:
            continue
        t = r + int(nz[0])
        if t != r:
            a[[r, t], :] = a[[t, r], :]
        inv = pow(int(a[r, c]), p - 2, p)
        if r + 1 < m:
            f = (a[r + 1 :, c] * inv) % p
            a[r + 1 :, c:] = (a[r + 1 :, c:] - np.outer(f, a[r, c:])) % p
        r += 1
        if r == m:
            break
    return r


def solve_square(A: Matrix, b: Matrix) -> Matrix:
    """Solve A x = b for square invertible A (Gauss-Jordan over F_p)."""
    f = _same_field(A, b)
    if A.rows != A.cols:
        raise DimError("A must be square")
    if b.rows != A.rows:
        raise DimError("b has wrong number of rows")
    p = f.p
    n = A.rows
    aug = [A.row(i) + b.row(i) for i in range(n)]
    width = n + b.cols
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] % p != 0), None)
        if piv is None:
            raise SingularError("matrix is singular over F_%d" % p)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = pow(aug[col][col], p - 2, p)
        aug[col] = [(x * inv) % p for x in aug[col]]
        for r in range(n):
            if r == col or aug[r][col] == 0:
                continue
            factor = aug[r][col]
            prow = aug[col]
            aug[r] = [(x - factor * y) % p for x, y in zip(aug[r], prow)]
    return Matrix(f, n, b.cols, [aug[r][n + c] for r in range(n) for c in range(b.cols)])
