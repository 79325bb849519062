"""Exact arithmetic and matrix normal forms over the coefficient backends.

Three backends share one interface:

* ``z``       -- the integers with the trivial ideal chain I_n = (0),
* ``padic``   -- Z with the chain I_n = (p^n), level ring Z/p^n,
* ``pseries`` -- F_p[x] with the chain I_n = (x^n), level ring F_p[x]/x^n.

A "level" selects the quotient ring the arithmetic happens in.  Level
``INF`` means the base ring itself (Z, or F_p[x]); for ``z`` every level
is INF.  Scalars are plain ints for the integer backends and coefficient
tuples ``(c0, c1, ...)`` for ``pseries``.

Every matrix routine is exact.  The normal form uses a single
valuation-pivot elimination: pick the entry of least size (absolute
value over Z, degree over F_p[x], uniformizer valuation over a level
ring), clear its row and column by exact or Euclidean division, and
normalize the pivot to a canonical divisor (positive integer, monic
polynomial, power of the uniformizer).
"""

from __future__ import annotations

import math
from fractions import Fraction

INF = math.inf

Z = "z"
PADIC = "padic"
PSERIES = "pseries"


class BackendMismatch(TypeError):
    """Operands built over different backends."""


class ShapeError(ValueError):
    """Matrix dimensions do not fit the operation."""


class LevelError(ValueError):
    """Attempt to raise a level; towers only descend."""


def _is_prime(n):
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


# ---------------------------------------------------------------------------
# polynomial helpers (coefficient tuples over F_p, lowest degree first)

def poly_trim(c):
    i = len(c)
    while i > 0 and c[i - 1] == 0:
        i -= 1
    return tuple(c[:i])


def poly_canon(c, p, level):
    if level is INF:
        return poly_trim(tuple(v % p for v in c))
    n = int(level)
    return poly_trim(tuple(v % p for v in c[:n]))


def poly_add(a, b, p):
    m = max(len(a), len(b))
    return poly_trim(tuple(((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)) % p
                           for i in range(m)))


def poly_neg(a, p):
    return tuple((-v) % p for v in a)


def poly_mul(a, b, p):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u == 0:
            continue
        for j, v in enumerate(b):
            out[i + j] = (out[i + j] + u * v) % p
    return poly_trim(tuple(out))


def poly_val(a):
    """x-adic valuation; INF for the zero polynomial."""
    for i, v in enumerate(a):
        if v != 0:
            return i
    return INF


def poly_divmod(a, b, p):
    """Euclidean division by degree in F_p[x]."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(a)
    q = [0] * max(len(a) - len(b) + 1, 1)
    inv_lead = pow(b[-1], -1, p)
    while len(poly_trim(tuple(a))) >= len(b):
        a = list(poly_trim(tuple(a)))
        shift = len(a) - len(b)
        coef = (a[-1] * inv_lead) % p
        q[shift] = coef
        for i, v in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * v) % p
    return poly_trim(tuple(q)), poly_trim(tuple(a))


def poly_series_inverse(u, p, n):
    """Inverse of a unit u (u(0) != 0) modulo x^n."""
    if not u or u[0] % p == 0:
        raise ZeroDivisionError("not a unit in F_p[[x]]")
    inv0 = pow(u[0], -1, p)
    v = [inv0] + [0] * (n - 1)
    for i in range(1, n):
        s = 0
        for j in range(1, min(i, len(u) - 1) + 1):
            s += u[j] * v[i - j]
        v[i] = (-inv0 * s) % p
    return poly_trim(tuple(v))


# ---------------------------------------------------------------------------

class Backend:
    """A coefficient domain with uniformizer and open-ideal chain.

    Immutable; exposes scalar arithmetic at a given level plus the
    valuation data the normal form pivots on.
    """

    __slots__ = ("kind", "prime")

    def __init__(self, kind, prime=0):
        if kind not in (Z, PADIC, PSERIES):
            raise ValueError(f"unknown backend kind {kind!r}")
        if kind in (PADIC, PSERIES):
            if not _is_prime(prime):
                raise ValueError(f"prime required for {kind} backend, got {prime}")
        self.kind = kind
        self.prime = prime

    def __repr__(self):
        if self.kind == Z:
            return "Backend(z)"
        return f"Backend({self.kind}, p={self.prime})"

    def __eq__(self, other):
        return (isinstance(other, Backend)
                and self.kind == other.kind and self.prime == other.prime)

    def __hash__(self):
        return hash((self.kind, self.prime))

    # -- scalar arithmetic ---------------------------------------------------

    @property
    def zero(self):
        return () if self.kind == PSERIES else 0

    @property
    def one(self):
        return (1,) if self.kind == PSERIES else 1

    def from_int(self, k):
        if self.kind == PSERIES:
            return poly_canon((k,), self.prime, INF)
        return k

    def pi_power(self, e):
        """The scalar pi^e (p^e, or x^e); undefined over z."""
        if self.kind == PADIC:
            return self.prime ** e
        if self.kind == PSERIES:
            return ((0,) * e) + (1,)
        raise ValueError("the z backend has no uniformizer")

    def canon(self, v, level):
        if self.kind == PSERIES:
            return poly_canon(tuple(v), self.prime, level)
        if self.kind == Z or level is INF:
            return int(v)
        return int(v) % (self.prime ** int(level))

    def add(self, a, b, level):
        if self.kind == PSERIES:
            return poly_canon(poly_add(a, b, self.prime), self.prime, level)
        return self.canon(a + b, level)

    def sub(self, a, b, level):
        if self.kind == PSERIES:
            return poly_canon(poly_add(a, poly_neg(b, self.prime), self.prime),
                              self.prime, level)
        return self.canon(a - b, level)

    def mul(self, a, b, level):
        if self.kind == PSERIES:
            return poly_canon(poly_mul(a, b, self.prime), self.prime, level)
        return self.canon(a * b, level)

    def neg(self, a, level):
        if self.kind == PSERIES:
            return poly_canon(poly_neg(a, self.prime), self.prime, level)
        return self.canon(-a, level)

    def is_zero(self, a, level):
        return self.canon(a, level) == self.zero

    def valuation(self, a, level):
        """pi-adic valuation of the residue of ``a`` at ``level``.

        valuation(0) = INF, valuation(unit) = 0, valuation(pi*s) =
        1 + valuation(s).  Over z every nonzero scalar has valuation 0
        (the ideal chain is trivial).
        """
        a = self.canon(a, level)
        if self.kind == Z:
            return INF if a == 0 else 0
        if self.kind == PADIC:
            if a == 0:
                return INF
            v = 0
            while a % self.prime == 0:
                a //= self.prime
                v += 1
            return v
        return poly_val(a)

    def _pivot_size(self, a, level):
        """Ordering key for pivot selection; smaller is better."""
        if level is INF:
            if self.kind == PSERIES:
                return len(a)          # degree + 1
            return abs(a)
        return self.valuation(a, level)

    def divmod(self, a, b, level):
        """q, r with a = q*b + r; exact (r = 0) over the chain rings
        whenever valuation(a) >= valuation(b)."""
        a = self.canon(a, level)
        b = self.canon(b, level)
        if self.is_zero(b, level):
            raise ZeroDivisionError("division by zero scalar")
        if level is INF:
            if self.kind == PSERIES:
                return poly_divmod(a, b, self.prime)
            q, r = divmod(a, b)
            # keep |r| <= |b|/2 so Euclidean elimination shrinks fast
            if abs(r) * 2 > abs(b):
                q, r = q + 1, r - b
            return q, r
        n = int(level)
        vb = self.valuation(b, level)
        va = self.valuation(a, level)
        if va < vb:
            return self.zero, a
        if self.kind == PADIC:
            pn = self.prime ** n
            u = b // (self.prime ** vb)
            uinv = pow(u, -1, pn)
            q = ((a // (self.prime ** vb)) * uinv) % pn
            return q, 0
        # pseries at finite level
        u = poly_trim(tuple(b[vb:]))
        uinv = poly_series_inverse(u, self.prime, n)
        shifted = poly_trim(tuple(a[vb:]))
        q = poly_canon(poly_mul(shifted, uinv, self.prime), self.prime, level)
        return q, self.zero

    def unit_inverse(self, a, level):
        """Inverse of a unit at the given level."""
        q, r = self.divmod(self.one, a, level)
        if not self.is_zero(r, level):
            raise ZeroDivisionError(f"{a!r} is not a unit at level {level}")
        return q

    def scalar_to_exponent(self, a, level):
        """Express a canonical divisor as a pi-exponent (chain rings)."""
        return self.valuation(a, level)


# ---------------------------------------------------------------------------

class Matrix:
    """Immutable matrix over one backend at one level.

    Entries are stored as canonical residues.  ``level`` is INF for the
    base ring and a nonnegative integer for the finite quotients.
    """

    __slots__ = ("backend", "level", "rows", "cols", "data")

    def __init__(self, backend, level, data, rows=None, cols=None):
        self.backend = backend
        self.level = level
        data = [list(r) for r in data]
        if rows is None:
            rows = len(data)
        if cols is None:
            cols = len(data[0]) if data else 0
        for r in data:
            if len(r) != cols:
                raise ShapeError("ragged matrix data")
        self.rows = rows
        self.cols = cols
        self.data = tuple(tuple(backend.canon(v, level) for v in r) for r in data)

    # -- constructors --------------------------------------------------------

    @classmethod
    def zeros(cls, backend, level, rows, cols):
        z = backend.zero
        return cls(backend, level, [[z] * cols for _ in range(rows)], rows, cols)

    @classmethod
    def identity(cls, backend, level, n):
        z, o = backend.zero, backend.one
        return cls(backend, level,
                   [[o if i == j else z for j in range(n)] for i in range(n)], n, n)

    @classmethod
    def from_int_rows(cls, backend, level, int_rows):
        return cls(backend, level,
                   [[backend.from_int(v) for v in r] for r in int_rows])

    @classmethod
    def scalar(cls, backend, level, value, n):
        m = cls.zeros(backend, level, n, n)
        d = [list(r) for r in m.data]
        for i in range(n):
            d[i][i] = value
        return cls(backend, level, d, n, n)

    # -- basics ---------------------------------------------------------------

    def __repr__(self):
        return f"Matrix({self.backend!r}, level={self.level}, {self.rows}x{self.cols})"

    def __eq__(self, other):
        return (isinstance(other, Matrix) and self.backend == other.backend
                and self.level == other.level and self.data == other.data
                and self.rows == other.rows and self.cols == other.cols)

    def __hash__(self):
        return hash((self.backend, self.level, self.rows, self.cols, self.data))

    def is_zero(self):
        z = self.backend.zero
        return all(v == z for r in self.data for v in r)

    def entry(self, i, j):
        return self.data[i][j]

    def column(self, j):
        return Matrix(self.backend, self.level,
                      [[self.data[i][j]] for i in range(self.rows)], self.rows, 1)

    def columns(self):
        return [self.column(j) for j in range(self.cols)]

    def transpose(self):
        return Matrix(self.backend, self.level,
                      [[self.data[i][j] for i in range(self.rows)]
                       for j in range(self.cols)], self.cols, self.rows)

    def _check_compat(self, other):
        if self.backend != other.backend:
            raise BackendMismatch(f"{self.backend!r} vs {other.backend!r}")
        if self.level != other.level:
            raise LevelError(f"levels differ: {self.level} vs {other.level}")

    def __add__(self, other):
        self._check_compat(other)
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ShapeError("addition shape mismatch")
        b, lv = self.backend, self.level
        return Matrix(b, lv, [[b.add(self.data[i][j], other.data[i][j], lv)
                               for j in range(self.cols)] for i in range(self.rows)],
                      self.rows, self.cols)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        b, lv = self.backend, self.level
        return Matrix(b, lv, [[b.neg(v, lv) for v in r] for r in self.data],
                      self.rows, self.cols)

    def __mul__(self, other):
        self._check_compat(other)
        if self.cols != other.rows:
            raise ShapeError(f"cannot multiply {self.rows}x{self.cols} by "
                             f"{other.rows}x{other.cols}")
        b, lv = self.backend, self.level
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = b.zero
                for k in range(self.cols):
                    acc = b.add(acc, b.mul(self.data[i][k], other.data[k][j], lv), lv)
                row.append(acc)
            out.append(row)
        return Matrix(b, lv, out, self.rows, other.cols)

    def scale(self, s):
        b, lv = self.backend, self.level
        return Matrix(b, lv, [[b.mul(s, v, lv) for v in r] for r in self.data],
                      self.rows, self.cols)

    def hstack(self, other):
        self._check_compat(other)
        if self.rows != other.rows:
            raise ShapeError("hstack row mismatch")
        return Matrix(self.backend, self.level,
                      [list(self.data[i]) + list(other.data[i]) for i in range(self.rows)],
                      self.rows, self.cols + other.cols)

    def vstack(self, other):
        self._check_compat(other)
        if self.cols != other.cols:
            raise ShapeError("vstack column mismatch")
        return Matrix(self.backend, self.level,
                      [list(r) for r in self.data] + [list(r) for r in other.data],
                      self.rows + other.rows, self.cols)

    def take_rows(self, idx):
        return Matrix(self.backend, self.level, [list(self.data[i]) for i in idx],
                      len(idx), self.cols)

    def take_cols(self, idx):
        return Matrix(self.backend, self.level,
                      [[self.data[i][j] for j in idx] for i in range(self.rows)],
                      self.rows, len(idx))

    def kronecker(self, other):
        self._check_compat(other)
        b, lv = self.backend, self.level
        out = []
        for i in range(self.rows):
            for k in range(other.rows):
                row = []
                for j in range(self.cols):
                    for l in range(other.cols):
                        row.append(b.mul(self.data[i][j], other.data[k][l], lv))
                out.append(row)
        return Matrix(b, lv, out, self.rows * other.rows, self.cols * other.cols)

    def reduce(self, to_level):
        """Reduce entries modulo I_{to_level}; levels only descend."""
        if to_level == self.level:
            return self
        if self.level is not INF and (to_level is INF or to_level > self.level):
            raise LevelError(f"cannot raise level {self.level} to {to_level}")
        return Matrix(self.backend, to_level, self.data, self.rows, self.cols)


def block_diag(blocks, backend=None, level=None, rows=0, cols=0):
    """Block-diagonal assembly; empty blocks contribute their shape only."""
    if blocks:
        backend = blocks[0].backend
        level = blocks[0].level
    total_r = sum(b.rows for b in blocks) + rows
    total_c = sum(b.cols for b in blocks) + cols
    out = Matrix.zeros(backend, level, total_r, total_c)
    d = [list(r) for r in out.data]
    i0 = j0 = 0
    for b in blocks:
        for i in range(b.rows):
            for j in range(b.cols):
                d[i0 + i][j0 + j] = b.data[i][j]
        i0 += b.rows
        j0 += b.cols
    return Matrix(backend, level, d, total_r, total_c)


# ---------------------------------------------------------------------------
# normal form

class SmithForm:
    """U * M * V = D with D diagonal and a divisibility chain."""

    __slots__ = ("U", "D", "V", "matrix")

    def __init__(self, U, D, V, matrix):
        self.U = U
        self.D = D
        self.V = V
        self.matrix = matrix

    @property
    def diagonal(self):
        n = min(self.D.rows, self.D.cols)
        return [self.D.data[i][i] for i in range(n)]

    def rank(self):
        b, lv = self.D.backend, self.D.level
        return sum(1 for d in self.diagonal if not b.is_zero(d, lv))

    def exponents(self):
        """pi-exponents of the diagonal (chain-ring levels only)."""
        b, lv = self.D.backend, self.D.level
        return [b.valuation(d, lv) for d in self.diagonal]


def normal_form(M):
    """Diagonalize by valuation-pivot elimination.

    Returns a :class:`SmithForm` with unimodular U, V.  Over Z this is
    the classical Smith normal form d1 | d2 | ...; over a level ring the
    diagonal is pi^{e1} | pi^{e2} | ... with e1 <= e2 <= ...
    """
    b, lv = M.backend, M.level
    A = [list(r) for r in M.data]
    rows, cols = M.rows, M.cols
    U = [list(r) for r in Matrix.identity(b, lv, rows).data]
    V = [list(r) for r in Matrix.identity(b, lv, cols).data]

    def row_op(i, j, q):          # row_i -= q * row_j
        for k in range(cols):
            A[i][k] = b.sub(A[i][k], b.mul(q, A[j][k], lv), lv)
        for k in range(rows):
            U[i][k] = b.sub(U[i][k], b.mul(q, U[j][k], lv), lv)

    def col_op(i, j, q):          # col_i -= q * col_j
        for k in range(rows):
            A[k][i] = b.sub(A[k][i], b.mul(q, A[k][j], lv), lv)
        for k in range(cols):
            V[k][i] = b.sub(V[k][i], b.mul(q, V[k][j], lv), lv)

    def swap_rows(i, j):
        if i != j:
            A[i], A[j] = A[j], A[i]
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        if i != j:
            for k in range(rows):
                A[k][i], A[k][j] = A[k][j], A[k][i]
            for k in range(cols):
                V[k][i], V[k][j] = V[k][j], V[k][i]

    def scale_row(i, s):          # row_i *= s  (s a unit)
        for k in range(cols):
            A[i][k] = b.mul(s, A[i][k], lv)
        for k in range(rows):
            U[i][k] = b.mul(s, U[i][k], lv)

    def find_pivot(t):
        best = None
        best_size = None
        for i in range(t, rows):
            for j in range(t, cols):
                if b.is_zero(A[i][j], lv):
                    continue
                size = b._pivot_size(A[i][j], lv)
                if best is None or size < best_size:
                    best, best_size = (i, j), size
        return best

    t = 0
    while t < min(rows, cols):
        pos = find_pivot(t)
        if pos is None:
            break
        swap_rows(t, pos[0])
        swap_cols(t, pos[1])
        while True:
            # clear column t below the pivot
            dirty = False
            for i in range(t + 1, rows):
                if b.is_zero(A[i][t], lv):
                    continue
                q, r = b.divmod(A[i][t], A[t][t], lv)
                row_op(i, t, q)
                if not b.is_zero(A[i][t], lv):
                    dirty = True
            if dirty:
                pos = find_pivot(t)
                swap_rows(t, pos[0])
                swap_cols(t, pos[1])
                continue
            # clear row t right of the pivot
            for j in range(t + 1, cols):
                if b.is_zero(A[t][j], lv):
                    continue
                q, r = b.divmod(A[t][j], A[t][t], lv)
                col_op(j, t, q)
                if not b.is_zero(A[t][j], lv):
                    dirty = True
            if dirty:
                pos = find_pivot(t)
                swap_rows(t, pos[0])
                swap_cols(t, pos[1])
                continue
            if any(not b.is_zero(A[i][t], lv) for i in range(t + 1, rows)):
                continue
            # divisibility sweep: pivot must divide the remaining block
            offender = None
            for i in range(t + 1, rows):
                for j in range(t + 1, cols):
                    if b.is_zero(A[i][j], lv):
                        continue
                    q, r = b.divmod(A[i][j], A[t][t], lv)
                    if not b.is_zero(r, lv):
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is None:
                break
            for k in range(cols):
                A[t][k] = b.add(A[t][k], A[offender][k], lv)
            for k in range(rows):
                U[t][k] = b.add(U[t][k], U[offender][k], lv)
        # normalize the pivot to a canonical divisor
        piv = A[t][t]
        if b.kind == Z or (b.kind == PADIC and lv is INF):
            if piv < 0:
                scale_row(t, -1)
        elif lv is INF:                       # monic polynomial
            inv_lead = poly_series_inverse((piv[-1],), b.prime, 1)
            scale_row(t, inv_lead)
        else:
            e = b.valuation(piv, lv)
            unit = b.divmod(piv, b.pi_power(e), lv)[0]
            scale_row(t, b.unit_inverse(unit, lv))
        t += 1

    return SmithForm(Matrix(b, lv, U, rows, rows),
                     Matrix(b, lv, A, rows, cols),
                     Matrix(b, lv, V, cols, cols), M)


def solve_membership(A, B):
    """Solve A X = B over the level ring; None if no solution.

    ``B`` may have several columns.  The decision goes through
    :func:`normal_form`: with U A V = D, the system is D Y = U B and
    X = V Y.
    """
    if A.backend != B.backend:
        raise BackendMismatch(f"{A.backend!r} vs {B.backend!r}")
    if A.level != B.level:
        raise LevelError(f"levels differ: {A.level} vs {B.level}")
    if A.rows != B.rows:
        raise ShapeError(f"A has {A.rows} rows, B has {B.rows}")
    b, lv = A.backend, A.level
    snf = normal_form(A)
    C = snf.U * B
    n = min(A.rows, A.cols)
    Y = Matrix.zeros(b, lv, A.cols, B.cols)
    y = [list(r) for r in Y.data]
    for j in range(B.cols):
        for i in range(A.rows):
            ci = C.data[i][j]
            if i >= n or b.is_zero(snf.D.data[i][i], lv):
                if not b.is_zero(ci, lv):
                    return None
                continue
            q, r = b.divmod(ci, snf.D.data[i][i], lv)
            if not b.is_zero(r, lv):
                return None
            y[i][j] = q
    return snf.V * Matrix(b, lv, y, A.cols, B.cols)


def kernel_basis(A):
    """Columns generating {x : A x = 0} over the level ring."""
    b, lv = A.backend, A.level
    snf = normal_form(A)
    gens = []
    n = min(A.rows, A.cols)
    for j in range(A.cols):
        col = snf.V.column(j)
        if j >= n or b.is_zero(snf.D.data[j][j], lv):
            gens.append(col)
            continue
        if lv is INF:
            continue                    # nonzero divisor over a domain
        e = b.valuation(snf.D.data[j][j], lv)
        if e == 0:
            continue
        gens.append(col.scale(b.pi_power(int(lv) - e)))
    if not gens:
        return Matrix.zeros(b, lv, A.cols, 0)
    out = gens[0]
    for g in gens[1:]:
        out = out.hstack(g)
    return out


def invert_matrix(A):
    """Inverse of a square matrix invertible over the level ring."""
    if A.rows != A.cols:
        raise ShapeError("only square matrices invert")
    inv = solve_membership(A, Matrix.identity(A.backend, A.level, A.rows))
    if inv is None or not (inv * A - Matrix.identity(A.backend, A.level, A.rows)).is_zero():
        raise ZeroDivisionError("matrix is not invertible at this level")
    return inv


def rational_rank(M):
    """Rank over Q of an integer matrix (independent of normal_form)."""
    A = [[Fraction(v) for v in row] for row in M.data]
    rank = 0
    for col in range(M.cols):
        piv = next((r for r in range(rank, M.rows) if A[r][col] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = 1 / A[rank][col]
        A[rank] = [v * inv for v in A[rank]]
        for r in range(M.rows):
            if r != rank and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b_ for a, b_ in zip(A[r], A[rank])]
        rank += 1
    return rank
