"""Finitely presented discrete modules and their morphism algebra.

An :class:`FPModule` over a backend is presented by a generator count
``gens`` and a relation matrix ``rels`` whose columns are relators; it
is the cokernel of ``rels`` over the level ring R_n = Lambda/I_n, where
``n = ann_level`` (INF over the z backend, where I_n = 0).  So the
module is Lambda^gens / (column span of rels + I_n * Lambda^gens), and
I_n annihilates it by construction.

Morphisms are matrices read modulo the target relations.  Kernels,
cokernels, images, tensor and Hom all reduce to normal forms and
membership solving over the level rings, which is what makes the rest
of the library computable.
"""

from __future__ import annotations

import random

from .coefficients import (
    INF, Backend, BackendMismatch, Matrix, ShapeError, block_diag,
    invert_matrix, kernel_basis, normal_form, solve_membership,
)


def _common_ann(*levels):
    out = 0
    for lv in levels:
        if lv is INF:
            return INF
        out = max(out, lv)
    return out


class FPModule:
    """A finitely presented discrete module with annihilation level."""

    __slots__ = ("backend", "ann_level", "gens", "rels", "_snf", "_divisors")

    def __init__(self, backend, ann_level, gens, rels=None):
        self.backend = backend
        if backend.kind == "z":
            ann_level = INF
        elif ann_level is INF:
            raise ValueError("finite annihilation level required for local backends")
        self.ann_level = ann_level
        self.gens = gens
        if rels is None:
            rels = Matrix.zeros(backend, ann_level, gens, 0)
        if rels.rows != gens:
            raise ShapeError(f"relations have {rels.rows} rows for {gens} generators")
        self.rels = rels.reduce(ann_level) if rels.level != ann_level else rels
        self._snf = None
        self._divisors = None

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, backend):
        return cls(backend, 0 if backend.kind != "z" else INF, 0)

    @classmethod
    def free(cls, backend, level, k):
        """The free level-ring module (R/I_level)^k (Z^k over z)."""
        return cls(backend, level, k)

    @classmethod
    def from_divisors(cls, backend, divisors, level=None):
        """Direct sum of cyclic modules.

        Over a local backend ``divisors`` is a list of pi-exponents
        (a value equal to ``level`` gives a free level-ring summand);
        over z it is a list of integers with 0 meaning a free Z summand.
        """
        divisors = list(divisors)
        if backend.kind == "z":
            g = len(divisors)
            rels = Matrix.zeros(backend, INF, g, 0)
            for i, d in enumerate(divisors):
                if d != 0:
                    col = [[d] if j == i else [0] for j in range(g)]
                    rels = rels.hstack(Matrix(backend, INF, col, g, 1))
            return cls(backend, INF, g, rels)
        if level is None:
            level = max(divisors, default=0)
        g = len(divisors)
        rels = Matrix.zeros(backend, level, g, 0)
        for i, e in enumerate(divisors):
            if e < level:
                col = [[backend.pi_power(e)] if j == i else [backend.zero]
                       for j in range(g)]
                rels = rels.hstack(Matrix(backend, level, col, g, 1))
        return cls(backend, level, g, rels)

    # -- structure ------------------------------------------------------------

    def __repr__(self):
        return (f"FPModule({self.backend!r}, ann={self.ann_level}, "
                f"gens={self.gens}, divisors={self.divisors()})")

    def snf(self):
        if self._snf is None:
            self._snf = normal_form(self.rels)
        return self._snf

    def divisors(self):
        """Canonical isomorphism invariant.

        Local backends: sorted multiset of pi-exponents e with
        0 < e <= ann_level (e = ann_level marks a free level-ring
        summand).  z: sorted invariant factors >= 2 followed by one 0
        per free Z summand.
        """
        if self._divisors is not None:
            return self._divisors
        b, lv = self.backend, self.ann_level
        diag = self.snf().diagonal
        if b.kind == "z":
            torsion = sorted(abs(d) for d in diag if abs(d) not in (0, 1))
            rank = self.gens - sum(1 for d in diag if d != 0)
            self._divisors = tuple(torsion + [0] * rank)
        else:
            n = int(lv)
            exps = []
            for d in diag:
                v = b.valuation(d, lv)
                exps.append(n if v is INF else int(v))
            exps += [n] * (self.gens - len(diag))
            self._divisors = tuple(sorted(e for e in exps if e > 0))
        return self._divisors

    def is_zero(self):
        return not self.divisors()

    def isomorphic(self, other):
        """Divisor-multiset isomorphism test."""
        if self.backend != other.backend:
            return False
        return self.divisors() == other.divisors()

    def free_rank(self):
        """Number of free summands (rank over Z, or R_n-free summands)."""
        if self.backend.kind == "z":
            return sum(1 for d in self.divisors() if d == 0)
        return sum(1 for e in self.divisors() if e == self.ann_level)

    def size(self):
        """Cardinality (INF when infinite)."""
        b = self.backend
        if b.kind == "z":
            if any(d == 0 for d in self.divisors()):
                return INF
            out = 1
            for d in self.divisors():
                out *= d
            return out
        return b.prime ** sum(self.divisors())

    def rels_at(self, level):
        """Relation columns valid at a chosen working level.

        For levels above ann_level the implicit relations pi^ann * e_i
        are materialized.
        """
        if level == self.ann_level:
            return self.rels
        if level is INF or (self.ann_level is not INF and level > self.ann_level):
            lifted = Matrix(self.backend, level, self.rels.data,
                            self.rels.rows, self.rels.cols)
            ann = Matrix.scalar(self.backend, level,
                                self.backend.pi_power(int(self.ann_level)), self.gens)
            return lifted.hstack(ann)
        return self.rels.reduce(level)

    def direct_sum(self, *others):
        return direct_sum(self, *others)

    # -- elements (finite modules) ---------------------------------------------

    def element_count(self):
        return self.size()

    def enumerate_elements(self):
        """Canonical representatives of all elements (finite modules)."""
        if self.size() is INF:
            raise ValueError("cannot enumerate an infinite module")
        b, lv = self.backend, self.ann_level
        snf = self.snf()
        diag = snf.diagonal + [b.zero] * (self.gens - len(snf.diagonal))
        uinv = invert_matrix(snf.U)
        pools = []
        for d in diag:
            if b.kind == "z":
                pools.append(list(range(abs(d))) if d != 0 else [0])
            else:
                e = b.valuation(d, lv)
                e = int(lv) if e is INF else int(e)
                if b.kind == "padic":
                    pools.append(list(range(b.prime ** e)))
                else:
                    from itertools import product as iproduct
                    pools.append([tuple(c) for c in iproduct(range(b.prime), repeat=e)])
        from itertools import product as iproduct
        out = []
        for combo in iproduct(*pools):
            u = Matrix(b, lv, [[c] for c in combo], self.gens, 1)
            out.append(uinv * u)
        return out


def direct_sum(*modules):
    """Direct sum with injection and projection morphisms."""
    if not modules:
        raise ValueError("empty direct sum; use FPModule.zero")
    b = modules[0].backend
    for m in modules:
        if m.backend != b:
            raise BackendMismatch("direct sum across backends")
    ann = _common_ann(*[m.ann_level for m in modules])
    rels = block_diag([m.rels_at(ann) for m in modules], b, ann,
                      rows=0, cols=0)
    total = FPModule(b, ann, sum(m.gens for m in modules), rels)
    injections, projections = [], []
    offset = 0
    for m in modules:
        inj = Matrix.zeros(b, ann, total.gens, m.gens)
        d = [list(r) for r in inj.data]
        for i in range(m.gens):
            d[offset + i][i] = b.one
        inj = Matrix(b, ann, d, total.gens, m.gens)
        injections.append(ModMorphism(m, total, inj))
        proj = Matrix.zeros(b, m.ann_level, m.gens, total.gens)
        dp = [list(r) for r in proj.data]
        for i in range(m.gens):
            dp[i][offset + i] = b.one
        proj = Matrix(b, m.ann_level, dp, m.gens, total.gens)
        projections.append(ModMorphism(total, m, proj))
        offset += m.gens
    return total, injections, projections


class ModMorphism:
    """A matrix (tgt.gens x src.gens) read modulo the target relations."""

    __slots__ = ("src", "tgt", "matrix")

    def __init__(self, src, tgt, matrix, check=False):
        if src.backend != tgt.backend:
            raise BackendMismatch("morphism across backends")
        self.src = src
        self.tgt = tgt
        if matrix.rows != tgt.gens or matrix.cols != src.gens:
            raise ShapeError(f"map matrix {matrix.rows}x{matrix.cols} for "
                             f"{tgt.gens}x{src.gens}")
        self.matrix = matrix.reduce(tgt.ann_level) if matrix.level != tgt.ann_level \
            else matrix
        if check and not self.is_well_defined():
            raise ValueError("matrix does not define a morphism")

    # -- constructors ----------------------------------------------------------

    @classmethod
    def identity(cls, m):
        return cls(m, m, Matrix.identity(m.backend, m.ann_level, m.gens))

    @classmethod
    def zero_map(cls, src, tgt):
        return cls(src, tgt, Matrix.zeros(src.backend, tgt.ann_level,
                                          tgt.gens, src.gens))

    @classmethod
    def scalar_mult(cls, m, scalar):
        return cls(m, m, Matrix.scalar(m.backend, m.ann_level, scalar, m.gens))

    @classmethod
    def from_int_rows(cls, src, tgt, int_rows, check=False):
        return cls(src, tgt,
                   Matrix.from_int_rows(src.backend, tgt.ann_level, int_rows),
                   check=check)

    def __repr__(self):
        return f"ModMorphism({self.src.gens}->{self.tgt.gens} gens)"

    # -- algebra ----------------------------------------------------------------

    def _lift_matrix_to(self, level):
        if level == self.matrix.level:
            return self.matrix
        if self.matrix.level is INF or (level is not INF and level <= self.matrix.level):
            return self.matrix.reduce(level)
        return Matrix(self.matrix.backend, level, self.matrix.data,
                      self.matrix.rows, self.matrix.cols)

    def is_well_defined(self):
        W = self.src.rels_at(self.tgt.ann_level)
        img = self.matrix * W
        return columns_in_span(img, self.tgt.rels)

    def compose(self, other):
        """self o other (other first)."""
        if other.tgt is not self.src and other.tgt.gens != self.src.gens:
            raise ShapeError("composition mismatch")
        mat = self.matrix * other._lift_matrix_to(self.tgt.ann_level)
        return ModMorphism(other.src, self.tgt, mat)

    def __add__(self, other):
        return ModMorphism(self.src, self.tgt, self.matrix + other.matrix)

    def __sub__(self, other):
        return ModMorphism(self.src, self.tgt, self.matrix - other.matrix)

    def __neg__(self):
        return ModMorphism(self.src, self.tgt, -self.matrix)

    def is_zero_morphism(self):
        return columns_in_span(self.matrix, self.tgt.rels)

    def equals(self, other):
        """Equality modulo target relations."""
        if self.src.gens != other.src.gens or self.tgt is not other.tgt:
            if self.tgt.gens != other.tgt.gens:
                return False
        return (self - other).is_zero_morphism()

    def apply(self, col):
        """Image of an element (column in source coordinates)."""
        lifted = Matrix(col.backend, self.tgt.ann_level, col.data,
                        col.rows, col.cols)
        return self.matrix * lifted

    def is_injective(self):
        k, _ = kernel(self)
        return k.is_zero()

    def is_surjective(self):
        c, _ = cokernel(self)
        return c.is_zero()

    def is_isomorphism(self):
        return self.is_injective() and self.is_surjective()


def columns_in_span(M, W):
    """Are all columns of M in the column span of W (same ambient)?"""
    if M.cols == 0:
        return True
    W = W.reduce(M.level) if W.level != M.level else W
    if W.cols == 0:
        return M.is_zero()
    return solve_membership(W, M) is not None


def factor_through(gen_matrix, ambient_rels, target):
    """Coefficients X with gen_matrix * X = target modulo ambient_rels."""
    S = gen_matrix.hstack(ambient_rels) if ambient_rels.cols else gen_matrix
    sol = solve_membership(S, target)
    if sol is None:
        return None
    return sol.take_rows(range(gen_matrix.cols))


def relations_of_generators(G, ambient_rels, out_level):
    """Relations z with G z in span(ambient_rels), presented at out_level."""
    if G.cols == 0:
        return Matrix.zeros(G.backend, out_level, 0, 0)
    stacked = G.hstack(-ambient_rels) if ambient_rels.cols else G
    K = kernel_basis(stacked)
    z = K.take_rows(range(G.cols))
    return z.reduce(out_level) if z.level != out_level else z


def present_subquotient(G, ambient, out_level=None):
    """The submodule of ``ambient`` generated by the columns of G.

    Returns (module, inclusion) where the module's generators are the
    columns of G and the inclusion maps them into ``ambient``.
    """
    if out_level is None:
        out_level = ambient.ann_level
    rels = relations_of_generators(G, ambient.rels, out_level)
    sub = FPModule(ambient.backend, out_level, G.cols, rels)
    incl = ModMorphism(sub, ambient, G)
    return sub, incl


# ---------------------------------------------------------------------------
# kernels, cokernels, images

def kernel(f):
    """(K, inclusion) with the universal property of the kernel."""
    src, tgt = f.src, f.tgt
    L = _common_ann(src.ann_level, tgt.ann_level)
    A = f._lift_matrix_to(L)
    W = tgt.rels_at(L)
    stacked = A.hstack(-W) if W.cols else A
    K0 = kernel_basis(stacked).take_rows(range(src.gens))
    G = K0.reduce(src.ann_level) if K0.level != src.ann_level else K0
    return present_subquotient(G, src)


def cokernel(f):
    """(C, projection)."""
    tgt = f.tgt
    rels = tgt.rels.hstack(f.matrix) if tgt.rels.cols else f.matrix
    C = FPModule(tgt.backend, tgt.ann_level, tgt.gens, rels)
    proj = ModMorphism(tgt, C, Matrix.identity(tgt.backend, tgt.ann_level, tgt.gens))
    return C, proj


def image(f):
    """(I, mono, epi) with f = mono o epi."""
    src, tgt = f.src, f.tgt
    out_level = min(src.ann_level, tgt.ann_level) if tgt.ann_level is not INF \
        else src.ann_level
    if src.ann_level is INF:
        out_level = tgt.ann_level
    img, mono = present_subquotient(f.matrix, tgt, out_level)
    epi = ModMorphism(src, img,
                      Matrix.identity(src.backend, out_level, src.gens))
    return img, mono, epi


def lift_through(mono, g):
    """h with mono o h = g, for g landing in the image of the mono."""
    coeffs = factor_through(mono.matrix, mono.tgt.rels,
                            g._lift_matrix_to(mono.tgt.ann_level))
    if coeffs is None:
        return None
    return ModMorphism(g.src, mono.src, coeffs)


def is_exact(f, g):
    """Exactness at the middle of  src(f) -> tgt(f)=src(g) -> tgt(g)."""
    if not g.compose(f).is_zero_morphism():
        return False
    K, incl = kernel(g)
    span = f.matrix.hstack(g.src.rels) if g.src.rels.cols else f.matrix
    target = incl._lift_matrix_to(g.src.ann_level)
    return solve_membership(span, target) is not None if span.cols else target.is_zero()


def free_cover(n_module):
    """(level m, epi (R/I_m)^k -> N) with k = gens(N)."""
    m = n_module.ann_level
    source = FPModule.free(n_module.backend, m, n_module.gens)
    epi = ModMorphism(source, n_module,
                      Matrix.identity(n_module.backend, m, n_module.gens))
    return m, epi


# ---------------------------------------------------------------------------
# tensor and Hom

def tensor(M, N):
    """M (x) N with the standard block presentation."""
    if M.backend != N.backend:
        raise BackendMismatch("tensor across backends")
    b = M.backend
    t = min(M.ann_level, N.ann_level)
    gm, gn = M.gens, N.gens
    Im = Matrix.identity(b, t, gm)
    In = Matrix.identity(b, t, gn)
    left = M.rels_at(t).kronecker(In)
    right = Im.kronecker(N.rels_at(t))
    rels = left.hstack(right)
    return FPModule(b, t, gm * gn, rels)


def tensor_map(f, g):
    """Induced morphism on tensor products."""
    src = tensor(f.src, g.src)
    tgt = tensor(f.tgt, g.tgt)
    mat = f._lift_matrix_to(tgt.ann_level).kronecker(g._lift_matrix_to(tgt.ann_level))
    return ModMorphism(src, tgt, mat)


class HomSpace:
    """Hom(M, N) as an FPModule with an explicit morphism basis."""

    __slots__ = ("source", "target", "module", "basis")

    def __init__(self, M, N):
        b = M.backend
        if b != N.backend:
            raise BackendMismatch("hom across backends")
        self.source = M
        self.target = N
        lv = N.ann_level
        h, g = N.gens, M.gens
        W = M.rels_at(_common_ann(M.ann_level, N.ann_level)).reduce(lv) \
            if _common_ann(M.ann_level, N.ann_level) != lv \
            else M.rels_at(lv)
        rows = []
        for j in range(W.cols):
            w = [W.data[i][j] for i in range(W.rows)]
            for i in range(h):
                row = [b.zero] * (h * g)
                for k in range(g):
                    row[k * h + i] = w[k]
                rows.append(row)
        C = Matrix(b, lv, rows, len(rows), h * g) if rows else \
            Matrix.zeros(b, lv, 0, h * g)
        if W.cols and N.rels.cols:
            absorb = block_diag([-N.rels] * W.cols, b, lv)
        else:
            absorb = Matrix.zeros(b, lv, C.rows, 0)
        stacked = C.hstack(absorb) if absorb.cols else C
        if stacked.rows == 0:
            G = Matrix.identity(b, lv, h * g)
        else:
            G = kernel_basis(stacked).take_rows(range(h * g))
        Zspan = Matrix.identity(b, lv, g).kronecker(N.rels) if N.rels.cols \
            else Matrix.zeros(b, lv, h * g, 0)
        ambient = FPModule(b, lv, h * g, Zspan)
        self.module, _ = present_subquotient(G, ambient)
        self.basis = [self._unvec(G.column(j)) for j in range(G.cols)]

    def _unvec(self, col):
        b = self.source.backend
        h, g = self.target.gens, self.source.gens
        data = [[col.data[j * h + i][0] for j in range(g)] for i in range(h)]
        return Matrix(b, self.target.ann_level, data, h, g)

    def _vec(self, mat):
        h, g = self.target.gens, self.source.gens
        return Matrix(mat.backend, mat.level,
                      [[mat.data[i][j]] for j in range(g) for i in range(h)],
                      h * g, 1)

    def to_morphism(self, coeffs):
        """Morphism from a coefficient column over the basis."""
        b = self.source.backend
        lv = self.target.ann_level
        mat = Matrix.zeros(b, lv, self.target.gens, self.source.gens)
        for k, A in enumerate(self.basis):
            mat = mat + A.scale(b.canon(coeffs.data[k][0], lv))
        return ModMorphism(self.source, self.target, mat)

    def coords_of(self, f):
        if not self.basis:
            return Matrix.zeros(f.matrix.backend, self.target.ann_level, 0, 1)
        cols = self._vec(self.basis[0])
        for A in self.basis[1:]:
            cols = cols.hstack(self._vec(A))
        target = self._vec(f._lift_matrix_to(self.target.ann_level))
        if self.target.rels.cols:
            ambient_rels = Matrix.identity(f.matrix.backend, self.target.ann_level,
                                           self.source.gens).kronecker(self.target.rels)
            return factor_through(cols, ambient_rels, target)
        sol = solve_membership(cols, target)
        return sol.take_rows(range(len(self.basis))) if sol is not None else None

    def enumerate_morphisms(self):
        """All morphisms M -> N (finite Hom only)."""
        out = []
        for el in self.module.enumerate_elements():
            out.append(self.to_morphism(el))
        return out


def hom_module(M, N):
    """Hom(M, N) as an FPModule (see :class:`HomSpace` for the basis)."""
    return HomSpace(M, N).module


# ---------------------------------------------------------------------------
# deterministic generators for property tests

def random_unimodular(rng, backend, level, n, ops=None):
    U = Matrix.identity(backend, level, n)
    if n == 0:
        return U
    if ops is None:
        ops = 2 * n
    d = [list(r) for r in U.data]
    for _ in range(ops):
        i, j = rng.randrange(n), rng.randrange(n)
        if i == j:
            continue
        c = rng.randint(-2, 2)
        if backend.kind == "pseries":
            cval = backend.canon((c % backend.prime, rng.randint(0, 1)), level)
        else:
            cval = c
        for k in range(n):
            d[i][k] = backend.add(d[i][k], backend.mul(cval, d[j][k], level), level)
    return Matrix(backend, level, d, n, n)


def random_module(seed, backend, level=None, max_gens=3, max_exp=3):
    """Deterministic random module with a scrambled presentation."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if backend.kind == "z":
        level = INF
        g = rng.randint(0, max_gens)
        divisors = [rng.choice([0, 2, 3, 4, 8, 9]) for _ in range(g)]
        base = FPModule.from_divisors(backend, divisors)
    else:
        if level is None:
            level = max_exp
        g = rng.randint(0, max_gens)
        divisors = [rng.randint(1, min(max_exp, int(level))) for _ in range(g)]
        base = FPModule.from_divisors(backend, divisors, level=level)
    U = random_unimodular(rng, backend, base.ann_level, base.gens)
    rels = U * base.rels if base.rels.cols else base.rels
    return FPModule(backend, base.ann_level, base.gens, rels)


def random_morphism(seed, M, N):
    """Deterministic random well-defined morphism via the Hom basis."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    hom = HomSpace(M, N)
    b = M.backend
    lv = N.ann_level
    coeffs = []
    for _ in hom.basis:
        if b.kind == "pseries":
            coeffs.append([(rng.randint(0, b.prime - 1), rng.randint(0, b.prime - 1))])
        else:
            coeffs.append([rng.randint(0, 7)])
    col = Matrix(b, lv, coeffs, len(hom.basis), 1)
    return hom.to_morphism(col)
