"""Contramodules over the topological ring backends.

A complete separated contramodule is represented through its reduction
tower Q/(I_n * Q): an inverse system of FPModules with surjective
transitions in which I_n annihilates level n.  Free contramodules on a
finite set X have reduction levels (R/I_n)^X.  Over the z backend the
chain is trivial, reductions are constant, and the one designated
infinitely generated coefficient -- the rationals -- is kept symbolic
with its own tensor rule.

The contratensor product of a finitely presented discrete module with a
contramodule is computed from a free presentation of the module; it is
right exact, and flatness is probed by a finite battery of short exact
sequences whose composition is reported with every verdict.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

from .coefficients import INF, Matrix, rational_rank
from .discrete import (
    FPModule, ModMorphism, cokernel, direct_sum, free_cover, kernel,
    is_exact, tensor, tensor_map,
)
from .procat import STRICT, Tower


class Rationals:
    """The designated torsion-free coefficient Q over the z backend.

    Not finitely presentable, so it is special-cased symbolically: the
    tensor rule sends a module to a rational vector space of dimension
    its free rank.
    """

    def __init__(self, backend):
        if backend.kind != "z":
            raise ValueError("the rationals coefficient lives over the z backend")
        self.backend = backend
        self.tags = ("designated-rationals",)

    def __repr__(self):
        return "Rationals(z)"


class QValue:
    """A rational vector space of finite rank, as an abelian-group value."""

    __slots__ = ("rank",)

    def __init__(self, rank):
        self.rank = rank

    def is_zero(self):
        return self.rank == 0

    def divisors(self):
        return ("q",) * self.rank

    def __eq__(self, other):
        return isinstance(other, QValue) and self.rank == other.rank

    def __repr__(self):
        return f"QValue(rank={self.rank})"


class ContraTower:
    """A complete separated contramodule via its reduction tower."""

    def __init__(self, backend, red_level_fn, red_transition_fn, tags=(),
                 rule=None):
        self.backend = backend
        self.tags = tuple(tags)
        self._tower = Tower(backend, red_level_fn, red_transition_fn,
                            strict=STRICT,
                            rule=rule or {"kind": "contra"})

    def red_level(self, n):
        m = self._tower.level(n)
        if self.backend.kind != "z" and m.ann_level is not INF \
                and m.ann_level > n:
            raise ValueError("I_n must annihilate red_level(n)")
        return m

    def red_transition(self, n):
        return self._tower.transition(n)

    def red_transition_composite(self, a, b):
        return self._tower.transition_composite(a, b)

    def verify(self, depth):
        """Transitions surjective (complete separated representation)."""
        for n in range(depth):
            if not self.red_transition(n).is_surjective():
                return False
        return True

    @property
    def free_rank_tag(self):
        for t in self.tags:
            if isinstance(t, tuple) and t[0] == "free-of-rank":
                return t[1]
        return None

    def is_zero_to_depth(self, depth):
        return all(self.red_level(n).is_zero() for n in range(depth))

    def __repr__(self):
        return f"ContraTower({self.backend!r}, tags={self.tags})"


def free_contra(backend, rank):
    """The free contramodule on ``rank`` generators: levels (R/I_n)^rank."""
    if backend.kind == "z":
        M = FPModule.free(backend, INF, rank)
        return ContraTower(backend,
                           lambda n: M,
                           lambda n: ModMorphism.identity(M),
                           tags=(("free-of-rank", rank),),
                           rule={"kind": "free-contra", "rank": rank})

    def level_fn(n):
        return FPModule.free(backend, n, rank)

    def transition_fn(n):
        return ModMorphism(level_fn(n + 1), level_fn(n),
                           Matrix.identity(backend, n, rank))

    return ContraTower(backend, level_fn, transition_fn,
                       tags=(("free-of-rank", rank),),
                       rule={"kind": "free-contra", "rank": rank})


def contra_from_module(M):
    """The finite contramodule M, with reduction tower M/(I_n M)."""
    b = M.backend
    if b.kind == "z":
        return ContraTower(b, lambda n: M,
                           lambda n: ModMorphism.identity(M),
                           rule={"kind": "module-contra"})

    def level_fn(n):
        capped = min(n, M.ann_level)
        rels = M.rels_at(capped)
        return FPModule(b, capped, M.gens, rels)

    def transition_fn(n):
        return ModMorphism(level_fn(n + 1), level_fn(n),
                           Matrix.identity(b, min(n, M.ann_level), M.gens))

    return ContraTower(b, level_fn, transition_fn,
                       rule={"kind": "module-contra"})


class ContraMorphism:
    """Levelwise compatible maps between reduction towers."""

    def __init__(self, src, tgt, map_fn):
        self.src = src
        self.tgt = tgt
        self._map = {}
        self._map_fn = map_fn

    def level_map(self, n):
        if n not in self._map:
            self._map[n] = self._map_fn(n)
        return self._map[n]

    @classmethod
    def from_scalar_matrix(cls, src, tgt, mat):
        """Morphism given by one Lambda-matrix acting on reductions."""
        def map_fn(n):
            lvl = tgt.red_level(n)
            m = Matrix(mat.backend, lvl.ann_level, mat.data, mat.rows, mat.cols)
            return ModMorphism(src.red_level(n), lvl, m)
        out = cls(src, tgt, map_fn)
        out.scalar_matrix = mat
        return out

    @classmethod
    def from_top(cls, src, tgt, top_map, top_level):
        """The morphism determined by its top-level component.

        For a free source the lower maps are forced: each level-n map
        is the top map pushed down by the target transitions.
        """
        def map_fn(n):
            if n > top_level:
                raise IndexError(f"morphism materialized to depth {top_level + 1}")
            hop = tgt.red_transition_composite(top_level, n)
            pushed = hop.compose(top_map)
            m = pushed.matrix
            return ModMorphism(src.red_level(n), tgt.red_level(n), m)
        return cls(src, tgt, map_fn)

    @classmethod
    def identity(cls, q):
        return cls(q, q, lambda n: ModMorphism.identity(q.red_level(n)))

    @classmethod
    def zero(cls, src, tgt):
        return cls(src, tgt,
                   lambda n: ModMorphism.zero_map(src.red_level(n),
                                                  tgt.red_level(n)))

    def compose(self, other):
        return ContraMorphism(other.src, self.tgt,
                              lambda n: self.level_map(n).compose(other.level_map(n)))

    def __add__(self, other):
        return ContraMorphism(self.src, self.tgt,
                              lambda n: self.level_map(n) + other.level_map(n))

    def __neg__(self):
        return ContraMorphism(self.src, self.tgt, lambda n: -self.level_map(n))

    def __sub__(self, other):
        return self + (-other)

    def verify_commuting(self, depth):
        for n in range(depth - 1):
            lhs = self.tgt.red_transition(n).compose(self.level_map(n + 1))
            rhs = self.level_map(n).compose(self.src.red_transition(n))
            if not lhs.equals(rhs):
                return False
        return True

    def equals_to_depth(self, other, depth):
        return all(self.level_map(n).equals(other.level_map(n))
                   for n in range(depth))

    def is_zero_to_depth(self, depth):
        return all(self.level_map(n).is_zero_morphism() for n in range(depth))


# ---------------------------------------------------------------------------
# the contratensor product

def contratensor(N, Q):
    """N (contratensor) Q for a finitely presented discrete module N.

    Present N by (R/I_m)^a -> (R/I_m)^b -> N -> 0 and return the
    cokernel of the induced map red^a -> red^b.  For the designated
    rationals the rank rule applies.
    """
    if isinstance(Q, Rationals):
        if N.backend.kind != "z":
            raise ValueError("rationals tensor only over the z backend")
        return QValue(N.free_rank())
    if N.backend != Q.backend:
        raise ValueError("contratensor across backends")
    if N.backend.kind == "z":
        return tensor(N, Q.red_level(0))
    m = int(N.ann_level)
    red = Q.red_level(m)
    return _block_cokernel(N.rels, red)


def _block_cokernel(W, red):
    """Cokernel of the W-indexed block map red^cols -> red^rows."""
    b = red.backend
    rows, cols = W.rows, W.cols
    if rows == 0:
        return FPModule.zero(b)
    tgt, injs, _ = direct_sum(*([red] * rows))
    if cols == 0:
        return tgt
    src, _, projs = direct_sum(*([red] * cols))
    f = ModMorphism.zero_map(src, tgt)
    for i in range(rows):
        for j in range(cols):
            s = W.data[i][j]
            block = injs[i].compose(
                ModMorphism.scalar_mult(red, s)).compose(projs[j])
            f = f + block
    C, _ = cokernel(f)
    return C


def contratensor_module_map(f, Q):
    """The map N (ctns) Q -> N' (ctns) Q induced by f: N -> N'.

    Returns (value_src, value_tgt, morphism).
    """
    if isinstance(Q, Rationals):
        rk_s, rk_t = f.src.free_rank(), f.tgt.free_rank()
        mat = _rational_matrix(f)
        return QValue(rk_s), QValue(rk_t), mat
    src_val = contratensor(f.src, Q)
    tgt_val = contratensor(f.tgt, Q)
    if f.src.backend.kind == "z":
        mor = tensor_map(f, ModMorphism.identity(Q.red_level(0)))
        return src_val, tgt_val, ModMorphism(src_val, tgt_val, mor.matrix)
    m_s, m_t = int(f.src.ann_level), int(f.tgt.ann_level)
    red_t = Q.red_level(m_t)
    gs, gt = f.src.gens, f.tgt.gens
    mat = f.matrix.kronecker(Matrix.identity(Q.backend, m_t, red_t.gens))
    return src_val, tgt_val, ModMorphism(src_val, tgt_val, mat)


def contratensor_contra_map(N, phi):
    """The map N (ctns) Q -> N (ctns) Q' induced by phi: Q -> Q'."""
    src_val = contratensor(N, phi.src)
    tgt_val = contratensor(N, phi.tgt)
    m = int(N.ann_level)
    level = phi.level_map(m)
    gm = N.gens
    mat = Matrix.identity(N.backend, tgt_val.ann_level, gm).kronecker(
        level.matrix)
    return src_val, tgt_val, ModMorphism(src_val, tgt_val, mat)


def _rational_matrix(f):
    """Matrix of f (x) Q on the free parts (z backend), over Fractions."""
    from fractions import Fraction
    from .coefficients import invert_matrix, normal_form

    def free_data(M):
        snf = M.snf()
        diag = snf.diagonal + [0] * (M.gens - len(snf.diagonal))
        idx = [i for i, d in enumerate(diag) if d == 0]
        return snf, idx

    snf_s, idx_s = free_data(f.src)
    snf_t, idx_t = free_data(f.tgt)
    # coordinates: u = U x; free coordinates are the zero-divisor rows
    u_t = snf_t.U
    u_s_inv = invert_matrix(snf_s.U)
    comp = u_t * f.matrix * u_s_inv
    return [[Fraction(comp.data[i][j]) for j in idx_s] for i in idx_t]


# ---------------------------------------------------------------------------
# flatness battery

class FlatCertificate:
    def __init__(self, passed, depth, battery, witness=None):
        self.passed = passed
        self.depth = depth
        self.battery = battery
        self.witness = witness

    def __bool__(self):
        return self.passed

    def as_dict(self):
        return {"verdict": "pass" if self.passed else "fail",
                "depth": self.depth,
                "battery": [list(d) for d in self.battery],
                "witness": self.witness}


def battery_modules(backend, depth, max_summands=3):
    """Coherent test modules: cyclic R/I_n plus small divisor multisets."""
    out = []
    if backend.kind == "z":
        for q in (2, 3, 4, 5, 8, 9)[:max(depth, 1)]:
            out.append(FPModule.from_divisors(backend, [q]))
        out.append(FPModule.from_divisors(backend, [0]))
        out.append(FPModule.from_divisors(backend, [2, 0]))
        return out
    for n in range(1, depth + 1):
        out.append(FPModule.from_divisors(backend, [n], level=n))
    for size in range(2, min(max_summands, depth) + 1):
        for combo in combinations_with_replacement(range(1, depth + 1), size):
            out.append(FPModule.from_divisors(backend, list(combo),
                                              level=max(combo)))
    return out


def _q_rank(mat):
    from fractions import Fraction
    if not mat or not mat[0]:
        return 0
    m = [row[:] for row in mat]
    rows, cols = len(m), len(m[0])
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = Fraction(1, 1) / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
    return r


def _rational_exactness(fK, fN, dim_k, dim_mid):
    """Exactness of 0 -> Q^dim_k -> Q^dim_mid -> ... given the two maps."""
    injective = _q_rank(fK) == dim_k
    exact_mid = (dim_mid - _q_rank(fN)) == _q_rank(fK)
    return injective and exact_mid


def _covers_of(N, depth):
    """Free covers (R/I_n)^gens -> N for every level ann(N) <= n <= depth."""
    b = N.backend
    if b.kind == "z":
        yield free_cover(N)[1]
        return
    for n in range(int(N.ann_level), depth + 1):
        F = FPModule.free(b, n, N.gens)
        yield ModMorphism(F, N, Matrix.identity(b, N.ann_level, N.gens))


def is_flat_to_depth(Q, depth):
    """Battery flatness check, with the failing SES as witness.

    The battery runs over short exact sequences
    0 -> ker -> (R/I_n)^k -> M -> 0 with the divisor exponents of M and
    the cover level n bounded by ``depth``.
    """
    backend = Q.backend
    battery = []
    for N in battery_modules(backend, depth):
        for epi in _covers_of(N, depth):
            battery.append((N.divisors(), epi.src.ann_level))
            K, incl = kernel(epi)
            if isinstance(Q, Rationals):
                _, _, fK = contratensor_module_map(incl, Q)
                _, _, fN = contratensor_module_map(epi, Q)
                if not _rational_exactness(fK, fN, incl.src.free_rank(),
                                           epi.src.free_rank()):
                    return FlatCertificate(False, depth, battery,
                                           witness={"module": list(N.divisors())})
                continue
            _, _, a = contratensor_module_map(incl, Q)
            _, _, b = contratensor_module_map(epi, Q)
            witness = {"module": list(N.divisors()),
                       "cover_level": epi.src.ann_level if epi.src.ann_level is not INF
                       else "inf"}
            if not a.is_injective():
                witness["failure"] = "kernel not embedded"
                return FlatCertificate(False, depth, battery, witness)
            if not b.is_surjective():
                witness["failure"] = "cover not onto"
                return FlatCertificate(False, depth, battery, witness)
            if not is_exact(a, b):
                witness["failure"] = "middle"
                return FlatCertificate(False, depth, battery, witness)
    return FlatCertificate(True, depth, battery)


def nakayama_witness(Q, depth):
    """First coherent N = R/I_n with N (ctns) Q nonzero, or None.

    For nonzero separated Q this must appear once n reaches a level
    with nonzero reduction.
    """
    backend = Q.backend
    for n in range(1, depth + 1):
        if backend.kind == "z":
            N = FPModule.free(backend, INF, 1)
        else:
            N = FPModule.from_divisors(backend, [n], level=n)
        val = contratensor(N, Q)
        nonzero = (not val.is_zero()) if not isinstance(val, QValue) \
            else not val.is_zero()
        if nonzero:
            return N, val
    return None


def enumerate_free_morphisms(rank, Q, depth):
    """All morphisms from the free contramodule of given rank, to depth.

    They correspond bijectively to rank-tuples of elements of the top
    reduction level (the evaluation identity for free contramodules).
    """
    b = Q.backend
    top = depth - 1
    F = free_contra(b, rank)
    lvl = Q.red_level(top)
    elements = lvl.enumerate_elements()
    out = []
    from itertools import product as iproduct
    for combo in iproduct(elements, repeat=rank):
        if rank == 0:
            mat = Matrix.zeros(b, lvl.ann_level, lvl.gens, 0)
        else:
            mat = combo[0]
            for col in combo[1:]:
                mat = mat.hstack(col)
        top_map = ModMorphism(F.red_level(top), lvl, mat)
        out.append(ContraMorphism.from_top(F, Q, top_map, top))
    return out
