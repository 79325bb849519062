"""Duality between projective contramodules and power towers, and the
pro-contratensor product.

A countably generated projective contramodule is stored through its
dual side: a strict tower recognized as (a direct summand of) a finite
power of the ring tower.  The two functors of the anti-equivalence are
Hom of towers into the ring and continuous Hom of contramodules into
the ring; on finite free parts morphisms dualize by transposing their
coefficient matrices.

The pro-contratensor product of a strict tower with a contramodule is
computed levelwise and its limit is classified: eventually-iso towers
materialize a finite value, rational levels report a rank, and towers
with surjective transitions present a contramodule.
"""

from __future__ import annotations

from .coefficients import INF, Matrix, invert_matrix
from .contra import (
    ContraMorphism, ContraTower, QValue, Rationals, contra_from_module,
    contratensor, contratensor_module_map, free_contra,
)
from .discrete import FPModule, ModMorphism
from .procat import (
    STRICT, NotStrict, ProMorphism, Reindex, coreflect_strict, kernel_pro,
    power_tower, ring_tower,
)


class NotInProdOmega(ValueError):
    """Tower not recognized as a summand of a power of the ring tower."""


class PowerStructure:
    """Recognition data: rank, the comparison epi from the literal
    power tower, and the kernel-vanishing certificate."""

    def __init__(self, rank, comparison, certificate, exact):
        self.rank = rank
        self.comparison = comparison
        self.certificate = certificate
        self.exact = exact

    def as_dict(self):
        return {"rank": self.rank, "exact": self.exact,
                "certificate": self.certificate}


def _standard_surjection(module):
    """A surjection (R_n)^k -> module hitting the nontrivial summands.

    k is the number of nontrivial divisors; the matrix columns are the
    standard-generator columns extracted from the normal form of the
    relations.
    """
    b = module.backend
    snf = module.snf()
    uinv = invert_matrix(snf.U)
    diag = snf.diagonal + [b.zero] * (module.gens - len(snf.diagonal))
    idx = []
    for i, d in enumerate(diag):
        if b.kind == "z":
            if d == 0 or abs(d) > 1:
                idx.append(i)
        else:
            if b.valuation(d, module.ann_level) != 0:
                idx.append(i)
    cols = uinv.take_cols(idx)
    src = FPModule.free(b, module.ann_level, len(idx))
    return ModMorphism(src, module, cols)


def recognize_prod_omega(tower, depth):
    """Recognize a strict tower as a finite power of the ring tower.

    Returns a :class:`PowerStructure` or None.  Literal powers are
    matched exactly; a diagonal-normalized power is recognized by
    exhibiting a levelwise surjection from the literal power whose
    Pro-kernel coreflects to zero (certified).
    """
    if tower.strict != STRICT:
        raise NotStrict("recognition requires a certified-strict tower")
    b = tower.backend
    top = depth - 1
    top_module = tower.level(top)
    divs = top_module.divisors()
    if b.kind == "z":
        if any(d != 0 for d in divs):
            return None
        k = len(divs)
    else:
        k = len(divs)
        if any(e == 0 for e in divs):
            return None
    # literal power of the ring tower?
    literal = True
    for n in range(depth):
        lvl = tower.level(n)
        if b.kind == "z":
            expect = (0,) * k
        else:
            expect = tuple([n] * k) if n > 0 else ()
        if lvl.divisors() != expect:
            literal = False
            break
    P = power_tower(ring_tower(b), k)
    u_top = _standard_surjection(top_module)
    if u_top.src.gens != k:
        return None
    r = Reindex((top,) * (top + 1), 1)

    def map_fn(n):
        if n > top:
            raise IndexError(f"comparison materialized to depth {depth}")
        return tower.transition_composite(top, n).compose(u_top)

    u = ProMorphism(P, tower, r, map_fn)
    for n in range(depth):
        if not u.level_map(n).is_surjective():
            return None
    K, _ = kernel_pro(u)
    res = coreflect_strict(K, depth)
    if not res.certified:
        return None
    window = min(depth, res.tower.window)
    if not all(res.tower.level(n).is_zero() for n in range(window)):
        return None
    return PowerStructure(k, u, res.report.as_dict(), literal)


class ProjContra:
    """A countably generated projective contramodule, stored as the
    power/idempotent data of its Pontryagin dual."""

    def __init__(self, backend, rank, idempotent=None, structure=None):
        self.backend = backend
        self.rank = rank
        self.idempotent = idempotent   # optional Lambda-matrix, e*e = e
        self.structure = structure

    def __repr__(self):
        return f"ProjContra({self.backend!r}, rank={self.rank})"

    def to_contra_tower(self):
        """The reduction tower of the contramodule (free when the
        idempotent is trivial)."""
        if self.idempotent is None:
            return free_contra(self.backend, self.rank)
        raise NotImplementedError(
            "nontrivial idempotents are stored but not materialized")

    def dual_tower(self):
        return power_tower(ring_tower(self.backend), self.rank)


def dualize(tower, depth):
    """Hom into the ring: a recognized tower gives a ProjContra."""
    ps = recognize_prod_omega(tower, depth)
    if ps is None:
        raise NotInProdOmega("tower is not a recognized power of the ring tower")
    return ProjContra(tower.backend, ps.rank, structure=ps)


def undualize(pc):
    """Continuous Hom into the ring: back to the power tower."""
    return pc.dual_tower()


def matrix_of_power_morphism(f, depth):
    """Extract the Lambda-matrix of a morphism between power towers.

    The level maps of such a morphism are one matrix reduced at every
    level; the canonical lift of the top materialized level map
    represents it.
    """
    top = depth - 1
    m = f.level_map(top).matrix
    return Matrix(m.backend, INF, m.data, m.rows, m.cols)


def dualize_morphism(f, depth):
    """Transpose: the dual of a morphism of power towers, as the
    coefficient matrix of a morphism of free contramodules (reversed)."""
    return matrix_of_power_morphism(f, depth).transpose()


def undualize_morphism(mat, src_pc, tgt_pc):
    """The morphism of power towers dual to a free-contramodule map.

    ``mat`` is the rank_tgt x rank_src coefficient matrix of a morphism
    src_pc -> tgt_pc of contramodules; the dual acts by the transpose,
    tgt_pc.dual -> src_pc.dual.
    """
    b = mat.backend
    src_tower = tgt_pc.dual_tower()
    tgt_tower = src_pc.dual_tower()
    t = mat.transpose()

    def map_fn(n):
        lvl_t = tgt_tower.level(n)
        return ModMorphism(src_tower.level(n), lvl_t,
                           Matrix(b, lvl_t.ann_level, t.data, t.rows, t.cols))

    return ProMorphism(src_tower, tgt_tower, Reindex.identity(), map_fn)


# ---------------------------------------------------------------------------
# pro-contratensor product

class ProContraValue:
    """Levelwise contratensor values with a classified limit.

    limit_kind is one of ``module`` (tower eventually constant, the
    value is a finite module), ``rationals`` (constant rational rank),
    ``contramodule`` (the level tower itself presents a contramodule),
    or ``unstabilized``.
    """

    def __init__(self, levels, transitions, limit_kind, limit, depth):
        self.levels = levels
        self.transitions = transitions
        self.limit_kind = limit_kind
        self.limit = limit
        self.depth = depth

    def level_divisors(self):
        out = []
        for v in self.levels:
            out.append(list(v.divisors()) if not isinstance(v, QValue)
                       else ["q"] * v.rank)
        return out

    def is_zero(self):
        return all(v.is_zero() if not isinstance(v, QValue) else v.rank == 0
                   for v in self.levels)

    def as_dict(self):
        if self.limit_kind == "module":
            lim = list(self.limit.divisors())
        elif self.limit_kind == "rationals":
            lim = {"rank": self.limit}
        elif self.limit_kind == "contramodule":
            lim = "presented-by-levels"
        else:
            lim = None
        return {"levels": self.level_divisors(), "limit_kind": self.limit_kind,
                "limit": lim, "depth": self.depth}


def pro_contratensor(rN, Q, depth):
    """(rN pro-contratensor Q): levelwise contratensor with limit.

    ``rN`` must be certified strict.  The transitions of the level
    tower are epimorphisms (the contratensor is right exact), so when
    they are eventually isomorphisms the limit materializes.
    """
    if rN.strict != STRICT:
        raise NotStrict("pro-contratensor requires a certified-strict tower")
    levels = [contratensor(rN.level(n), Q) for n in range(depth)]
    transitions = []
    for n in range(depth - 1):
        _, _, t = contratensor_module_map(rN.transition(n), Q)
        transitions.append(t)
    if isinstance(Q, Rationals):
        ranks = [v.rank for v in levels]
        if len(set(ranks[1:])) <= 1 and all(
                _full_rank(t, ranks[n + 1], ranks[n])
                for n, t in list(enumerate(transitions))[1:]):
            rank = ranks[-1] if ranks else 0
            return ProContraValue(levels, transitions, "rationals", rank, depth)
        return ProContraValue(levels, transitions, "unstabilized", None, depth)
    stable_from = None
    for n0 in range(depth - 1):
        if all(transitions[n].is_isomorphism() for n in range(n0, depth - 1)):
            stable_from = n0
            break
    if stable_from is not None:
        return ProContraValue(levels, transitions, "module",
                              levels[depth - 1], depth)
    if all(t.is_surjective() for t in transitions):
        contra = ContraTower(rN.backend,
                             lambda n: levels[min(n, depth - 1)],
                             lambda n: transitions[n] if n < depth - 1
                             else ModMorphism.identity(levels[depth - 1]),
                             rule={"kind": "pro-contratensor"})
        return ProContraValue(levels, transitions, "contramodule", contra, depth)
    return ProContraValue(levels, transitions, "unstabilized", None, depth)


def _full_rank(frac_matrix, dim_src, dim_tgt):
    from protower.contra import _q_rank
    return _q_rank(frac_matrix) == min(dim_src, dim_tgt)


def pro_contratensor_morphism(g, Q, depth):
    """Levelwise maps induced on pro-contratensor values by g: rN -> rM."""
    out = []
    for n in range(depth):
        _, _, t = contratensor_module_map(g.level_map(n), Q)
        out.append(t)
    return out


def hom_via_pro_contratensor(pc, Q, depth):
    """Hom(P, Q) computed as (dual of P) pro-contratensor Q.

    For free P the result must agree with the evaluation identity
    Hom(R[[X]], Q) = Q^X levelwise; the returned flag reports that
    cross-check.
    """
    rP = undualize(pc)
    rP.certify_strict(depth)
    value = pro_contratensor(rP, Q, depth)
    agree = True
    if pc.idempotent is None and not isinstance(Q, Rationals):
        for n in range(1, depth):
            expected = sorted(list(Q.red_level(n).divisors()) * pc.rank)
            got = sorted(value.levels[n].divisors())
            if got != expected:
                agree = False
                break
    return value, agree
