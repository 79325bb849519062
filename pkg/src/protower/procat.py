"""Countably indexed towers: the categories Pro_omega and SPro_omega.

A :class:`Tower` is a lazily materialized inverse system of FPModules
indexed by omega.  A :class:`ProMorphism` is a reindexed levelwise
morphism: a monotone unbounded map r together with maps
src.level(r(n)) -> tgt.level(n) making the evident squares commute.

Every categorical answer here is depth-parametric: it is certified by
the levels actually materialized, and the certification depth travels
with the result.  Over the finite level rings image chains stabilize
and the answers become exact certificates; over the integers a result
may stay "up to depth d", in which case it is flagged rather than
guessed.
"""

from __future__ import annotations

from .coefficients import INF, Matrix
from .discrete import (
    FPModule, ModMorphism, cokernel, columns_in_span, direct_sum,
    factor_through, kernel, lift_through, present_subquotient, is_exact,
)


class NotStrict(ValueError):
    """Operation requires a certified-strict tower."""


def _memo(fn):
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = fn(n)
        return cache[n]
    get.cache = cache
    return get


# ---------------------------------------------------------------------------

class Reindex:
    """Monotone nondecreasing unbounded map omega -> omega.

    Stored as a finite prefix plus an eventual affine rule with step
    >= 1, which is closed under the compositions and pointwise maxima
    arising from products and alignment.
    """

    __slots__ = ("prefix", "step")

    def __init__(self, prefix=(0,), step=1):
        prefix = tuple(int(v) for v in prefix)
        if not prefix:
            prefix = (0,)
        if any(b < a for a, b in zip(prefix, prefix[1:])):
            raise ValueError("reindex prefix must be nondecreasing")
        if step < 1:
            raise ValueError("reindex tail must be unbounded (step >= 1)")
        self.prefix = prefix
        self.step = int(step)

    def __call__(self, n):
        k = len(self.prefix)
        if n < k:
            return self.prefix[n]
        return self.prefix[-1] + self.step * (n - k + 1)

    def __repr__(self):
        return f"Reindex({self.prefix}, step={self.step})"

    def __eq__(self, other):
        if not isinstance(other, Reindex):
            return NotImplemented
        probe = max(len(self.prefix), len(other.prefix)) + 2
        return all(self(n) == other(n) for n in range(probe)) \
            and self.step == other.step

    @classmethod
    def identity(cls):
        return cls((0,), 1)

    @classmethod
    def shift(cls, s):
        return cls((s,), 1)

    @classmethod
    def clamp_minus(cls, e):
        """n -> max(n - e, 0)."""
        return cls((0,) * (e + 1), 1)

    def compose(self, other):
        """self after other: n -> self(other(n))."""
        K = len(self.prefix) + len(other.prefix) + 2
        while other(K) < len(self.prefix):
            K += 1
        prefix = tuple(self(other(n)) for n in range(K + 1))
        return Reindex(prefix, self.step * other.step)

    def pointwise_max(self, other):
        K = max(len(self.prefix), len(other.prefix))
        a, b = self, other
        step = max(a.step, b.step)
        n = K
        guard = 0
        while True:
            dominant = a if a(n) >= b(n) else b
            if dominant.step == step and all(
                    dominant(m) >= (b if dominant is a else a)(m)
                    for m in (n, n + 1)):
                # once the faster tail is ahead it stays ahead
                if dominant(n) >= (b if dominant is a else a)(n):
                    break
            n += 1
            guard += 1
            if guard > 10000:
                raise RuntimeError("reindex max failed to stabilize")
        prefix = tuple(max(a(m), b(m)) for m in range(n + 1))
        return Reindex(prefix, step)


# ---------------------------------------------------------------------------

STRICT = "certified-strict"
NONSTRICT = "certified-nonstrict"
UNKNOWN = "unknown"


class Tower:
    """Countably indexed inverse system of FPModules."""

    def __init__(self, backend, level_fn, transition_fn, strict=UNKNOWN,
                 rule=None):
        self.backend = backend
        self._level = _memo(level_fn)
        self._transition = _memo(transition_fn)
        self.strict = strict
        self.rule = rule or {"kind": "opaque"}

    def level(self, n):
        m = self._level(n)
        if m.backend != self.backend:
            raise ValueError("tower level over the wrong backend")
        return m

    def transition(self, n):
        t = self._transition(n)
        if t.src.gens != self.level(n + 1).gens or t.tgt.gens != self.level(n).gens:
            raise ValueError("transition endpoints do not match levels")
        return t

    @property
    def depth_explored(self):
        return max(self._level.cache, default=-1) + 1

    def transition_composite(self, a, b):
        """level(a) -> level(b) for a >= b (identity when equal)."""
        if a < b:
            raise ValueError("towers only descend")
        if a == b:
            return ModMorphism.identity(self.level(a))
        out = self.transition(b)
        for m in range(b + 1, a):
            out = out.compose(self.transition(m))
        return out

    def certify_strict(self, depth):
        """Check surjectivity of all transitions below ``depth``."""
        for n in range(depth):
            if not self.transition(n).is_surjective():
                self.strict = NONSTRICT
                return False
        if self.strict == UNKNOWN:
            self.strict = STRICT
        return self.strict == STRICT

    def is_certified_strict(self):
        return self.strict == STRICT

    def detect_self_similar(self, depth):
        """Least n0 with literally repeating (level, transition) data
        on [n0, depth), or None."""
        if depth < 2:
            return None
        for n0 in range(depth - 1):
            base = self.level(n0)
            tmat = self.transition(n0).matrix
            ok = True
            for n in range(n0 + 1, depth - 1):
                lv = self.level(n)
                if (lv.gens != base.gens or lv.ann_level != base.ann_level
                        or lv.rels.data != base.rels.data
                        or self.transition(n).matrix.data != tmat.data):
                    ok = False
                    break
            if ok and base.gens == self.level(depth - 1).gens \
                    and self.level(depth - 1).rels.data == base.rels.data:
                return n0
        return None


class ExplicitTower(Tower):
    """Tower materialized on a finite window [0, depth)."""

    def __init__(self, backend, levels, transitions, strict=UNKNOWN, rule=None):
        self._levels_list = list(levels)
        self._transitions_list = list(transitions)

        def level_fn(n):
            if n >= len(self._levels_list):
                raise IndexError(
                    f"tower materialized to depth {len(self._levels_list)}")
            return self._levels_list[n]

        def transition_fn(n):
            if n >= len(self._transitions_list):
                raise IndexError(
                    f"tower transitions materialized to depth {len(self._transitions_list)}")
            return self._transitions_list[n]

        super().__init__(backend, level_fn, transition_fn, strict=strict, rule=rule)

    @property
    def window(self):
        return len(self._levels_list)


# ---------------------------------------------------------------------------
# basic constructors

def constant_tower(module):
    t = Tower(module.backend,
              lambda n: module,
              lambda n: ModMorphism.identity(module),
              strict=STRICT,
              rule={"kind": "constant"})
    return t


def ring_tower(backend):
    """The tower of level rings R/I_n (the topological ring itself).

    Level 0 is R/I_0 = 0; over the z backend the chain is trivial and
    the tower is the constant tower on Z.
    """
    if backend.kind == "z":
        t = constant_tower(FPModule.free(backend, INF, 1))
        t.rule = {"kind": "ring-tower"}
        return t

    def level_fn(n):
        return FPModule.free(backend, n, 1)

    def transition_fn(n):
        return ModMorphism(level_fn(n + 1), level_fn(n),
                           Matrix.identity(backend, n, 1))

    return Tower(backend, level_fn, transition_fn, strict=STRICT,
                 rule={"kind": "ring-tower"})


def quotient_chain_tower(backend, scalar):
    """The tower (Lambda / scalar^n) over a level-INF backend.

    Over z with scalar = p this is the tower Z/p^n presenting the
    p-adic integers as a topological Z-module.
    """
    def level_fn(n):
        if backend.kind == "z":
            return FPModule.from_divisors(backend, [scalar ** n])
        raise ValueError("quotient chain towers are a z-backend construction")

    def transition_fn(n):
        return ModMorphism(level_fn(n + 1), level_fn(n),
                           Matrix.identity(backend, INF, 1))

    return Tower(backend, level_fn, transition_fn, strict=STRICT,
                 rule={"kind": "quotient-chain", "scalar": scalar})


def power_tower(base, k):
    """Literal k-th power: level n is base.level(n)^k, transitions
    diagonal.  Pro-isomorphic to the diagonal product of k copies."""
    sums = _memo(lambda n: direct_sum(*([base.level(n)] * k)) if k else None)

    def level_fn(n):
        if k == 0:
            return FPModule.zero(base.backend)
        return sums(n)[0]

    def transition_fn(n):
        if k == 0:
            return ModMorphism.identity(FPModule.zero(base.backend))
        src, _, projs_hi = sums(n + 1)
        tgt, injs_lo, _ = sums(n)
        out = ModMorphism.zero_map(src, tgt)
        t = base.transition(n)
        for i in range(k):
            out = out + injs_lo[i].compose(t).compose(projs_hi[i])
        return out

    return Tower(base.backend, level_fn, transition_fn, strict=base.strict,
                 rule={"kind": "power-of", "base": base.rule, "power": k})


# ---------------------------------------------------------------------------

class ProMorphism:
    """A morphism of towers: reindex + commuting levelwise maps."""

    def __init__(self, src, tgt, reindex, map_fn):
        self.src = src
        self.tgt = tgt
        self.reindex = reindex
        self._map = _memo(map_fn)

    def level_map(self, n):
        f = self._map(n)
        expected_src = self.src.level(self.reindex(n))
        if f.src.gens != expected_src.gens or f.tgt.gens != self.tgt.level(n).gens:
            raise ValueError("level map endpoints do not match the reindex")
        return f

    @classmethod
    def identity(cls, tower):
        return cls(tower, tower, Reindex.identity(),
                   lambda n: ModMorphism.identity(tower.level(n)))

    @classmethod
    def zero(cls, src, tgt):
        return cls(src, tgt, Reindex.identity(),
                   lambda n: ModMorphism.zero_map(src.level(n), tgt.level(n)))

    def verify_commuting(self, depth):
        r = self.reindex
        for n in range(depth - 1):
            down_then = self.tgt.transition(n).compose(self.level_map(n + 1))
            then_down = self.level_map(n).compose(
                self.src.transition_composite(r(n + 1), r(n)))
            if not down_then.equals(then_down):
                return False
        return True

    def compose(self, other):
        """self o other."""
        rez = other.reindex.compose(self.reindex)

        def map_fn(n):
            return self.level_map(n).compose(other.level_map(self.reindex(n)))
        return ProMorphism(other.src, self.tgt, rez, map_fn)

    def _aligned_map(self, n, r_common):
        raw = self.level_map(n)
        hop = self.src.transition_composite(r_common(n), self.reindex(n))
        return raw.compose(hop)

    def __add__(self, other):
        r = self.reindex.pointwise_max(other.reindex)

        def map_fn(n):
            return self._aligned_map(n, r) + other._aligned_map(n, r)
        return ProMorphism(self.src, self.tgt, r, map_fn)

    def __neg__(self):
        return ProMorphism(self.src, self.tgt, self.reindex,
                           lambda n: -self.level_map(n))

    def __sub__(self, other):
        return self + (-other)

    def equals(self, other, depth):
        """Levelwise equality after alignment.

        Exact for certified-strict sources (representing maps are then
        unique); otherwise this is equality-to-depth.
        """
        r = self.reindex.pointwise_max(other.reindex)
        for n in range(depth):
            if not self._aligned_map(n, r).equals(other._aligned_map(n, r)):
                return False
        return True

    def is_zero(self, depth):
        return all(self.level_map(n).is_zero_morphism() for n in range(depth))


def from_level_maps(src, tgt, maps, reindex=None):
    reindex = reindex or Reindex.identity()
    return ProMorphism(src, tgt, reindex, lambda n: maps(n) if callable(maps)
                       else maps[n])


def constant_morphism(f):
    """Embed a ModMorphism as a morphism of constant towers."""
    return ProMorphism(constant_tower(f.src), constant_tower(f.tgt),
                       Reindex.identity(), lambda n: f)


# ---------------------------------------------------------------------------
# kernels and cokernels in Pro_omega (levelwise after alignment)

def kernel_pro(f):
    """(tower of levelwise kernels, inclusion ProMorphism)."""
    r = f.reindex
    data = _memo(lambda n: kernel(f.level_map(n)))

    def level_fn(n):
        return data(n)[0]

    def transition_fn(n):
        incl_hi = data(n + 1)[1]
        incl_lo = data(n)[1]
        hop = f.src.transition_composite(r(n + 1), r(n))
        t = lift_through(incl_lo, hop.compose(incl_hi))
        if t is None:
            raise RuntimeError("kernel transition failed to factor")
        return t

    tower = Tower(f.src.backend, level_fn, transition_fn, strict=UNKNOWN,
                  rule={"kind": "kernel-pro"})
    incl = ProMorphism(tower, f.src, r, lambda n: data(n)[1])
    return tower, incl


def cokernel_pro(f):
    """(tower of levelwise cokernels, projection ProMorphism)."""
    data = _memo(lambda n: cokernel(f.level_map(n)))

    def level_fn(n):
        return data(n)[0]

    def transition_fn(n):
        t = f.tgt.transition(n)
        return ModMorphism(data(n + 1)[0], data(n)[0], t.matrix)

    strict = STRICT if f.tgt.strict == STRICT else UNKNOWN
    tower = Tower(f.tgt.backend, level_fn, transition_fn, strict=strict,
                  rule={"kind": "cokernel-pro"})
    proj = ProMorphism(f.tgt, tower, Reindex.identity(), lambda n: data(n)[1])
    return tower, proj


# ---------------------------------------------------------------------------
# strictification and the coreflector

class StabilizationReport:
    """Per-level certification of the image-chain computation."""

    def __init__(self):
        self.levels = {}
        self.method = {}

    def record(self, n, m_used, certified, method):
        self.levels[n] = (m_used, certified)
        self.method[n] = method

    def all_certified(self):
        return all(c for (_, c) in self.levels.values())

    def as_dict(self):
        return {"certified": self.all_certified(),
                "levels": {n: {"stabilized_at": m, "certified": c,
                               "method": self.method[n]}
                           for n, (m, c) in sorted(self.levels.items())}}


def _images_equal(comp_a, comp_b, ambient):
    """im(comp_a) == im(comp_b) inside ambient (both are descending)."""
    A = comp_a.matrix
    B = comp_b.matrix
    rels = ambient.rels
    span_b = B.hstack(rels) if rels.cols else B
    if A.cols and not columns_in_span(A, span_b):
        return False
    return True


def _self_similar_tail_analysis(tower, n0, depth):
    """Eventual image of the repeating transition phi on level(n0).

    Conclusive cases: the chain im(phi^k) stabilizes (one equality step
    suffices for a self-similar chain), the level module is finite, or
    every entry of phi is divisible by the uniformizer / a common prime
    (then the intersection is 0).
    """
    M = tower.level(n0)
    b = M.backend
    phi = tower.transition(n0)
    # divisibility rule: phi(M) inside q*M forces the intersection to 0
    if M.gens:
        if b.kind == "z":
            entries = [v for row in phi.matrix.data for v in row]
            if all(v == 0 for v in entries):
                return Matrix.zeros(b, M.ann_level, M.gens, 0), True, "zero-transition"
            g = 0
            for v in entries:
                g = _gcd(g, v)
            if g not in (1, -1):
                return Matrix.zeros(b, M.ann_level, M.gens, 0), True, \
                    "uniform-divisibility"
        else:
            if all(b.valuation(v, M.ann_level) >= 1
                   for row in phi.matrix.data for v in row):
                return Matrix.zeros(b, M.ann_level, M.gens, 0), True, \
                    "uniform-divisibility"
    # iterate the chain im(phi^k); one consecutive equality is conclusive
    # for a self-similar chain since phi(S) = S propagates
    bound = depth + 2
    if M.size() is not INF:
        from math import log2
        bound = max(bound, int(log2(max(M.size(), 2))) + 2)
    power = ModMorphism.identity(M)
    prev = power
    for k in range(1, bound + 1):
        power = phi.compose(power)
        if _images_equal(prev, power, M):
            return prev.matrix, True, f"self-similar-stabilized@{k - 1}"
        prev = power
    return prev.matrix, False, "unstabilized"


def _gcd(a, b):
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def eventual_image(tower, n, depth, floor_m=0, allow_tail=True):
    """Generators of the stabilized image of (level m -> level n).

    Returns (matrix, m_used, certified, method).  The search budget is
    ``depth`` steps beyond max(n, floor_m); when the tower has a
    literally repeating tail the self-similar analysis applies beyond
    the window (coreflector only).
    """
    start = max(n, floor_m)
    tail = tower.detect_self_similar(depth) if allow_tail else None
    for m in range(start, start + depth + 1):
        cur = tower.transition_composite(m, n)
        nxt = tower.transition_composite(m + 1, n)
        if _images_equal(cur, nxt, tower.level(n)):
            return cur.matrix, m, True, "stabilized"
    if tail is not None and tail <= n:
        G, certified, method = _self_similar_tail_analysis(tower, n, depth)
        if certified:
            return G, start + depth, True, method
    cur = tower.transition_composite(start + depth, n)
    return cur.matrix, start + depth, False, "unstabilized"


class StrictifyResult:
    def __init__(self, tower, report, to_original, from_original=None):
        self.tower = tower
        self.report = report
        self.to_original = to_original
        self.from_original = from_original

    @property
    def certified(self):
        return self.report.all_certified()


def _image_tower_pass(tower, depth, allow_tail):
    if tower.strict == STRICT:
        ident = ProMorphism.identity(tower)
        report = StabilizationReport()
        for n in range(depth):
            report.record(n, n, True, "already-strict")
        return StrictifyResult(tower, report, ident, ident)

    report = StabilizationReport()
    levels, incls, stab_at = [], [], []
    floor = 0
    for n in range(depth):
        G, m_used, certified, method = eventual_image(
            tower, n, depth, floor_m=floor, allow_tail=allow_tail)
        report.record(n, m_used, certified, method)
        module, incl = present_subquotient(G, tower.level(n))
        levels.append(module)
        incls.append(incl)
        stab_at.append(max(m_used, n))
        floor = max(floor, m_used)
    transitions = []
    for n in range(depth - 1):
        hop = tower.transition(n).compose(incls[n + 1])
        t = lift_through(incls[n], hop)
        if t is None:
            raise RuntimeError("strictified transition failed to factor")
        transitions.append(t)
    out = ExplicitTower(tower.backend, levels, transitions,
                        strict=UNKNOWN, rule={"kind": "strictify",
                                              "of": tower.rule})
    if report.all_certified():
        out.certify_strict(depth - 1)
    to_original = ProMorphism(out, tower, Reindex.identity(),
                              lambda n: incls[n])
    # the reverse comparison uses the stabilization indices as reindex;
    # it is meaningful only when the image chains genuinely stabilized
    prefix = tuple(stab_at) if stab_at else (0,)
    r = Reindex(prefix, 1)

    def from_map(n):
        comp = tower.transition_composite(r(n), n)
        coeff = factor_through(incls[n].matrix, tower.level(n).rels, comp.matrix)
        if coeff is None:
            raise RuntimeError("comparison map failed to factor")
        return ModMorphism(tower.level(r(n)), levels[n], coeff)

    from_original = ProMorphism(tower, out, r, from_map)
    return StrictifyResult(out, report, to_original, from_original)


def strictify(tower, depth):
    """Replace a tower by its eventual-image subtower.

    When every materialized image chain stabilizes within the window
    (always, over the finite level rings) the result is certified-strict
    and Pro-isomorphic to the input via the returned comparison
    morphisms.  Otherwise the result is best-effort and flagged
    unstabilized; no tail extrapolation is used here, because the
    contract is isomorphism to the input in Pro_omega.
    """
    return _image_tower_pass(tower, depth, allow_tail=False)


def coreflect_strict(tower, depth):
    """Maximal strict subtower (the coreflection onto SPro_omega).

    Same image-chain machinery as :func:`strictify`, but the contract
    is the coreflection, so the literally-repeating-tail analysis may
    certify the intersection (for example the chain 2^m Z collapses to
    the zero coreflection).  Certified-strict inputs come back
    unchanged.
    """
    return _image_tower_pass(tower, depth, allow_tail=True)


class KernelStrictResult:
    def __init__(self, tower, inclusion, report):
        self.tower = tower
        self.inclusion = inclusion
        self.report = report

    @property
    def certified(self):
        return self.report.all_certified()

    def is_zero(self, depth):
        return all(self.tower.level(n).is_zero()
                   for n in range(min(depth, _explicit_window(self.tower))))


def _explicit_window(tower):
    return tower.window if isinstance(tower, ExplicitTower) else tower.depth_explored


def kernel_strict(f, depth):
    """Kernel in SPro_omega: coreflection of the Pro_omega kernel."""
    if f.src.strict != STRICT or f.tgt.strict != STRICT:
        raise NotStrict("kernel_strict requires certified-strict endpoints")
    ker_tower, incl = kernel_pro(f)
    res = coreflect_strict(ker_tower, depth)
    inclusion = incl.compose(res.to_original)
    return KernelStrictResult(res.tower, inclusion, res.report)


def partial_sum_tower(tower):
    """D_n = direct sum of levels 0..n with drop-last projections.

    The transitions are split epimorphisms, so the result is strict.
    """
    sums = _memo(lambda n: direct_sum(*[tower.level(m) for m in range(n + 1)]))

    def level_fn(n):
        return sums(n)[0]

    def transition_fn(n):
        src, _, projs = sums(n + 1)
        tgt, injs, _ = sums(n)
        out = ModMorphism.zero_map(src, tgt)
        for m in range(n + 1):
            out = out + injs[m].compose(projs[m])
        return out

    return Tower(tower.backend, level_fn, transition_fn, strict=STRICT,
                 rule={"kind": "partial-sums", "of": tower.rule})


def kernel_strict_via_embedding(f, depth):
    """Second computation path for the strict kernel.

    Embed the Pro_omega kernel B into the partial-sum tower D by the
    transition components (a levelwise split mono), take the cokernel E
    (strict), and coreflect the levelwise kernel of D -> E.
    """
    B, incl_B = kernel_pro(f)
    D = partial_sum_tower(B)
    sums = _memo(lambda n: direct_sum(*[B.level(m) for m in range(n + 1)]))

    def iota_map(n):
        tgt, injs, _ = sums(n)
        out = ModMorphism.zero_map(B.level(n), tgt)
        for m in range(n + 1):
            out = out + injs[m].compose(B.transition_composite(n, m))
        return out

    iota = ProMorphism(B, D, Reindex.identity(), iota_map)
    E, proj = cokernel_pro(iota)
    K2, incl2 = kernel_pro(proj)
    res = coreflect_strict(K2, depth)
    # canonical comparison back into B: project D to its top block
    def retraction(n):
        total, _, projs = direct_sum(*[B.level(m) for m in range(n + 1)])
        return projs[n]

    def comparison(n):
        into_D = incl2.level_map(n).compose(res.to_original.level_map(n))
        return retraction(n).compose(into_D)

    to_B = ProMorphism(res.tower, B, Reindex.identity(), comparison)
    return KernelStrictResult(res.tower, incl_B.compose(to_B), res.report)


# ---------------------------------------------------------------------------
# products by the diagonal construction

class ProductTower(Tower):
    """product(T_0, T_1, ...): level k = direct sum over n+m=k of
    T_n.level(m), transitions = products of transitions precomposed
    with the subproduct projections."""

    def __init__(self, factors, count=None):
        if callable(factors):
            self._factor = _memo(factors)
            self.count = count            # None = countable family
        else:
            factors = list(factors)
            self._factor = _memo(lambda i: factors[i])
            self.count = len(factors)
        if self.count == 0:
            backend = None
            raise ValueError("empty product: use a zero tower explicitly")
        backend = self._factor(0).backend
        self._sum = _memo(self._build_sum)
        strict = STRICT
        if self.count is not None:
            if any(self._factor(i).strict != STRICT for i in range(self.count)):
                strict = UNKNOWN
        super().__init__(backend,
                         lambda k: self._sum(k)[0],
                         self._build_transition,
                         strict=strict,
                         rule={"kind": "product-of", "count": self.count})

    def n_blocks(self, k):
        if self.count is None:
            return k + 1
        return min(k + 1, self.count)

    def factor(self, i):
        return self._factor(i)

    def _build_sum(self, k):
        blocks = [self._factor(n).level(k - n) for n in range(self.n_blocks(k))]
        return direct_sum(*blocks)

    def _build_transition(self, k):
        src, _, projs = self._sum(k + 1)
        tgt, injs, _ = self._sum(k)
        out = ModMorphism.zero_map(src, tgt)
        for n in range(self.n_blocks(k)):
            t = self._factor(n).transition(k - n)
            out = out + injs[n].compose(t).compose(projs[n])
        return out

    def projection(self, i):
        """The projection onto the i-th factor."""
        def map_fn(n):
            _, _, projs = self._sum(n + i)
            return projs[i]
        return ProMorphism(self, self._factor(i), Reindex.shift(i), map_fn)

    def tuple_into(self, src, components):
        """The induced morphism src -> product from morphisms to the
        factors (finite list covering every factor)."""
        if self.count is None or len(components) != self.count:
            raise ValueError("need one component per factor")
        r = None
        for i, f in enumerate(components):
            ri = f.reindex.compose(Reindex.clamp_minus(i))
            r = ri if r is None else r.pointwise_max(ri)

        def map_fn(k):
            tgt, injs, _ = self._sum(k)
            out = ModMorphism.zero_map(src.level(r(k)), tgt)
            for i in range(self.n_blocks(k)):
                f = components[i]
                fm = f.level_map(k - i)
                hop = src.transition_composite(r(k), f.reindex(k - i))
                out = out + injs[i].compose(fm).compose(hop)
            return out

        return ProMorphism(src, self, r, map_fn)

    def blockwise_from(self, src_product, components):
        """The product of morphisms along the shared diagonal grid.

        ``components[i]`` must be a morphism src_product.factor(i) ->
        self.factor(i) with identity reindex; the result acts block by
        block at every level, which is the termwise representation used
        for products of admissible short exact sequences.
        """
        def map_fn(k):
            tgt, injs, _ = self._sum(k)
            src, _, projs = src_product._sum(k)
            out = ModMorphism.zero_map(src, tgt)
            for i in range(self.n_blocks(k)):
                out = out + injs[i].compose(
                    components[i].level_map(k - i)).compose(projs[i])
            return out

        return ProMorphism(src_product, self, Reindex.identity(), map_fn)

    def subproduct(self, m):
        """(subproduct on the first m factors, section, projection)."""
        if m == 0:
            zero = constant_tower(FPModule.zero(self.backend))
            sec = ProMorphism.zero(zero, self)
            proj = ProMorphism.zero(self, zero)
            return zero, sec, proj
        sub = ProductTower([self._factor(i) for i in range(m)])

        def section_map(k):
            tgt, injs, _ = self._sum(k)
            src_sum, _, projs = sub._sum(k)
            out = ModMorphism.zero_map(src_sum, tgt)
            for n in range(sub.n_blocks(k)):
                out = out + injs[n].compose(projs[n])
            return out

        def proj_map(k):
            src_sum, _, projs = self._sum(k)
            tgt, injs, _ = sub._sum(k)
            out = ModMorphism.zero_map(src_sum, tgt)
            for n in range(sub.n_blocks(k)):
                out = out + injs[n].compose(projs[n])
            return out

        section = ProMorphism(sub, self, Reindex.identity(), section_map)
        projection = ProMorphism(self, sub, Reindex.identity(), proj_map)
        return sub, section, projection


def product(factors, count=None):
    return ProductTower(factors, count=count)


def factor_through_finite_subproduct(f, depth, max_factors=None):
    """Least m such that f: product -> constant factors through the
    projection to the first m factors; (m, factored morphism)."""
    P = f.src
    if not isinstance(P, ProductTower):
        raise TypeError("source must be a product tower")
    limit = P.count if P.count is not None else (max_factors or depth)
    for m in range(limit + 1):
        sub, section, projection = P.subproduct(m)
        candidate = f.compose(section)
        if candidate.compose(projection).equals(f, depth):
            return m, candidate
    return None, None


# ---------------------------------------------------------------------------
# admissible exactness, telescopes, views

def is_admissible_ses(f, g, depth):
    """Termwise SES test after alignment, to the given depth."""
    for t in (f.src, f.tgt, g.tgt):
        if t.strict != STRICT:
            raise NotStrict("admissible SES test requires strict towers")
    for n in range(depth):
        bn = g.reindex(n)
        G = g.level_map(n)
        F = f.level_map(bn)
        if not G.compose(F).is_zero_morphism():
            return False
        if not F.is_injective():
            return False
        if not G.is_surjective():
            return False
        if not is_exact(F, G):
            return False
    return True


class TelescopeSES:
    """0 -> T -> P --(id - shift)--> P -> 0 with P the product of the
    constant towers on the levels of T."""

    def __init__(self, tower, depth):
        self.tower = tower
        self.depth = depth
        P = product(lambda n: constant_tower(tower.level(n)), count=None)
        self.middle = P

        def iota_map(k):
            tgt, injs, _ = P._sum(k)
            out = ModMorphism.zero_map(tower.level(k), tgt)
            for m in range(k + 1):
                out = out + injs[m].compose(tower.transition_composite(k, m))
            return out

        self.mono = ProMorphism(tower, P, Reindex.identity(), iota_map)

        def shift_map(k):
            src, _, projs = P._sum(k + 1)
            tgt, injs, _ = P._sum(k)
            out = ModMorphism.zero_map(src, tgt)
            for m in range(k + 1):
                term = projs[m] - tower.transition(m).compose(projs[m + 1])
                out = out + injs[m].compose(term)
            return out

        self.epi = ProMorphism(P, P, Reindex.shift(1), shift_map)

    def verify(self):
        return is_admissible_ses(self.mono, self.epi, self.depth)


def telescope_ses(tower, depth):
    if tower.strict != STRICT:
        raise NotStrict("telescope requires a certified-strict tower")
    return TelescopeSES(tower, depth)


class TopologicalModuleView:
    """A strict tower viewed as a complete separated right linear
    topological module: the open-submodule chain is the chain of
    kernels of the projections from the (depth-truncated) limit."""

    def __init__(self, tower, depth):
        if tower.strict != STRICT:
            raise NotStrict("only strict towers present topological modules")
        self.tower = tower
        self.depth = depth

    def open_submodule(self, n):
        """Kernel of level(depth-1) -> level(n), the n-th open piece
        seen at the materialization depth."""
        top = self.depth - 1
        comp = self.tower.transition_composite(top, n)
        K, incl = kernel(comp)
        return K, incl

    def discrete_quotient(self, n):
        return self.tower.level(n)


def limit_module(tower, depth):
    return TopologicalModuleView(tower, depth)


# ---------------------------------------------------------------------------

def projective_cover_cohpro(N):
    """(P, admissible epi P -> constant_tower(N)) with P a finite power
    of the ring tower."""
    b = N.backend
    k = N.gens
    P = power_tower(ring_tower(b), k)
    C = constant_tower(N)
    if b.kind == "z":
        def map_fn(n):
            return ModMorphism(P.level(n), N,
                               Matrix.identity(b, INF, k))
        return P, ProMorphism(P, C, Reindex.identity(), map_fn)
    m = int(N.ann_level)

    def map_fn(n):
        src = P.level(n + m)
        return ModMorphism(src, N, Matrix.identity(b, N.ann_level, k))

    return P, ProMorphism(P, C, Reindex.shift(m), map_fn)


# ---------------------------------------------------------------------------
# sampling morphisms between towers (deterministic, for property tests)

def random_tower_morphism(rng, src, tgt, depth):
    """A random morphism generated by a random Hom element at the top
    explored level, propagated downward by the target transitions."""
    from .discrete import HomSpace
    top = depth - 1
    hom = HomSpace(src.level(top), tgt.level(top))
    if hom.basis:
        coeffs = Matrix(src.backend, tgt.level(top).ann_level,
                        [[_random_scalar(rng, src.backend)] for _ in hom.basis],
                        len(hom.basis), 1)
        top_map = hom.to_morphism(coeffs)
    else:
        top_map = ModMorphism.zero_map(src.level(top), tgt.level(top))
    r = Reindex((top,) * (top + 1), 1)

    def map_fn(n):
        if n > top:
            raise IndexError(f"sampled morphism materialized to depth {depth}")
        return tgt.transition_composite(top, n).compose(top_map)

    return ProMorphism(src, tgt, r, map_fn)


def _random_scalar(rng, backend):
    if backend.kind == "pseries":
        return (rng.randint(0, backend.prime - 1), rng.randint(0, backend.prime - 1))
    return rng.randint(0, 7)
