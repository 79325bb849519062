"""Contramodules: free objects, contratensor, flatness, Nakayama."""

import random

import pytest

from protower.coefficients import INF, Backend, Matrix
from protower.discrete import FPModule, ModMorphism, random_module
from protower.contra import (
    ContraMorphism, ContraTower, QValue, Rationals, contra_from_module,
    contratensor, contratensor_contra_map, contratensor_module_map,
    enumerate_free_morphisms, free_contra, is_flat_to_depth, nakayama_witness,
)

ZB = Backend("z")
P2 = Backend("padic", 2)
P3 = Backend("padic", 3)
F2X = Backend("pseries", 2)


class TestFreeContra:
    def test_singleton_is_ring_tower(self):
        F = free_contra(P2, 1)
        assert F.red_level(3).divisors() == (3,)
        assert F.verify(4)

    def test_empty_set_is_zero(self):
        F = free_contra(P2, 0)
        assert F.is_zero_to_depth(4)

    def test_rank_two_level_two(self):
        F = free_contra(P2, 2)
        assert F.red_level(2).divisors() == (2, 2)
        assert F.red_level(2).size() == 16

    def test_annihilation_invariant(self):
        F = free_contra(F2X, 2)
        for n in range(1, 4):
            assert F.red_level(n).ann_level == n


class TestContratensor:
    def test_cyclic_against_ring_tower(self):
        # (R/I_n) (ctns) R[[*]] = R/I_n
        F = free_contra(P2, 1)
        for n in (1, 2, 3):
            N = FPModule.from_divisors(P2, [n], level=n)
            assert contratensor(N, F).divisors() == (n,)

    def test_zero_module(self):
        F = free_contra(P2, 2)
        assert contratensor(FPModule.zero(P2), F).is_zero()

    def test_rationals_kill_torsion(self):
        Q = Rationals(ZB)
        N = FPModule.from_divisors(ZB, [8])
        assert contratensor(N, Q) == QValue(0)

    def test_rationals_see_free_rank(self):
        Q = Rationals(ZB)
        N = FPModule.from_divisors(ZB, [0, 0, 4])
        assert contratensor(N, Q) == QValue(2)

    def test_free_gives_power(self):
        # N (ctns) R[[X]] = N^X
        for rank in (1, 2, 3):
            F = free_contra(P2, rank)
            N = FPModule.from_divisors(P2, [1, 2], level=2)
            expected = tuple(sorted([1, 2] * rank))
            assert contratensor(N, F).divisors() == expected

    def test_reduction_identity_exact(self):
        # (R/I_n) (ctns) Q = Q/(I_n Q) exactly, for a non-free Q
        M = FPModule.from_divisors(P2, [1, 3], level=3)
        Q = contra_from_module(M)
        for n in range(1, 4):
            N = FPModule.from_divisors(P2, [n], level=n)
            assert contratensor(N, Q).divisors() == Q.red_level(n).divisors()

    def test_right_exactness_random(self):
        rng = random.Random(0)
        from protower.discrete import cokernel, random_morphism, is_exact
        for _ in range(6):
            A = random_module(rng, P2, level=3, max_gens=2)
            B = random_module(rng, P2, level=3, max_gens=2)
            f = random_morphism(rng, A, B)
            C, proj = cokernel(f)
            for Q in (free_contra(P2, 2),
                      contra_from_module(FPModule.from_divisors(P2, [2], level=3))):
                _, _, tf = contratensor_module_map(f, Q)
                _, _, tp = contratensor_module_map(proj, Q)
                assert tp.is_surjective()
                assert is_exact(tf, tp)


class TestFlatness:
    def test_ring_tower_flat(self):
        cert = is_flat_to_depth(free_contra(P2, 1), 3)
        assert cert.passed

    def test_free_rank_two_flat(self):
        assert is_flat_to_depth(free_contra(P3, 2), 3).passed

    def test_torsion_contramodule_not_flat(self):
        Q = contra_from_module(FPModule.from_divisors(P2, [1], level=1))
        cert = is_flat_to_depth(Q, 3)
        assert not cert.passed
        # the witness is the p-cyclic module battery item
        assert cert.witness["module"] == [2] or cert.witness["module"] == [1]

    def test_rationals_flat(self):
        assert is_flat_to_depth(Rationals(ZB), 3).passed

    def test_monotone_certificates(self):
        Q = free_contra(P2, 1)
        assert is_flat_to_depth(Q, 2).passed
        assert is_flat_to_depth(Q, 4).passed


class TestNakayama:
    def test_ring_tower_witness(self):
        N, val = nakayama_witness(free_contra(P2, 1), 3)
        assert N.divisors() == (1,)
        assert val.divisors() == (1,)

    def test_zero_contramodule_no_witness(self):
        assert nakayama_witness(free_contra(P2, 0), 4) is None

    def test_free_rank_two_value(self):
        N, val = nakayama_witness(free_contra(P2, 2), 3)
        assert N.divisors() == (1,)
        assert val.divisors() == (1, 1)

    def test_rationals_witness(self):
        N, val = nakayama_witness(Rationals(ZB), 2)
        assert val == QValue(1)


class TestHomEvaluation:
    def test_free_morphisms_count(self):
        # Hom(R[[X]], Q) to depth d is (Q.red(d-1))^X elementwise
        Q = contra_from_module(FPModule.from_divisors(P2, [2], level=2))
        for rank in (0, 1, 2):
            hs = enumerate_free_morphisms(rank, Q, 3)
            assert len(hs) == Q.red_level(2).size() ** rank
            for h in hs[:8]:
                assert h.verify_commuting(3)

    def test_morphism_algebra(self):
        F = free_contra(P2, 2)
        phi = ContraMorphism.from_scalar_matrix(
            F, F, Matrix.from_int_rows(P2, INF, [[2, 1], [0, 2]]))
        assert phi.verify_commuting(4)
        twice = phi + phi
        assert (twice - phi).equals_to_depth(phi, 4)
        comp = phi.compose(phi)
        assert comp.verify_commuting(3)

    def test_contra_map_induces_on_tensor(self):
        F2 = free_contra(P2, 2)
        F1 = free_contra(P2, 1)
        phi = ContraMorphism.from_scalar_matrix(
            F2, F1, Matrix.from_int_rows(P2, INF, [[1, 1]]))
        N = FPModule.from_divisors(P2, [2], level=2)
        src, tgt, induced = contratensor_contra_map(N, phi)
        assert src.divisors() == (2, 2)
        assert tgt.divisors() == (2,)
        assert induced.is_surjective()
