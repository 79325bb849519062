"""Normal form, membership solving and level reduction over all backends."""

import math
import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from protower.coefficients import (
    INF, Backend, BackendMismatch, LevelError, Matrix,
    invert_matrix, kernel_basis, normal_form, rational_rank, solve_membership,
)

ZB = Backend("z")
P2 = Backend("padic", 2)
P3 = Backend("padic", 3)
F2X = Backend("pseries", 2)


def is_unimodular(M):
    b, lv = M.backend, M.level
    try:
        invert_matrix(M)
        return True
    except ZeroDivisionError:
        return False


def check_snf(M):
    snf = normal_form(M)
    assert (snf.U * M * snf.V) == snf.D
    assert is_unimodular(snf.U)
    assert is_unimodular(snf.V)
    # diagonal, off-diagonal zero
    b, lv = M.backend, M.level
    for i in range(snf.D.rows):
        for j in range(snf.D.cols):
            if i != j:
                assert b.is_zero(snf.D.data[i][j], lv)
    return snf


def divides(b, lv, a, c):
    if b.is_zero(a, lv):
        return b.is_zero(c, lv)
    q, r = b.divmod(c, a, lv)
    return b.is_zero(r, lv)


class TestNormalFormExamples:
    def test_smith_2468_over_z(self):
        M = Matrix.from_int_rows(ZB, INF, [[2, 4], [6, 8]])
        snf = check_snf(M)
        assert snf.diagonal == [2, 4]

    def test_identity_any_backend(self):
        for b, lv in [(ZB, INF), (P2, 3), (F2X, 4)]:
            M = Matrix.identity(b, lv, 3)
            snf = check_snf(M)
            assert snf.D == M
            assert snf.U == M
            assert snf.V == M

    def test_single_p_at_level_3(self):
        M = Matrix.from_int_rows(P2, 3, [[2]])
        snf = check_snf(M)
        assert snf.exponents() == [1]

    def test_divisibility_chain_z(self):
        M = Matrix.from_int_rows(ZB, INF, [[2, 0], [0, 3]])
        snf = check_snf(M)
        assert snf.diagonal == [1, 6]

    def test_pseries_finite_level(self):
        x = (0, 1)
        M = Matrix(F2X, 3, [[x, (1,)], [(), x]])
        snf = check_snf(M)
        es = snf.exponents()
        assert es == sorted(es)


class TestSolveMembership:
    def test_scalar_division(self):
        A = Matrix.from_int_rows(ZB, INF, [[2]])
        bvec = Matrix.from_int_rows(ZB, INF, [[4]])
        x = solve_membership(A, bvec)
        assert x is not None and (A * x) == bvec
        assert x.data == ((2,),)

    def test_unit_not_in_maximal_ideal(self):
        A = Matrix.from_int_rows(P2, 2, [[2]])
        bvec = Matrix.from_int_rows(P2, 2, [[1]])
        assert solve_membership(A, bvec) is None

    def test_diag_2_3(self):
        A = Matrix.from_int_rows(ZB, INF, [[2, 0], [0, 3]])
        bvec = Matrix.from_int_rows(ZB, INF, [[4], [3]])
        x = solve_membership(A, bvec)
        assert x is not None and (A * x) == bvec
        assert x.data == ((2,), (1,))

    def test_shape_mismatch(self):
        A = Matrix.from_int_rows(ZB, INF, [[1, 2]])
        bvec = Matrix.from_int_rows(ZB, INF, [[1], [2]])
        with pytest.raises(Exception):
            solve_membership(A, bvec)

    def test_backend_mismatch(self):
        A = Matrix.from_int_rows(ZB, INF, [[1]])
        bvec = Matrix.from_int_rows(P2, INF, [[1]])
        with pytest.raises(BackendMismatch):
            solve_membership(A, bvec)

    def test_agrees_with_exhaustive_search(self):
        # level rings of size <= 3^4: brute force every candidate x
        rng = random.Random(7)
        for b, lv in [(P2, 2), (P3, 2), (P2, 3), (F2X, 2)]:
            size = b.prime ** int(lv)
            for _ in range(12):
                rows, cols = rng.randint(1, 2), rng.randint(1, 2)
                A = random_matrix(rng, b, lv, rows, cols)
                bvec = random_matrix(rng, b, lv, rows, 1)
                got = solve_membership(A, bvec)
                found = brute_solution_exists(b, lv, A, bvec)
                assert (got is not None) == found
                if got is not None:
                    assert (A * got) == bvec


def scalar_pool(b, lv):
    if b.kind == "pseries":
        n = int(lv)
        pool = []
        for coeffs in product(range(b.prime), repeat=n):
            pool.append(tuple(coeffs))
        return pool
    return list(range(b.prime ** int(lv)))


def brute_solution_exists(b, lv, A, bvec):
    pool = scalar_pool(b, lv)
    for cand in product(pool, repeat=A.cols):
        x = Matrix(b, lv, [[c] for c in cand], A.cols, 1)
        if (A * x) == bvec:
            return True
    return False


def random_matrix(rng, b, lv, rows, cols, int_range=8):
    data = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            if b.kind == "pseries":
                deg = rng.randint(0, max(int(lv) if lv is not INF else 3, 1))
                row.append(tuple(rng.randint(0, b.prime - 1) for _ in range(deg + 1)))
            else:
                row.append(rng.randint(-int_range, int_range))
        data.append(row)
    return Matrix(b, lv, data, rows, cols)


class TestReduce:
    def test_reduce_mod_lower_level(self):
        M = Matrix.from_int_rows(P2, 3, [[6]])
        assert M.reduce(2).data == ((2,),)

    def test_identity_on_same_level(self):
        M = Matrix.from_int_rows(P2, 3, [[5]])
        assert M.reduce(3) is M

    def test_pseries_reduce(self):
        M = Matrix(F2X, 3, [[(0, 1, 1)]])
        assert M.reduce(2).data == (((0, 1),),)

    def test_raise_level_rejected(self):
        M = Matrix.from_int_rows(P2, 2, [[1]])
        with pytest.raises(LevelError):
            M.reduce(3)


class TestProperties:
    def test_random_snf_all_backends(self):
        rng = random.Random(0)
        cases = [(ZB, INF), (P2, 2), (P2, 5), (P3, 3), (F2X, 4)]
        for b, lv in cases:
            for _ in range(15):
                rows, cols = rng.randint(1, 5), rng.randint(1, 5)
                M = random_matrix(rng, b, lv, rows, cols)
                snf = check_snf(M)
                diag = snf.diagonal
                for a, c in zip(diag, diag[1:]):
                    assert divides(b, lv, a, c)

    def test_normal_form_commutes_with_reduce(self):
        rng = random.Random(1)
        for b in (P2, P3, F2X):
            for _ in range(10):
                rows, cols = rng.randint(1, 4), rng.randint(1, 4)
                M = random_matrix(rng, b, 5, rows, cols)
                hi = normal_form(M)
                lo = normal_form(M.reduce(3))
                capped_hi = sorted(min(e, 3) for e in hi.exponents())
                capped_lo = sorted(min(e, 3) for e in lo.exponents())
                assert capped_hi == capped_lo

    def test_kernel_basis_is_kernel(self):
        rng = random.Random(2)
        for b, lv in [(ZB, INF), (P2, 3), (F2X, 3)]:
            for _ in range(10):
                rows, cols = rng.randint(1, 4), rng.randint(1, 4)
                M = random_matrix(rng, b, lv, rows, cols)
                K = kernel_basis(M)
                assert (M * K).is_zero()
                # over the finite rings, every kernel element is covered
                if lv is not INF and b.prime ** int(lv) <= 9 and cols <= 2:
                    pool = scalar_pool(b, lv)
                    for cand in product(pool, repeat=cols):
                        x = Matrix(b, lv, [[c] for c in cand], cols, 1)
                        if (M * x).is_zero():
                            assert solve_membership(K, x) is not None

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.integers(-20, 20), min_size=1, max_size=3),
                    min_size=1, max_size=3).filter(lambda r: len({len(x) for x in r}) == 1))
    def test_hypothesis_z_snf(self, rows):
        M = Matrix.from_int_rows(ZB, INF, rows)
        snf = check_snf(M)
        assert snf.rank() == rational_rank(M)

    def test_valuation_axioms(self):
        for b, lv in [(P2, 4), (P3, 3), (F2X, 4)]:
            assert b.valuation(b.zero, lv) == INF
            assert b.valuation(b.one, lv) == 0
            s = b.from_int(3) if b.kind == "padic" else (1, 1)
            v = b.valuation(s, lv)
            if v is not INF and v + 1 < int(lv):
                pi_s = b.mul(b.pi_power(1), s, lv)
                assert b.valuation(pi_s, lv) == 1 + v
