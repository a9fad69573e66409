import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clubbench.errors import InputError, NumericFailure
from clubbench.linalg import (
    REFRESH_EVERY,
    GramInverse,
    inv_rank1_update,
    rank1_update,
    spd_inverse,
    spd_solve,
)
from oracles import gauss_solve


def random_spd(rng, d, n_terms=None):
    x = rng.normal(size=(n_terms or 2 * d, d))
    return np.eye(d) + x.T @ x


class TestSpdSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(spd_solve(np.eye(3), b), b)

    @pytest.mark.parametrize("d", [1, 2, 5, 19, 25])
    def test_matches_gaussian_elimination(self, d):
        rng = np.random.default_rng(d)
        for _ in range(5):
            m = random_spd(rng, d)
            b = rng.normal(size=d)
            np.testing.assert_allclose(spd_solve(m, b), gauss_solve(m, b), rtol=1e-9, atol=1e-11)

    def test_not_positive_definite(self):
        with pytest.raises(NumericFailure):
            spd_solve(np.diag([1.0, -1.0]), np.ones(2))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            spd_solve(np.eye(3), np.ones(2))
        with pytest.raises(InputError):
            spd_solve(np.ones((2, 3)), np.ones(2))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_residual(self, d, seed):
        rng = np.random.default_rng(seed)
        m = random_spd(rng, d)
        b = rng.normal(size=d)
        x = spd_solve(m, b)
        assert np.linalg.norm(m @ x - b) <= 1e-9 * (1 + np.linalg.norm(b)) * np.linalg.cond(m)


class TestInverse:
    def test_spd_inverse_symmetric(self):
        rng = np.random.default_rng(1)
        inv = spd_inverse(random_spd(rng, 25))
        np.testing.assert_array_equal(inv, inv.T)

    def test_spd_inverse_matches_numpy(self):
        rng = np.random.default_rng(2)
        m = random_spd(rng, 10)
        np.testing.assert_allclose(spd_inverse(m), np.linalg.inv(m), rtol=1e-10, atol=1e-12)

    def test_rank1_update_exact_symmetric(self):
        rng = np.random.default_rng(3)
        m = np.eye(6)
        for _ in range(50):
            m = rank1_update(m, rng.normal(size=6))
        np.testing.assert_array_equal(m, m.T)

    def test_sherman_morrison_matches_direct(self):
        rng = np.random.default_rng(4)
        m = random_spd(rng, 8)
        x = rng.normal(size=8)
        expected = np.linalg.inv(m + np.outer(x, x))
        np.testing.assert_allclose(inv_rank1_update(np.linalg.inv(m), x), expected, rtol=1e-9, atol=1e-12)

    def test_corrupted_inverse_detected(self):
        # a negative definite "inverse" makes the denominator non-positive
        with pytest.raises(NumericFailure):
            inv_rank1_update(-np.eye(2), np.array([1.0, 1.0]))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (30, 4), elements=st.floats(-1, 1, allow_nan=False)))
    def test_gram_inverse_tracks_direct_inverse(self, xs):
        g = GramInverse.identity(4)
        for x in xs:
            g.add_outer(x)
        np.testing.assert_allclose(g.minv @ g.m, np.eye(4), atol=1e-9)
        np.testing.assert_allclose(g.m, np.eye(4) + xs.T @ xs, atol=1e-12)


class TestGramInverse:
    def test_m_is_exact_sum(self):
        rng = np.random.default_rng(5)
        xs = np.trunc(rng.normal(size=(200, 5)) * 4096) / 4096 / 4
        g = GramInverse.identity(5)
        expected = np.eye(5)
        for x in xs:
            g.add_outer(x)
            expected = expected + np.outer(x, x)
        np.testing.assert_array_equal(g.m, expected)
        assert g.n_updates == 200

    def test_periodic_refresh(self, monkeypatch):
        import clubbench.linalg as la

        calls = []
        monkeypatch.setattr(la.GramInverse, "refresh", lambda self: calls.append(self.n_updates))
        g = la.GramInverse.identity(2)
        for _ in range(2 * REFRESH_EVERY):
            g.add_outer(np.array([1e-3, 0.0]))
        assert calls == [REFRESH_EVERY, 2 * REFRESH_EVERY]

    def test_copy_is_independent(self):
        g = GramInverse.identity(3)
        h = g.copy()
        h.add_outer(np.ones(3))
        np.testing.assert_array_equal(g.m, np.eye(3))
        assert g.n_updates == 0 and h.n_updates == 1
