import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from secrate.attacks import (
    InsufficientBudget,
    SuperblockObservation,
    brute_force_min_rate,
    cover,
    cover_marginal,
    key_index_attack,
    observe,
    rd_attack,
    timesharing_attack,
)
from secrate.codec import CipherMessage, Codebook, bin_posteriors, generate_codebook
from secrate.source import DistortionMeasure, Source

HAM = DistortionMeasure.hamming(2)
B05 = Source.bernoulli(0.5)
R_025 = 0.18872187554086717  # 1 - Hb(0.25)


@pytest.fixture(scope="module")
def cb10():
    return generate_codebook(B05, 10, 1.5, 0.3, 1)


class TestKeyIndex:
    def test_all_success_gives_zero_distortion(self, cb10):
        obs = observe(cb10, 20, 0.9, seed=3)
        assert obs.successes.all()
        r = key_index_attack(obs, HAM, 0.0)
        assert r.distortion == 0.0 and r.success
        assert r.rate_spent == 3 / 10
        assert 0 <= r.rate_spent - cb10.R_K <= 1 / cb10.n

    def test_zero_key_rate(self):
        cb = generate_codebook(B05, 6, 1.0, 0.0, 2)
        assert cb.bin_size == 1
        obs = observe(cb, 10, 0.9, seed=0)
        r = key_index_attack(obs, HAM)
        assert r.bits == 0 and r.rate_spent == 0.0
        assert np.all(r.block_distortions[obs.successes] == 0)

    def test_failed_blocks_counted(self, cb10):
        obs = observe(cb10, 200, 0.1, seed=4)  # tight delta: many blocks fail
        assert 0 < obs.successes.sum() < obs.l
        r = key_index_attack(obs, HAM)
        for i in np.flatnonzero(~obs.successes):
            best = min(np.mean(c != obs.source_blocks[i]) for c in cb10.bin(obs.messages[i].j_p))
            assert r.block_distortions[i] == pytest.approx(best)
        assert np.all(r.block_distortions[obs.successes] == 0)
        assert r.distortion == pytest.approx(r.block_distortions.mean())

    def test_observation_shapes(self, cb10):
        with pytest.raises(ValueError):
            SuperblockObservation(cb10, np.zeros((3, 9)), (CipherMessage(0, 0),) * 3, [True] * 3)


class TestCover:
    def test_explicit_and_implicit_agree(self):
        rng = np.random.default_rng(0)
        s = rng.integers(2, size=60)
        q = np.array([0.5, 0.5])
        a = [HAM.matrix[s, cover(s, q, HAM, 10, rng)].sum() for _ in range(1500)]
        b = [HAM.matrix[s, cover(s, q, HAM, 10, rng, explicit_cap=1)].sum() for _ in range(1500)]
        assert abs(np.mean(a) - np.mean(b)) < 0.15
        assert abs(np.std(a) - np.std(b)) < 0.15

    def test_order_statistic_law(self):
        # min Hamming distance of 2**40 uniform words to a fixed length-120 word
        rng = np.random.default_rng(1)
        L, bits = 120, 40
        s = rng.integers(2, size=L)
        draws = np.array([HAM.matrix[s, cover(s, np.array([0.5, 0.5]), HAM, bits, rng)].sum() for _ in range(1500)])
        k = np.arange(L + 1)
        with np.errstate(divide="ignore"):
            exact = -np.expm1(2.0**bits * np.log1p(-binom.cdf(k, L, 0.5)))
        emp = np.array([(draws <= x).mean() for x in k])
        assert np.max(np.abs(emp - exact)) < 0.05

    def test_marginal(self):
        assert np.allclose(cover_marginal(B05, HAM, 0.25), [0.5, 0.5])
        q = cover_marginal(Source.bernoulli(0.2), HAM, 0.1)
        # backward channel: q1 = (p - D) / (1 - 2D)
        assert q[1] == pytest.approx(0.1 / 0.8, abs=1e-6)


class TestRdAttack:
    def test_beyond_dmax(self, cb10):
        obs = observe(cb10, 5, 0.9, seed=0)
        r = rd_attack(obs, HAM, 1.0, 1e-6, seed=0)
        assert r.bits == 0 and r.success
        assert np.all(r.reconstruction == r.reconstruction.flat[0])
        # at exactly d_max the constant word only meets the target on average
        hits = [rd_attack(observe(cb10, 5, 0.9, seed=i), HAM, 0.5, 1e-6, seed=i).success for i in range(400)]
        assert 0.4 < np.mean(hits) < 0.75

    def test_covering_threshold(self):
        cb = generate_codebook(B05, 10, 1.2, 0.3, 5)
        above = [rd_attack(observe(cb, 20, 0.9, seed=i), HAM, 0.25, R_025 + 0.1, seed=i).success for i in range(200)]
        below = [rd_attack(observe(cb, 20, 0.9, seed=i), HAM, 0.25, R_025 - 0.1, seed=i).success for i in range(200)]
        assert np.mean(above) >= 0.9
        assert np.mean(below) <= 0.1

    def test_budget_respected(self, cb10):
        obs = observe(cb10, 4, 0.9, seed=1)
        r = rd_attack(obs, HAM, 0.3, 0.137, seed=0)
        assert r.rate_spent <= 0.137 + 1e-12
        assert r.bits == math.floor(40 * 0.137)


class TestTimesharing:
    def test_lambda_zero_is_key_index(self, cb10):
        obs = observe(cb10, 10, 0.9, seed=2)
        t = timesharing_attack(obs, HAM, 0.0, 0.3, 0.3, seed=0)
        k = key_index_attack(obs, HAM)
        assert t.bits == k.bits and np.array_equal(t.reconstruction, k.reconstruction)

    def test_lambda_one_is_rd(self, cb10):
        obs = observe(cb10, 10, 0.9, seed=2)
        t = timesharing_attack(obs, HAM, 1.0, 0.25, 0.3, seed=7)
        r = rd_attack(obs, HAM, 0.25, 0.3, seed=7)
        assert t.bits == r.bits and np.array_equal(t.reconstruction, r.reconstruction)

    def test_average_distortion(self, cb10):
        budget = 0.5 * 0.3 + 0.5 * (R_025 + 0.02)
        res = [timesharing_attack(observe(cb10, 40, 0.9, seed=i), HAM, 0.5, 0.25, budget, seed=i) for i in range(60)]
        assert abs(np.mean([r.distortion for r in res]) - 0.125) <= 0.03
        assert np.mean([r.rate_spent for r in res]) == pytest.approx(0.5 * 0.3 + 0.5 * R_025, abs=0.02)
        assert all(r.rate_spent <= budget + 1e-12 for r in res)

    def test_insufficient_budget(self, cb10):
        obs = observe(cb10, 10, 0.9, seed=2)
        with pytest.raises(InsufficientBudget):
            timesharing_attack(obs, HAM, 0.2, 0.3, 0.1)
        with pytest.raises(ValueError):
            timesharing_attack(obs, HAM, 1.5, 0.3, 0.1)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0, 1), st.floats(0.05, 0.5), st.floats(0.34, 0.7), st.integers(0, 1000))
    def test_success_iff_within_target(self, lam, D, budget, seed):
        cb = generate_codebook(B05, 6, 1.2, 0.3, 11)
        obs = observe(cb, 6, 0.9, seed=seed)
        r = timesharing_attack(obs, HAM, lam, D, budget, seed=seed, D_E=0.1)
        assert r.success == (r.distortion <= 0.1 + 1e-12)
        assert r.rate_spent <= budget + 1e-12
        assert r.distortion == pytest.approx(r.block_distortions.mean())


def two_candidate_codebook():
    # bin 0 holds two distinct typical words, bin 1 two others; n = 3, bins of 2
    cws = [[0, 1, 1], [1, 0, 1], [1, 1, 0], [0, 0, 1]]
    return Codebook.from_codewords(cws, 1, [0.5, 0.5])


class TestBruteForce:
    def test_two_candidates(self):
        cb = two_candidate_codebook()
        m = CipherMessage(0, 1)
        full = brute_force_min_rate(cb, m, 0.0, 1.0, 0.5)
        assert full.bits == 1.0 and full.list_size == 2 and not full.greedy
        assert brute_force_min_rate(cb, m, 0.0, 0.5, 0.5).bits == 0.0
        assert brute_force_min_rate(cb, m, 1.0, 1.0, 0.5).bits == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from([0.0, 1 / 3, 2 / 3, 1.0]), st.sampled_from([0.0, 1 / 3, 2 / 3, 1.0]),
           st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.integers(0, 5))
    def test_monotone(self, d1, d2, c1, c2, seed):
        cb = generate_codebook(B05, 3, 1.0, 0.34, seed)
        m = CipherMessage(0, 0)
        dlo, dhi = sorted((d1, d2))
        clo, chi = sorted((c1, c2))
        f = lambda d, c: brute_force_min_rate(cb, m, d, c, 0.5, given_success=False).bits
        assert f(dlo, chi) >= f(dhi, chi)
        assert f(dlo, chi) >= f(dlo, clo)

    def test_greedy_for_large_lists(self):
        cb = generate_codebook(B05, 4, 1.0, 0.5, 0)
        res = brute_force_min_rate(cb, CipherMessage(0, 0), 0.0, 1.0, 0.5, given_success=False)
        # at D_E = 0 every candidate in the support needs its own center
        _, joint = bin_posteriors(cb, 0.5)
        support = int((joint[:, 0].sum(axis=0) > 0).sum())
        assert res.greedy and res.list_size == support > 4
        assert res.covered_mass == pytest.approx(1.0)
