import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from helpers import classical_pair, ghz_mpo, ghz_vector, random_gates
from noisympo import dense
from noisympo.mpo import (
    Mpo,
    all_probabilities,
    canonical_defect,
    entropy_profile,
    from_dense,
    keep_count,
    load_mpo,
    max_mpo_entropy,
    maximally_mixed_state,
    mpo_entanglement_entropy,
    probability,
    product_state,
    product_zero_state,
    sample,
    save_mpo,
    schmidt_entropy,
    to_dense,
    trace,
)
from noisympo.update import apply_two_site


def evolved(n, depth, p, seed, chi=None):
    mpo = product_zero_state(n, chi or 4 ** (n // 2), trunc_tol=0.0)
    state = dense.zero_state(n)
    for _, l, ch in random_gates(n, depth, p, seed):
        apply_two_site(mpo, ch, l)
        state = dense.dense_apply(state, ch, l)
    return mpo, state


class TestProductZeroState:
    def test_trace_and_entropy(self):
        assert trace(product_zero_state(2, 4)) == 1.0
        mpo = product_zero_state(4, 16)
        assert list(entropy_profile(mpo)) == [0.0, 0.0, 0.0]
        assert canonical_defect(mpo) == 0.0

    def test_probabilities(self):
        mpo = product_zero_state(4, 16)
        for x in itertools.product(range(2), repeat=4):
            assert probability(mpo, x) == (1.0 if not any(x) else 0.0)

    def test_structure(self):
        mpo = product_zero_state(6, 8)
        for g in mpo.gammas:
            assert g.shape == (1, 4, 1)
            assert g[0, 0, 0] == 1 and np.count_nonzero(g) == 1
        assert all(list(s) == [1.0] for s in mpo.lambdas)
        assert max_mpo_entropy(mpo) == (0.0, 1)

    @pytest.mark.parametrize("n", [3, 0])
    def test_rejects_odd_or_tiny(self, n):
        with pytest.raises(ValueError):
            product_zero_state(n, 4)

    def test_rejects_bad_chi(self):
        with pytest.raises(ValueError):
            product_zero_state(4, 0)


class TestEntropy:
    def test_maximally_mixed_vanishes(self):
        mpo = maximally_mixed_state(6)
        np.testing.assert_allclose(entropy_profile(mpo), 0.0, atol=1e-15)
        assert trace(mpo) == pytest.approx(1.0)

    def test_ghz(self):
        mpo = ghz_mpo(4)
        np.testing.assert_allclose(entropy_profile(mpo), 2.0, atol=1e-12)
        s, b = max_mpo_entropy(mpo)
        assert s == pytest.approx(2.0) and b == 1

    def test_classical_correlation(self):
        mpo = from_dense(classical_pair())
        assert mpo_entanglement_entropy(mpo, 1) == pytest.approx(1.0, abs=1e-12)

    def test_pure_state_factor_two(self):
        rng = np.random.default_rng(21)
        for psi in [ghz_vector(6), rng.standard_normal(64) + 1j * rng.standard_normal(64)]:
            psi = psi / np.linalg.norm(psi)
            mpo = from_dense(np.outer(psi, psi.conj()))
            for l in range(1, 6):
                assert mpo_entanglement_entropy(mpo, l) == pytest.approx(
                    2 * dense.pure_state_entropy(psi, l), abs=1e-10
                )

    @settings(max_examples=40, deadline=None)
    @given(
        s=st.lists(st.floats(1e-6, 10.0), min_size=1, max_size=16),
        c=st.floats(1e-3, 1e3),
    )
    def test_rescaling_invariance_and_bounds(self, s, c):
        s = np.sort(np.array(s))[::-1]
        h = schmidt_entropy(s)
        assert schmidt_entropy(c * s) == pytest.approx(h, abs=1e-10)
        assert -1e-12 <= h <= np.log2(s.size) + 1e-12

    def test_zero_spectrum_rejected(self):
        with pytest.raises(ValueError):
            schmidt_entropy(np.zeros(3))

    def test_bond_range(self):
        with pytest.raises(ValueError):
            mpo_entanglement_entropy(product_zero_state(4, 4), 4)

    def test_max_dominates(self):
        mpo, _ = evolved(6, 4, 0.1, 3)
        s, b = max_mpo_entropy(mpo)
        prof = entropy_profile(mpo)
        assert np.all(prof <= s) and prof[b - 1] == s


class TestProbabilities:
    def test_noisy_circuit_matches_dense(self):
        mpo, state = evolved(4, 4, 0.1, 22)
        ref = dense.dense_distribution(state)
        for k, x in enumerate(itertools.product(range(2), repeat=4)):
            assert probability(mpo, x) == pytest.approx(ref[k], abs=1e-10)
        np.testing.assert_allclose(all_probabilities(mpo), ref, atol=1e-10)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_sum_equals_trace_under_truncation(self, n):
        mpo = product_zero_state(n, 2, trunc_tol=0.0)
        for _, l, ch in random_gates(n, 6, 0.05, 23):
            apply_two_site(mpo, ch, l)
        assert all_probabilities(mpo).sum() == pytest.approx(trace(mpo), abs=1e-9)

    def test_bad_bitstrings(self):
        mpo = product_zero_state(4, 4)
        with pytest.raises(ValueError):
            probability(mpo, [0, 0, 0])
        with pytest.raises(ValueError):
            probability(mpo, [0, 0, 2, 0])

    def test_to_dense_round_trip(self):
        mpo, state = evolved(4, 5, 0.1, 24)
        np.testing.assert_allclose(to_dense(mpo), state.rho, atol=1e-12)


class TestSampling:
    def test_product_zero_always_zero(self):
        out = sample(product_zero_state(4, 4), np.random.default_rng(0), size=50)
        assert out.shape == (50, 4) and not out.any()
        assert sample(product_zero_state(4, 4), np.random.default_rng(0)).shape == (4,)

    def test_classical_pair_frequencies(self):
        draws = sample(from_dense(classical_pair()), np.random.default_rng(1), size=10_000)
        assert np.all(draws[:, 0] == draws[:, 1])
        assert np.mean(draws[:, 0]) == pytest.approx(0.5, abs=0.02)

    def test_chi_square_against_probabilities(self):
        mpo, _ = evolved(4, 4, 0.1, 25)
        probs = np.array([probability(mpo, x) for x in itertools.product(range(2), repeat=4)])
        shots = 100_000
        draws = sample(mpo, np.random.default_rng(2), size=shots)
        idx = draws @ (1 << np.arange(3, -1, -1))
        observed = np.bincount(idx, minlength=16)
        _, pvalue = stats.chisquare(observed, probs / probs.sum() * shots)
        assert pvalue > 0.01

    def test_reproducible(self):
        mpo, _ = evolved(4, 3, 0.1, 26)
        a = sample(mpo, np.random.default_rng(3), size=20)
        b = sample(mpo, np.random.default_rng(3), size=20)
        np.testing.assert_array_equal(a, b)


class TestCanonicalDefect:
    def test_scaled_gamma_detected(self):
        mpo = ghz_mpo(4)
        mpo.set_gamma(2, 2 * mpo.gamma(2))
        assert canonical_defect(mpo) >= 1

    def test_ghz_and_evolved_are_canonical(self):
        assert canonical_defect(ghz_mpo(6)) <= 1e-12
        mpo, _ = evolved(6, 6, 0.1, 27)
        assert canonical_defect(mpo) <= 1e-8


class TestValidation:
    def test_rejects_inconsistent_bonds(self):
        g = np.zeros((1, 4, 2))
        with pytest.raises(ValueError):
            Mpo([g, np.zeros((1, 4, 1))], [np.ones(2)])

    def test_rejects_ascending_lambda(self):
        g1, g2 = np.zeros((1, 4, 2)), np.zeros((2, 4, 1))
        with pytest.raises(ValueError):
            Mpo([g1, g2], [np.array([0.1, 0.9])])

    def test_rejects_oversized_bond(self):
        g1, g2 = np.zeros((1, 4, 2)), np.zeros((2, 4, 1))
        with pytest.raises(ValueError):
            Mpo([g1, g2], [np.array([0.9, 0.1])], chi_max=1)

    def test_keep_count(self):
        s = np.array([1.0, 0.5, 1e-9, 0.0])
        assert keep_count(s, None, 0.0) == 3
        assert keep_count(s, None, 1e-7) == 2
        assert keep_count(s, 1, 0.0) == 1
        assert keep_count(np.zeros(3), None, 0.0) == 0


def test_product_state_of_single_site_operators():
    rng = np.random.default_rng(28)
    sites = []
    for _ in range(4):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        r = a @ a.conj().T
        sites.append(r / np.trace(r))
    mpo = product_state(sites)
    full = sites[0]
    for r in sites[1:]:
        full = np.kron(full, r)
    np.testing.assert_allclose(to_dense(mpo), full, atol=1e-14)
    assert canonical_defect(mpo) <= 1e-12


def test_checkpoint_round_trip(tmp_path):
    mpo, _ = evolved(6, 5, 0.1, 29, chi=8)
    path = tmp_path / "state.nmpo"
    save_mpo(mpo, path)
    back = load_mpo(path)
    assert (back.n, back.d, back.chi_max, back.trunc_tol) == (mpo.n, mpo.d, mpo.chi_max, mpo.trunc_tol)
    for a, b in zip(mpo.gammas, back.gammas):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(mpo.lambdas, back.lambdas):
        np.testing.assert_array_equal(a, b)
    assert path.read_bytes()[:4] == b"NMPO"


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"XXXX0000")
    with pytest.raises(ValueError):
        load_mpo(path)
    good = tmp_path / "good"
    save_mpo(product_zero_state(4, 4), good)
    good.write_bytes(good.read_bytes() + b"\0")
    with pytest.raises(ValueError, match="trailing"):
        load_mpo(good)
