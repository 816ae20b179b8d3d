import numpy as np
import pytest

from helpers import ghz_mpo, random_gates
from noisympo import dense
from noisympo.channels import (
    compose,
    depolarize2,
    identity_channel,
    kraus_channel,
    unitary_channel,
)
from noisympo.linalg import haar_unitary
from noisympo.mpo import (
    all_probabilities,
    canonical_defect,
    entropy_profile,
    from_dense,
    mpo_entanglement_entropy,
    product_zero_state,
    to_dense,
    trace,
)
from noisympo.update import apply_two_site, apply_two_site_fast

SWAP = np.eye(4)[[0, 2, 1, 3]]
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])
UPDATES = [apply_two_site, apply_two_site_fast]


def run_both(n, gates, chi=None, tol=0.0, update=apply_two_site):
    mpo = product_zero_state(n, chi or 4 ** (n // 2), trunc_tol=tol)
    state = dense.zero_state(n)
    stats = []
    for _, l, ch in gates:
        stats.append(update(mpo, ch, l))
        state = dense.dense_apply(state, ch, l)
    return mpo, state, stats


@pytest.mark.parametrize("update", UPDATES)
def test_identity_channel_is_noop(update):
    mpo, _, _ = run_both(6, random_gates(6, 5, 0.1, 1))
    before = [s.copy() for s in mpo.lambdas]
    rho = to_dense(mpo)
    for l in range(1, 6):
        update(mpo, identity_channel(), l)
    for a, b in zip(before, mpo.lambdas):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(to_dense(mpo), rho, atol=1e-12)


@pytest.mark.parametrize("update", UPDATES)
def test_swap_preserves_ghz(update):
    mpo = ghz_mpo(4)
    update(mpo, unitary_channel(SWAP), 2)
    for s in mpo.lambdas:
        np.testing.assert_allclose(s, [0.5] * 4, atol=1e-12)
    np.testing.assert_allclose(entropy_profile(mpo), 2.0, atol=1e-12)


@pytest.mark.parametrize("update", UPDATES)
@pytest.mark.parametrize("l", [1, 2, 3])
def test_conditional_measurement_collapses_every_bond(update, l):
    # outcome-0 branch of a computational-basis measurement on qubit l
    mpo = ghz_mpo(4)
    update(mpo, kraus_channel([np.kron(P0, np.eye(2))]), l)
    for s in mpo.lambdas:
        assert s.size == 1
        assert s[0] == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(entropy_profile(mpo), 0.0, atol=1e-12)
    assert trace(mpo) == pytest.approx(0.5, abs=1e-12)
    expect = np.zeros((16, 16))
    expect[0, 0] = 0.5
    np.testing.assert_allclose(to_dense(mpo), expect, atol=1e-12)
    assert canonical_defect(mpo) <= 1e-12


@pytest.mark.parametrize("update", UPDATES)
def test_unconditioned_measurement_is_also_global(update):
    # averaging both outcomes leaves the classical mixture: rank 2 everywhere
    mpo = ghz_mpo(6)
    update(mpo, kraus_channel([np.kron(P0, np.eye(2)), np.kron(P1, np.eye(2))]), 3)
    for s in mpo.lambdas:
        # sum of squares is Tr[rho^2] = 1/2
        np.testing.assert_allclose(s, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(entropy_profile(mpo), 1.0, atol=1e-12)
    assert trace(mpo) == pytest.approx(1.0, abs=1e-12)


def test_four_qubit_layer_matches_oracle():
    rng = np.random.default_rng(2)
    gates = [(1, l, compose(depolarize2(0.1), unitary_channel(haar_unitary(4, rng)))) for l in (1, 3, 2)]
    mpo, state, _ = run_both(4, gates, chi=16)
    np.testing.assert_allclose(all_probabilities(mpo), dense.dense_distribution(state), atol=1e-9)


@pytest.mark.parametrize("n", [2, 4])
@pytest.mark.parametrize("p", [0.0, 0.1])
@pytest.mark.parametrize("update", UPDATES)
def test_exact_at_full_bond_dimension(n, p, update):
    for c in range(50):
        mpo, state, _ = run_both(n, random_gates(n, 6, p, 1000 + c), update=update)
        np.testing.assert_allclose(to_dense(mpo), state.rho, atol=1e-9)


@pytest.mark.parametrize("update", UPDATES)
def test_exact_six_qubits_all_observables(update):
    mpo, state, stats = run_both(6, random_gates(6, 8, 0.1, 3), update=update)
    np.testing.assert_allclose(all_probabilities(mpo), dense.dense_distribution(state), atol=1e-10)
    for l in range(1, 6):
        assert mpo_entanglement_entropy(mpo, l) == pytest.approx(dense.dense_mpo_entropy(state, l), abs=1e-8)
    assert trace(mpo) == pytest.approx(1.0, abs=1e-10)
    assert all(s.discarded_weight == 0 and s.trace_loss == 0 for s in stats)


@pytest.mark.parametrize("update", UPDATES)
def test_trace_bookkeeping_under_truncation(update):
    mpo = product_zero_state(8, 6, trunc_tol=0.0)
    prev = trace(mpo)
    truncated = 0
    for _, l, ch in random_gates(8, 10, 0.05, 4):
        st = update(mpo, ch, l)
        now = trace(mpo)
        assert prev - now == pytest.approx(st.trace_loss, abs=1e-9)
        assert 0 <= st.discarded_weight <= 1 and st.new_bond_dim <= 6
        truncated += st.discarded_weight > 0
        prev = now
    assert truncated > 0


def test_stats_fields():
    mpo = product_zero_state(4, 16)
    st = apply_two_site(mpo, identity_channel(), 2, measure_defect=True)
    assert st.bond == 2 and st.new_bond_dim == 1 and st.wall_time >= 0
    assert st.sweep_defect == pytest.approx(0.0, abs=1e-14)
    assert apply_two_site(mpo, identity_channel(), 2).sweep_defect is None


def test_fast_path_matches_reference():
    gates = random_gates(6, 6, 0.1, 5)[:10]
    slow = product_zero_state(6, 64)
    fast = product_zero_state(6, 64)
    for _, l, ch in gates:
        apply_two_site(slow, ch, l)
        apply_two_site_fast(fast, ch, l)
    assert fast.is_stale
    np.testing.assert_allclose(all_probabilities(fast), all_probabilities(slow), atol=1e-8)
    for a, b in zip(fast.lambdas, slow.lambdas):
        np.testing.assert_allclose(a, b, atol=1e-9)
    assert not fast.is_stale


def test_fast_path_matches_reference_with_truncation():
    gates = random_gates(10, 6, 0.1, 6)
    slow = product_zero_state(10, 12)
    fast = product_zero_state(10, 12)
    for _, l, ch in gates:
        apply_two_site(slow, ch, l)
        apply_two_site_fast(fast, ch, l)
    np.testing.assert_allclose(entropy_profile(fast), entropy_profile(slow), atol=1e-9)
    assert trace(fast) == pytest.approx(trace(slow), abs=1e-9)


def test_defect_stays_small_under_long_noisy_evolution():
    mpo = product_zero_state(8, 64)
    worst = 0.0
    for _, l, ch in random_gates(8, 200, 0.05, 7):
        apply_two_site(mpo, ch, l)
        worst = max(worst, canonical_defect(mpo))
    assert worst <= 1e-8


def test_rejects_bad_bond_and_dimension():
    mpo = product_zero_state(4, 16)
    with pytest.raises(ValueError):
        apply_two_site(mpo, identity_channel(), 0)
    with pytest.raises(ValueError):
        apply_two_site(mpo, identity_channel(), 4)
    with pytest.raises(ValueError):
        apply_two_site_fast(mpo, identity_channel(3), 1)


def test_annihilating_channel_raises():
    mpo = product_zero_state(4, 16)
    with pytest.raises(ArithmeticError):
        apply_two_site(mpo, kraus_channel([np.kron(P1, np.eye(2))]), 1)


def test_pure_evolution_entropy_is_twice_state_entropy():
    rng = np.random.default_rng(8)
    psi = np.zeros(64, complex)
    psi[0] = 1
    mpo = product_zero_state(6, 64, trunc_tol=0.0)
    for t in range(1, 7):
        for l in (range(1, 6, 2) if t % 2 else range(2, 5, 2)):
            u = haar_unitary(4, rng)
            apply_two_site(mpo, unitary_channel(u), l)
            full = np.kron(np.kron(np.eye(2 ** (l - 1)), u), np.eye(2 ** (5 - l)))
            psi = full @ psi
    for l in range(1, 6):
        assert mpo_entanglement_entropy(mpo, l) == pytest.approx(2 * dense.pure_state_entropy(psi, l), abs=1e-9)
    np.testing.assert_allclose(to_dense(from_dense(np.outer(psi, psi.conj()))), to_dense(mpo), atol=1e-10)
