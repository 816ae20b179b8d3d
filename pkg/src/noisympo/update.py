"""Canonical update of an MPO under a two-site CPTP map.

:func:`apply_two_site` is the reference algorithm: contract the two-site
block with the channel, SVD it, truncate to ``chi_max``, and then sweep to
both ends of the chain so that every bond again holds the exact Schmidt
decomposition.  A non-unitary map changes the Schmidt spectrum of *every*
bond, which is why the sweeps are needed; cost is ``O(n chi^3)`` per gate.

:func:`apply_two_site_fast` keeps the chain in mixed-canonical form, moves the
orthogonality center with QR steps and only touches the two gate sites, for
``O(chi^3)`` per gate.  The Vidal form is rebuilt lazily (one ``O(n chi^3)``
sweep) when an observable is requested.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from noisympo.channels import TwoQubitChannel
from noisympo.linalg import svd
from noisympo.mpo import Mpo, canonical_defect, gamma_from_forms, keep_count, mixed_to_vidal


@dataclass
class UpdateStats:
    bond: int
    discarded_weight: float
    new_bond_dim: int
    wall_time: float
    # trace carried by the dropped singular triplets (0 without truncation)
    trace_loss: float = 0.0
    # only filled in when the caller asks for it: it costs another O(n chi^3)
    sweep_defect: float | None = None


def _check_gate(mpo: Mpo, ch: TwoQubitChannel, l: int) -> None:
    if not 1 <= l <= mpo.n - 1:
        raise ValueError(f"bond {l} out of range 1..{mpo.n - 1}")
    if ch.d != mpo.d:
        raise ValueError("channel and MPO have different local dimensions")


def _apply_channel(theta: np.ndarray, ch: TwoQubitChannel) -> np.ndarray:
    """``theta[a, J1, J2, c] -> sum M[(I1 I2), (J1 J2)] theta[a, J1, J2, c]``."""
    a, dd, _, c = theta.shape
    m = ch.m.reshape(dd, dd, dd, dd)
    return np.einsum("ijkl,aklc->aijc", m, theta, optimize=True)


def _truncate(s: np.ndarray, chi: int, tol: float) -> tuple[int, float]:
    keep = keep_count(s, chi, tol)
    if keep == 0:
        raise ArithmeticError("two-site block vanished: channel annihilated the state")
    w = s**2
    total = w.sum()
    discarded = float(w[keep:].sum() / total) if total > 0 else 0.0
    return keep, discarded


def _trace_env(tensors: list[np.ndarray], lo: int, hi: int, d: int, from_left: bool) -> np.ndarray:
    # trace functional contracted over sites lo..hi of a chain
    vec = np.ones(1, dtype=np.complex128)
    sites = range(lo, hi + 1) if from_left else range(hi, lo - 1, -1)
    for k in sites:
        t = tensors[k - 1][:, :: d + 1, :].sum(axis=1)
        vec = vec @ t if from_left else t @ vec
    return vec


def _dropped_trace(u, s, vh, keep, tl, tr, d) -> float:
    """Trace carried by singular triplets ``keep:`` of a two-site block."""
    if keep >= s.size:
        return 0.0
    uu = u[:, :, keep:]  # (a, I1, beta)
    vv = vh[keep:]  # (beta, I2, c)
    left = np.einsum("a,aib->b", tl, uu[:, :: d + 1, :])
    right = np.einsum("bic,c->b", vv[:, :: d + 1, :], tr)
    return float(np.real(np.sum(left * s[keep:] * right)))


def _gate_block(mpo: Mpo, ch: TwoQubitChannel, l: int):
    """Center the chain on ``l``, apply ``ch`` and truncate; shared by both paths."""
    d, dd = mpo.d, mpo.d**2
    tensors = mpo.chain(l)
    theta = np.tensordot(tensors[l - 1], tensors[l], axes=(2, 0))  # (a, J1, J2, c)
    block = _apply_channel(theta, ch)
    ca, cc = block.shape[0], block.shape[3]
    u, s, vh = svd(block.reshape(ca * dd, dd * cc))
    keep, discarded = _truncate(s, mpo.chi_max, mpo.trunc_tol)
    trace_loss = 0.0
    if keep < s.size:
        tl = _trace_env(tensors, 1, l - 1, d, True)
        tr = _trace_env(tensors, l + 2, mpo.n, d, False)
        trace_loss = _dropped_trace(u.reshape(ca, dd, -1), s, vh.reshape(-1, dd, cc), keep, tl, tr, d)
    v = u[:, :keep].reshape(ca, dd, keep)
    w = vh[:keep].reshape(keep, dd, cc)
    return tensors, v, s[:keep].copy(), w, discarded, trace_loss


def apply_two_site(mpo: Mpo, ch: TwoQubitChannel, l: int, measure_defect: bool = False) -> UpdateStats:
    """Apply ``ch`` to sites ``l, l+1`` and restore canonical form globally.

    The two-site block

        B[(a, I1), (I2, c)] = sum_J M[I1 I2, J1 J2] λ[l-1]_a Γ[l]^{J1}_{ab} λ[l]_b Γ[l+1]^{J2}_{bc} λ[l+1]_c

    is decomposed as ``V diag(λ') W``; at most ``chi_max`` values are kept.
    The left sweep then walks ``k = l, l-1, ..., 2`` decomposing
    ``λ[k-1] Γ[k] X`` with ``X`` the rotation carried from the previous step
    and setting ``Γ[k] <- W / λ'``; the right sweep mirrors it.  Edge gates
    (``l = 1`` or ``l = n-1``) skip the corresponding sweep.

    The isometries ``λ[k-1] Γ[k]`` (left of the gate) and ``Γ[k] λ[k]``
    (right of it) are taken from the stored mixed-canonical chain rather than
    recomputed from Γ/λ, and each new Γ is divided by whichever neighbouring
    Schmidt value is larger (see :func:`gamma_from_forms`), so round-off is
    not amplified by small Schmidt values.  Singular values below
    ``trunc_tol * max`` are dropped at every SVD, which also guards the
    divisions.  If a sweep drops anything, the truncated state is
    decomposed once more so that all bonds agree.
    """
    _check_gate(mpo, ch, l)
    t0 = time.perf_counter()
    n, dd = mpo.n, mpo.d**2
    tol = mpo.trunc_tol
    tensors, v, sv, w, discarded, trace_loss = _gate_block(mpo, ch, l)

    gammas: list[np.ndarray] = [np.empty(0)] * n
    lambdas: list[np.ndarray] = [np.empty(0)] * (n - 1)
    lambdas[l - 1] = sv
    dropped = False

    # left sweep: `left_iso` is the chain's left-isometric tensor at site k
    # with its right bond already in the new Schmidt basis
    if l == 1:
        gammas[0] = v
    else:
        left_iso, s_right = v, sv
        for k in range(l, 1, -1):
            cl = left_iso.shape[0]
            uk, sk, vk = svd((left_iso * s_right[None, None, :]).reshape(cl, -1))
            kk = keep_count(sk, None, tol)
            dropped |= kk < sk.size
            rot, sk = uk[:, :kk], sk[:kk].copy()  # old bond k-1 index -> new
            w_form = vk[:kk].reshape(kk, dd, -1)  # Γ[k] <- W / λ'
            a_form = np.tensordot(rot.conj().T, left_iso, axes=(1, 0))
            gammas[k - 1] = gamma_from_forms(a_form, w_form, sk, s_right)
            lambdas[k - 2] = sk
            left_iso, s_right = np.tensordot(tensors[k - 2], rot, axes=(2, 0)), sk
        gammas[0] = left_iso

    # right sweep, mirrored
    if l + 1 == n:
        gammas[n - 1] = w
    else:
        right_iso, s_left = w, sv
        for k in range(l + 1, n):
            cr = right_iso.shape[2]
            uk, sk, vk = svd((s_left[:, None, None] * right_iso).reshape(-1, cr))
            kk = keep_count(sk, None, tol)
            dropped |= kk < sk.size
            rot, sk = vk[:kk], sk[:kk].copy()  # new bond k index <- old
            v_form = uk[:, :kk].reshape(-1, dd, kk)  # Γ[k] <- V / λ'
            b_form = np.tensordot(right_iso, rot.conj().T, axes=(2, 0))
            gammas[k - 1] = gamma_from_forms(v_form, b_form, s_left, sk)
            lambdas[k - 1] = sk
            right_iso, s_left = np.tensordot(rot, tensors[k], axes=(1, 0)), sk
        gammas[n - 1] = right_iso

    tensors[l - 1] = v
    tensors[l] = sv[:, None, None] * w
    if dropped:
        # a sweep truncation perturbs the bonds decomposed before it; redo
        # the decomposition of the truncated state so all bonds agree
        gammas, lambdas, tensors = mixed_to_vidal(tensors, l + 1, tol)
        mpo._gammas, mpo._lambdas = gammas, lambdas
        mpo._set_chain(tensors, 1, vidal_ok=True)
    else:
        mpo._gammas, mpo._lambdas = gammas, lambdas
        mpo._set_chain(tensors, l + 1, vidal_ok=True)

    stats = UpdateStats(
        bond=l,
        discarded_weight=discarded,
        new_bond_dim=sv.size,
        wall_time=time.perf_counter() - t0,
        trace_loss=trace_loss,
    )
    if measure_defect:
        stats.sweep_defect = canonical_defect(mpo)
    return stats


def apply_two_site_fast(mpo: Mpo, ch: TwoQubitChannel, l: int, measure_defect: bool = False) -> UpdateStats:
    """Same map as :func:`apply_two_site`, local cost only.

    The orthogonality center is moved to site ``l`` by QR steps, the gate is
    applied to the center block and truncated there (where the block's SVD is
    the exact Schmidt decomposition), and the center ends up on ``l+1``.
    Sweep-ordered gate sequences therefore cost ``O(chi^3)`` per gate; Γ/λ
    are rebuilt lazily with one ``O(n chi^3)`` sweep when next read.
    """
    _check_gate(mpo, ch, l)
    t0 = time.perf_counter()
    tensors, v, sv, w, discarded, trace_loss = _gate_block(mpo, ch, l)
    tensors[l - 1] = v
    tensors[l] = sv[:, None, None] * w
    mpo._set_chain(tensors, l + 1, vidal_ok=False)

    stats = UpdateStats(
        bond=l,
        discarded_weight=discarded,
        new_bond_dim=sv.size,
        wall_time=time.perf_counter() - t0,
        trace_loss=trace_loss,
    )
    if measure_defect:
        stats.sweep_defect = canonical_defect(mpo)
    return stats
