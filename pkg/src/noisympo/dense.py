"""Brute-force density-matrix simulator used as ground truth for small chains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from noisympo.channels import TwoQubitChannel

MAX_QUBITS = 8


def vectorize(rho: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """Map ``rho`` to the per-site merged tensor ``v[I_1, ..., I_n]``, ``I = d*i + i'``."""
    t = np.asarray(rho, dtype=np.complex128).reshape((d,) * (2 * n))
    order = [ax for s in range(n) for ax in (s, n + s)]
    return t.transpose(order).reshape((d * d,) * n)


def devectorize(v: np.ndarray, n: int, d: int = 2) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    t = np.asarray(v).reshape((d,) * (2 * n))
    order = [2 * s for s in range(n)] + [2 * s + 1 for s in range(n)]
    return t.transpose(order).reshape(d**n, d**n)


@dataclass
class DenseState:
    n: int
    rho: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"dense oracle supports 1..{MAX_QUBITS} qubits, got {self.n}")
        self.rho = np.asarray(self.rho, dtype=np.complex128)
        dim = 2**self.n
        if self.rho.shape != (dim, dim):
            raise ValueError(f"rho must be {dim}x{dim}, got {self.rho.shape}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h).min())


def zero_state(n: int) -> DenseState:
    rho = np.zeros((2**n, 2**n), dtype=np.complex128)
    rho[0, 0] = 1.0
    return DenseState(n, rho)


def maximally_mixed(n: int) -> DenseState:
    return DenseState(n, np.eye(2**n, dtype=np.complex128) / 2**n)


def pure_state(psi: np.ndarray) -> DenseState:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    n = int(round(np.log2(psi.size)))
    return DenseState(n, np.outer(psi, psi.conj()))


def dense_apply(state: DenseState, ch: TwoQubitChannel, l: int) -> DenseState:
    """Apply a two-site channel on qubits ``l, l+1`` (1-based)."""
    n = state.n
    if not 1 <= l <= n - 1:
        raise ValueError(f"bond {l} out of range for {n} qubits")
    if ch.d != 2:
        raise ValueError("dense oracle is qubit-only")
    s = ch.grouped.reshape((2,) * 8)  # [i1, i2, i1', i2', j1, j2, j1', j2']
    t = state.rho.reshape((2,) * (2 * n))
    axes = [l - 1, l, n + l - 1, n + l]
    out = np.tensordot(s, t, axes=([4, 5, 6, 7], axes))
    # tensordot puts the four new legs first; move them back into place
    out = np.moveaxis(out, [0, 1, 2, 3], axes)
    return DenseState(n, out.reshape(2**n, 2**n))


def dense_run(n: int, gates: Sequence[tuple[int, TwoQubitChannel]]) -> DenseState:
    state = zero_state(n)
    for l, ch in gates:
        state = dense_apply(state, ch, l)
    return state


def operator_schmidt_values(state: DenseState, l: int) -> np.ndarray:
    """Singular values of ``|rho>>`` across the cut after qubit ``l``."""
    n = state.n
    if not 1 <= l <= n - 1:
        raise ValueError(f"bond {l} out of range for {n} qubits")
    v = vectorize(state.rho, n).reshape(4**l, 4 ** (n - l))
    return np.linalg.svd(v, compute_uv=False)


def dense_mpo_entropy(state: DenseState, l: int) -> float:
    """Base-2 entropy of the normalized squared operator-Schmidt spectrum."""
    s = operator_schmidt_values(state, l)
    w = s**2
    total = w.sum()
    if total <= 0:
        raise ValueError("zero operator has no entropy")
    p = w[w > 0] / total
    return float(-(p * np.log2(p)).sum())


def dense_probability(state: DenseState, x: Sequence[int]) -> float:
    """``<x|rho|x>`` for a computational-basis bitstring (qubit 1 is the most significant bit)."""
    if len(x) != state.n:
        raise ValueError("bitstring length does not match the state")
    idx = int("".join(str(int(b)) for b in x), 2)
    return float(state.rho[idx, idx].real)


def dense_distribution(state: DenseState) -> np.ndarray:
    """All ``2^n`` output probabilities, ordered like ``itertools.product([0,1], repeat=n)``."""
    return np.real(np.diagonal(state.rho)).copy()


def pure_state_entropy(psi: np.ndarray, l: int) -> float:
    """Von Neumann entropy (bits) of qubits ``1..l`` for a pure state vector."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    n = int(round(np.log2(psi.size)))
    s = np.linalg.svd(psi.reshape(2**l, 2 ** (n - l)), compute_uv=False)
    p = s**2 / np.sum(s**2)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())
