"""Two-site superoperators in the merged (interleaved) vectorized basis.

A density-matrix entry ``rho[i, i']`` of one site is stored at merged index
``I = d*i + i'``.  A two-site channel is a ``d^4 x d^4`` matrix ``M`` with
``M[I1*d^2 + I2, J1*d^2 + J2] = <i1 i2| N(|j1 j2><j1' j2'|) |i1' i2'>``.

The natural way to build a superoperator is in the *grouped* row-major basis,
where ``vec(rho)[i*D + i'] = rho[i, i']`` with ``i = (i1, i2)`` the joint ket
index and ``D = d^2``; there ``vec(U rho U^†) = (U ⊗ U*) vec(rho)``.  The only
place that converts between the two bases is :func:`interleave_permutation`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from noisympo.linalg import kron, unitarity_defect

PAULIS = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@lru_cache(maxsize=None)
def interleave_permutation(d: int = 2, sites: int = 2) -> np.ndarray:
    """Index map from the grouped basis to the interleaved per-site basis.

    Returns ``perm`` with ``perm[interleaved] = grouped``, so that for a
    superoperator ``S`` written in the grouped basis the interleaved matrix
    is ``S[np.ix_(perm, perm)]`` and a grouped vector ``v`` becomes ``v[perm]``.

    Grouped order of the ``2*sites`` digits is ``(i_1..i_k, i'_1..i'_k)``;
    interleaved order is ``(i_1, i'_1, ..., i_k, i'_k)``.
    """
    k = sites
    grouped = np.arange(d ** (2 * k)).reshape((d,) * (2 * k))
    order = [ax for s in range(k) for ax in (s, k + s)]
    perm = grouped.transpose(order).reshape(-1)
    perm.setflags(write=False)
    return perm


def grouped_to_interleaved(s: np.ndarray, d: int = 2, sites: int = 2) -> np.ndarray:
    perm = interleave_permutation(d, sites)
    return np.ascontiguousarray(s[np.ix_(perm, perm)])


def interleaved_to_grouped(m: np.ndarray, d: int = 2, sites: int = 2) -> np.ndarray:
    inv = np.argsort(interleave_permutation(d, sites))
    return np.ascontiguousarray(m[np.ix_(inv, inv)])


@dataclass(frozen=True)
class TwoQubitChannel:
    """Immutable two-site superoperator in the interleaved basis."""

    m: np.ndarray
    d: int = 2

    def __post_init__(self):
        m = np.array(self.m, dtype=np.complex128)
        size = self.d**4
        if m.shape != (size, size):
            raise ValueError(f"superoperator must be {size}x{size}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("superoperator has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def grouped(self) -> np.ndarray:
        """The same map in the grouped row-major basis."""
        return interleaved_to_grouped(self.m, self.d)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_{jj'} |j><j'| ⊗ N(|j><j'|)`` (input factor first)."""
        dim = self.d**2
        s = self.grouped.reshape(dim, dim, dim, dim)  # [i, i', j, j']
        return s.transpose(2, 0, 3, 1).reshape(dim * dim, dim * dim)

    def trace_functional(self) -> np.ndarray:
        """Row vector ``t`` with ``t @ vec(rho) = Tr[rho]`` in the interleaved basis."""
        return np.kron(_site_trace(self.d), _site_trace(self.d))

    def trace_preservation_defect(self) -> float:
        t = self.trace_functional()
        return float(np.max(np.abs(t @ self.m - t)))

    def is_trace_preserving(self, tol: float = 1e-12) -> bool:
        return self.trace_preservation_defect() <= tol

    def min_choi_eigenvalue(self) -> float:
        c = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min())

    def is_completely_positive(self, tol: float = 1e-10) -> bool:
        return self.min_choi_eigenvalue() >= -tol

    def apply_dense(self, rho: np.ndarray) -> np.ndarray:
        """Apply to a 4x4 (``d^2 x d^2``) density matrix."""
        dim = self.d**2
        vec = np.asarray(rho, dtype=np.complex128).reshape(-1)
        return (self.grouped @ vec).reshape(dim, dim)


def _site_trace(d: int) -> np.ndarray:
    t = np.zeros(d * d)
    t[:: d + 1] = 1.0
    return t


def identity_channel(d: int = 2) -> TwoQubitChannel:
    return TwoQubitChannel(np.eye(d**4), d)


def unitary_channel(u: np.ndarray, tol: float = 1e-10) -> TwoQubitChannel:
    """Superoperator of ``rho -> U rho U^†`` for a two-site unitary."""
    u = np.asarray(u, dtype=np.complex128)
    defect = unitarity_defect(u)
    if defect > tol:
        raise ValueError(f"gate is not unitary: ||U^†U - I||_F = {defect:.3e}")
    d = int(round(np.sqrt(u.shape[0])))
    return TwoQubitChannel(grouped_to_interleaved(kron(u, u.conj()), d), d)


def kraus_channel(kraus: Sequence[np.ndarray], d: int = 2) -> TwoQubitChannel:
    """Superoperator ``sum_k K ⊗ K*`` from a list of two-site Kraus operators."""
    s = sum(np.kron(k, np.conj(k)) for k in kraus)
    return TwoQubitChannel(grouped_to_interleaved(np.asarray(s), d), d)


def depolarize2(p: float) -> TwoQubitChannel:
    """Two-qubit depolarizing channel with error rate ``p``.

    Built as ``(1-p) rho + p/15 sum_P P rho P`` over the 15 non-identity
    two-qubit Paulis.  At ``p = 15/16`` every input is sent to ``I/4``.
    """
    if not 0.0 <= p <= 15.0 / 16.0:
        raise ValueError(f"error rate must lie in [0, 15/16], got {p}")
    s = (1.0 - p) * np.eye(16, dtype=np.complex128)
    for a, b in itertools.product("IXYZ", repeat=2):
        if a == b == "I":
            continue
        pp = np.kron(PAULIS[a], PAULIS[b])
        s = s + (p / 15.0) * np.kron(pp, pp.conj())
    return TwoQubitChannel(grouped_to_interleaved(s, 2), 2)


def compose(noise: TwoQubitChannel, gate: TwoQubitChannel) -> TwoQubitChannel:
    """Channel that applies ``gate`` first and then ``noise``."""
    if noise.d != gate.d:
        raise ValueError("channels act on different local dimensions")
    return TwoQubitChannel(noise.m @ gate.m, noise.d)
