"""Dense complex linear-algebra kernels used by the MPO code.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg


class SvdError(np.linalg.LinAlgError):
    """Raised when no LAPACK driver manages to converge."""

    def __init__(self, shape: tuple[int, ...]):
        super().__init__(f"SVD did not converge for a {shape[0]}x{shape[1]} matrix")
        self.shape = shape


class SvdResult(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def _as_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a nonempty 2-d array, got shape {a.shape}")
    return a


def svd(a: np.ndarray, check_finite: bool = True) -> SvdResult:
    """Thin SVD with a reproducible phase gauge.

    Singular values come back in descending order. Each left singular vector
    is rotated so that its largest-magnitude entry is real and positive, and
    the matching right vector gets the conjugate phase, so ``u @ diag(s) @ vh``
    is unchanged.

    ``gesdd`` is tried first; on non-convergence the slower but more robust
    ``gesvd`` driver is used before giving up with :class:`SvdError`.
    """
    a = _as_matrix(a)
    if check_finite and not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vh = scipy.linalg.svd(
                a, full_matrices=False, lapack_driver="gesvd", check_finite=False
            )
        except np.linalg.LinAlgError as exc:
            raise SvdError(a.shape) from exc

    # phase gauge: largest |u_ij| in each column made real-positive
    idx = np.argmax(np.abs(u), axis=0)
    pivots = u[idx, np.arange(u.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    u = u * phases.conj()[None, :]
    vh = vh * phases[:, None]
    return SvdResult(u, s, vh)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a ``dim x dim`` unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the phases of ``diag(R)`` divided out
    so the distribution is exactly Haar (Mezzadri's recipe).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``(a ⊗ b)[i*rb + k, j*cb + l] = a[i, j] * b[k, l]``."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    return np.kron(a, b)


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of ``U†U - I``."""
    u = _as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return float("inf")
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))
