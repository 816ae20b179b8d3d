"""Canonical-form MPO for a vectorized n-site density matrix.

The state is stored in Vidal form,

    |rho>> = sum Γ[1]^{I1} λ[1] Γ[2]^{I2} λ[2] ... λ[n-1] Γ[n]^{In} |I1 ... In>>,

with ``gammas[k]`` of shape ``(chi_left, d*d, chi_right)`` (edge bonds have
size 1) and ``lambdas[k]`` holding the Schmidt values of bond ``k+1``.
Bonds and sites are 1-based in the public API, matching the usual notation
``λ[l]`` for the cut between sites ``l`` and ``l+1``.

The Schmidt values are *not* normalized: ``sum λ² = Tr[rho²]`` and truncation
shows up as ``trace(mpo) < 1``.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from noisympo.dense import vectorize
from noisympo.linalg import svd

# Relative floor below which a singular value counts as an exact zero, even
# when the configured truncation tolerance is 0.  Dividing by anything smaller
# only amplifies round-off.
ZERO_FLOOR = 1e-14

# Default relative truncation floor.  Schmidt values much smaller than the
# largest one are stored to relative precision ~eps/ratio only, so their
# Schmidt vectors cannot be kept orthonormal; at 1e-7 the canonical gauge
# holds to ~1e-9 while the dropped weight is below 1e-14 per value.
DEFAULT_TRUNC_TOL = 1e-7


def keep_count(s: np.ndarray, chi: int | None, tol: float) -> int:
    """Number of leading singular values retained under cap ``chi`` and relative floor ``tol``."""
    if s.size == 0 or s[0] <= 0:
        return 0
    floor = max(tol, ZERO_FLOOR) * s[0]
    k = int(np.count_nonzero(s > floor))
    k = max(k, 1)
    if chi is not None:
        k = min(k, chi)
    return k


class Mpo:
    """Vectorized density matrix in canonical MPO form.

    Besides the Vidal tensors an ``Mpo`` keeps a mixed-canonical copy of the
    chain (left- and right-isometric site tensors around an orthogonality
    center).  The update routines work on that copy because its isometries
    stay accurate to machine precision, whereas recovering them from Γ/λ
    means dividing by Schmidt values that may be many orders of magnitude
    below the largest one.  ``gammas`` and ``lambdas`` are rebuilt from the
    chain on first access after an update that left them stale.
    """

    def __init__(
        self,
        gammas: Sequence[np.ndarray],
        lambdas: Sequence[np.ndarray],
        d: int = 2,
        chi_max: int | None = None,
        trunc_tol: float = DEFAULT_TRUNC_TOL,
        validate: bool = True,
    ):
        self.n = len(gammas)
        self.d = d
        self.chi_max = chi_max if chi_max is not None else d ** (2 * (self.n // 2))
        self.trunc_tol = float(trunc_tol)
        self._gammas = [np.asarray(g, dtype=np.complex128) for g in gammas]
        self._lambdas = [np.asarray(s, dtype=np.float64) for s in lambdas]
        self._vidal_ok = True
        # (site tensors, 1-based center), or None until an update needs it
        self._chain: tuple[list[np.ndarray], int] | None = None
        if validate:
            self.validate()

    def validate(self) -> None:
        self.canonicalize()
        n, dd = self.n, self.d * self.d
        if n < 2:
            raise ValueError("an MPO needs at least two sites")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if len(self._lambdas) != n - 1:
            raise ValueError(f"expected {n - 1} bond vectors, got {len(self._lambdas)}")
        for k, g in enumerate(self._gammas):
            if g.ndim != 3 or g.shape[1] != dd:
                raise ValueError(f"site {k + 1}: gamma must have shape (chi, {dd}, chi), got {g.shape}")
            if not np.all(np.isfinite(g)):
                raise ValueError(f"site {k + 1}: non-finite entries")
        if self._gammas[0].shape[0] != 1 or self._gammas[-1].shape[2] != 1:
            raise ValueError("edge bonds must have dimension 1")
        for b, s in enumerate(self._lambdas, start=1):
            if s.ndim != 1 or s.size == 0:
                raise ValueError(f"bond {b}: empty Schmidt vector")
            if np.any(s < 0) or np.any(np.diff(s) > 0):
                raise ValueError(f"bond {b}: Schmidt values must be nonnegative and descending")
            if s.size > self.chi_max:
                raise ValueError(f"bond {b}: dimension {s.size} exceeds chi_max={self.chi_max}")
            if self._gammas[b - 1].shape[2] != s.size or self._gammas[b].shape[0] != s.size:
                raise ValueError(f"bond {b}: dimension mismatch between tensors and λ")

    # representation management -------------------------------------------

    @property
    def is_stale(self) -> bool:
        """True while Γ/λ lag behind the chain (after a fast update)."""
        return not self._vidal_ok

    def canonicalize(self) -> None:
        """Rebuild Γ/λ from the chain if they are stale."""
        if not self._vidal_ok:
            tensors, center = self._chain
            self._gammas, self._lambdas, rights = mixed_to_vidal(tensors, center, self.trunc_tol)
            # the sweep also yields a rank-reduced chain centered on site 1
            self._chain = (rights, 1)
            self._vidal_ok = True

    def chain(self, center: int) -> list[np.ndarray]:
        """Mixed-canonical site tensors with the center moved to ``center`` (shared, not copied)."""
        if self._chain is None:
            self._chain = (vidal_to_mixed(self, center), center)
        tensors, c = self._chain
        move_center(tensors, c, center)
        self._chain = (tensors, center)
        return tensors

    def _set_chain(self, tensors: list[np.ndarray], center: int, vidal_ok: bool) -> None:
        self._chain = (tensors, center)
        self._vidal_ok = vidal_ok

    @property
    def gammas(self) -> list[np.ndarray]:
        self.canonicalize()
        return self._gammas

    @property
    def lambdas(self) -> list[np.ndarray]:
        self.canonicalize()
        return self._lambdas

    def lam(self, b: int) -> np.ndarray:
        """``λ[b]`` for ``b`` in ``0..n``; the two edge bonds are ``[1.0]``."""
        if b == 0 or b == self.n:
            return np.ones(1)
        return self.lambdas[b - 1]

    def gamma(self, site: int) -> np.ndarray:
        return self.gammas[site - 1]

    def set_gamma(self, site: int, g: np.ndarray) -> None:
        """Overwrite one Γ; the stored chain is discarded."""
        self.canonicalize()
        self._gammas[site - 1] = np.asarray(g, dtype=np.complex128)
        self._chain = None

    def set_lam(self, b: int, s: np.ndarray) -> None:
        """Overwrite one λ; the stored chain is discarded."""
        self.canonicalize()
        self._lambdas[b - 1] = np.asarray(s, dtype=np.float64)
        self._chain = None

    @property
    def bond_dims(self) -> list[int]:
        if not self._vidal_ok:
            return [t.shape[2] for t in self._chain[0][:-1]]
        return [s.size for s in self._lambdas]

    def copy(self) -> Mpo:
        self.canonicalize()
        out = Mpo(
            [g.copy() for g in self._gammas],
            [s.copy() for s in self._lambdas],
            d=self.d,
            chi_max=self.chi_max,
            trunc_tol=self.trunc_tol,
            validate=False,
        )
        if self._chain is not None:
            out._chain = ([t.copy() for t in self._chain[0]], self._chain[1])
        return out

    def __repr__(self) -> str:
        return f"Mpo(n={self.n}, d={self.d}, chi_max={self.chi_max}, bond_dims={self.bond_dims})"


# constructors ---------------------------------------------------------------


def product_zero_state(n: int, chi_max: int, trunc_tol: float = DEFAULT_TRUNC_TOL, d: int = 2) -> Mpo:
    """``|0><0|^{⊗n}`` with every bond of dimension 1."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    g = np.zeros((1, d * d, 1), dtype=np.complex128)
    g[0, 0, 0] = 1.0
    return Mpo([g.copy() for _ in range(n)], [np.ones(1) for _ in range(n - 1)], d, chi_max, trunc_tol)


def product_state(site_rhos: Sequence[np.ndarray], chi_max: int | None = None, trunc_tol: float = DEFAULT_TRUNC_TOL) -> Mpo:
    """Product of single-site operators as a bond-dimension-1 canonical MPO."""
    d = np.asarray(site_rhos[0]).shape[0]
    n = len(site_rhos)
    vecs = [np.asarray(r, dtype=np.complex128).reshape(1, d * d, 1) for r in site_rhos]
    norms = [float(np.linalg.norm(v)) for v in vecs]
    total = float(np.prod(norms))
    # every bond carries the full norm; interior Γ's absorb 1/total so the
    # chain Γ λ Γ ... reproduces the product exactly
    gammas = [vecs[0] / norms[0]]
    gammas += [v / (nv * total) for v, nv in zip(vecs[1:-1], norms[1:-1])]
    gammas.append(vecs[-1] / norms[-1])
    return Mpo(gammas, [np.array([total]) for _ in range(n - 1)], d, chi_max, trunc_tol)


def maximally_mixed_state(n: int, chi_max: int | None = None, d: int = 2) -> Mpo:
    """``I^{⊗n} / d^n`` as a bond-dimension-1 MPO."""
    return product_state([np.eye(d) / d] * n, chi_max)


def from_vector(v: np.ndarray, n: int, d: int = 2, chi_max: int | None = None, trunc_tol: float = 0.0) -> Mpo:
    """Canonical MPO of a merged-index tensor ``v[I_1..I_n]`` by sequential SVD."""
    dd = d * d
    rest = np.asarray(v, dtype=np.complex128).reshape(1, -1)
    lefts, lambdas = [], []
    chi_l = 1
    for k in range(n - 1):
        m = rest.reshape(chi_l * dd, -1)
        u, s, vh = svd(m)
        keep = keep_count(s, chi_max, trunc_tol)
        if s[0] <= 0:
            raise ValueError("cannot build an MPO of the zero operator")
        lefts.append(u[:, :keep].reshape(chi_l, dd, keep))
        lambdas.append(s[:keep].copy())
        rest = s[:keep, None] * vh[:keep]
        chi_l = keep
    # rest = λ[n-1] Γ[n]; left tensors are λ[k-1] Γ[k]
    gammas = [lefts[0]]
    for k in range(1, n - 1):
        gammas.append(lefts[k] / lambdas[k - 1][:, None, None])
    gammas.append((rest / lambdas[-1][:, None]).reshape(chi_l, dd, 1))
    return Mpo(gammas, lambdas, d, chi_max, trunc_tol)


def from_dense(rho: np.ndarray, chi_max: int | None = None, trunc_tol: float = 0.0, d: int = 2) -> Mpo:
    """Canonical MPO of a dense ``d^n x d^n`` density matrix."""
    rho = np.asarray(rho)
    n = int(round(np.log(rho.shape[0]) / np.log(d)))
    return from_vector(vectorize(rho, n, d), n, d, chi_max, trunc_tol)


def to_vector(mpo: Mpo) -> np.ndarray:
    """Contract to the full merged tensor (small ``n`` only)."""
    dd = mpo.d**2
    out = mpo.gamma(1).reshape(dd, -1)
    for k in range(2, mpo.n + 1):
        out = out * mpo.lam(k - 1)[None, :]
        g = mpo.gamma(k)
        out = (out @ g.reshape(g.shape[0], -1)).reshape(-1, g.shape[2])
    return out.reshape((dd,) * mpo.n)


def to_dense(mpo: Mpo) -> np.ndarray:
    from noisympo.dense import devectorize

    return devectorize(to_vector(mpo), mpo.n, mpo.d)


# observables ----------------------------------------------------------------


def schmidt_entropy(s: np.ndarray) -> float:
    """Base-2 Shannon entropy of the normalized squared spectrum ``s``."""
    w = np.asarray(s, dtype=np.float64) ** 2
    total = w.sum()
    if not total > 0:
        raise ValueError("all Schmidt values vanish; entropy undefined")
    p = w[w > 0] / total
    return float(max(0.0, -(p * np.log2(p)).sum()))


def mpo_entanglement_entropy(mpo: Mpo, l: int) -> float:
    if not 1 <= l <= mpo.n - 1:
        raise ValueError(f"bond {l} out of range 1..{mpo.n - 1}")
    return schmidt_entropy(mpo.lam(l))


def entropy_profile(mpo: Mpo) -> np.ndarray:
    """Entropies at bonds ``1..n-1``."""
    return np.array([schmidt_entropy(s) for s in mpo.lambdas])


def max_mpo_entropy(mpo: Mpo) -> tuple[float, int]:
    """Largest bond entropy and its (smallest, 1-based) bond index."""
    prof = entropy_profile(mpo)
    b = int(np.argmax(prof))
    return float(prof[b]), b + 1


def _diag_slices(g: np.ndarray, d: int) -> np.ndarray:
    # physical indices (d+1)*x, i.e. the |x><x| components
    return g[:, :: d + 1, :]


def probability(mpo: Mpo, x: Sequence[int], tol: float = 1e-9) -> float:
    """``<x|rho|x>`` via one chain contraction; may be slightly negative after truncation."""
    if len(x) != mpo.n:
        raise ValueError(f"bitstring has length {len(x)}, MPO has {mpo.n} sites")
    d = mpo.d
    vec = np.ones(1, dtype=np.complex128)
    for k in range(1, mpo.n + 1):
        xk = int(x[k - 1])
        if not 0 <= xk < d:
            raise ValueError(f"digit {xk} out of range for d={d}")
        vec = (vec * mpo.lam(k - 1)) @ mpo.gamma(k)[:, (d + 1) * xk, :]
    val = complex(vec[0])
    if abs(val.imag) > tol:
        raise ArithmeticError(f"probability has imaginary part {val.imag:.3e}")
    return val.real


def all_probabilities(mpo: Mpo) -> np.ndarray:
    """Every output probability, in lexicographic bitstring order (small ``n``)."""
    d = mpo.d
    out = np.ones((1, 1), dtype=np.complex128)
    for k in range(1, mpo.n + 1):
        g = _diag_slices(mpo.gamma(k), d)  # (a, x, b)
        out = np.einsum("sa,axb->sxb", out * mpo.lam(k - 1)[None, :], g).reshape(-1, g.shape[2])
    return out[:, 0].real


def _summed_site(g: np.ndarray, d: int) -> np.ndarray:
    return _diag_slices(g, d).sum(axis=1)


def trace(mpo: Mpo) -> float:
    """``Tr[rho]``: the probability mass the MPO still carries."""
    vec = np.ones(1, dtype=np.complex128)
    for k in range(1, mpo.n + 1):
        vec = (vec * mpo.lam(k - 1)) @ _summed_site(mpo.gamma(k), mpo.d)
    return float(vec[0].real)


def right_trace_environments(mpo: Mpo) -> list[np.ndarray]:
    """``env[k]`` is the trace functional applied to sites ``k..n`` (index 1-based, ``env[n+1] = [1]``)."""
    env: list[np.ndarray] = [np.ones(1)] * (mpo.n + 2)
    vec = np.ones(1, dtype=np.complex128)
    for k in range(mpo.n, 0, -1):
        vec = _summed_site(mpo.gamma(k), mpo.d) @ (mpo.lam(k) * vec)
        env[k] = vec
    return env


def sample(mpo: Mpo, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw bitstrings site by site from the marginal/conditional chain.

    Returns an int array of shape ``(n,)`` or ``(size, n)``.  Negative
    conditional weights produced by truncation are clamped to zero before
    renormalizing.
    """
    shots = 1 if size is None else int(size)
    d, n = mpo.d, mpo.n
    renv = right_trace_environments(mpo)
    left = np.ones((shots, 1), dtype=np.complex128)
    out = np.empty((shots, n), dtype=np.int64)
    rows = np.arange(shots)
    for k in range(1, n + 1):
        g = _diag_slices(mpo.gamma(k), d)
        t = np.einsum("sa,axb->sxb", left * mpo.lam(k - 1)[None, :], g)
        w = (t @ (mpo.lam(k) * renv[k + 1])).real
        w = np.clip(w, 0.0, None)
        mass = w.sum(axis=1)
        if np.any(mass <= 0):
            raise ValueError(f"conditional distribution at site {k} has no probability mass")
        cdf = np.cumsum(w / mass[:, None], axis=1)
        u = rng.random(shots)
        xk = np.minimum((u[:, None] > cdf).sum(axis=1), d - 1)
        out[:, k - 1] = xk
        # rescale by the chosen weight so the left vector stays O(1)
        left = t[rows, xk, :] / w[rows, xk][:, None]
    return out[0] if size is None else out


def canonical_defect(mpo: Mpo) -> float:
    """Largest ``||G - I||_F`` over the left and right Gram matrices of every bond."""
    n = mpo.n
    worst = 0.0
    gram = np.ones((1, 1), dtype=np.complex128)
    for k in range(1, n):
        a = mpo.lam(k - 1)[:, None, None] * mpo.gamma(k)
        gram = np.einsum("aib,ac,cid->bd", a.conj(), gram, a, optimize=True)
        worst = max(worst, float(np.linalg.norm(gram - np.eye(gram.shape[0]))))
    gram = np.ones((1, 1), dtype=np.complex128)
    for k in range(n, 1, -1):
        b = mpo.gamma(k) * mpo.lam(k)[None, None, :]
        gram = np.einsum("aib,bd,cid->ac", b.conj(), gram, b, optimize=True)
        worst = max(worst, float(np.linalg.norm(gram - np.eye(gram.shape[0]))))
    return worst


# mixed-canonical <-> Vidal -----------------------------------------------------


def vidal_to_mixed(mpo: Mpo, center: int) -> list[np.ndarray]:
    """Site tensors with sites left of ``center`` left-isometric and right of it right-isometric."""
    out = []
    for k in range(1, mpo.n + 1):
        g = mpo.gamma(k)
        if k < center:
            out.append(mpo.lam(k - 1)[:, None, None] * g)
        elif k > center:
            out.append(g * mpo.lam(k)[None, None, :])
        else:
            out.append(mpo.lam(k - 1)[:, None, None] * g * mpo.lam(k)[None, None, :])
    return out


def move_center(tensors: list[np.ndarray], center: int, target: int) -> int:
    """Shift the orthogonality center in place with QR/LQ steps; returns ``target``."""
    while center < target:
        t = tensors[center - 1]
        cl, dd, cr = t.shape
        q, r = np.linalg.qr(t.reshape(cl * dd, cr))
        tensors[center - 1] = q.reshape(cl, dd, q.shape[1])
        tensors[center] = np.tensordot(r, tensors[center], axes=(1, 0))
        center += 1
    while center > target:
        t = tensors[center - 1]
        cl, dd, cr = t.shape
        q, r = np.linalg.qr(t.reshape(cl, dd * cr).conj().T)
        tensors[center - 1] = q.conj().T.reshape(q.shape[1], dd, cr)
        tensors[center - 2] = np.tensordot(tensors[center - 2], r.conj().T, axes=(2, 0))
        center -= 1
    return center


def gamma_from_forms(a_form: np.ndarray, b_form: np.ndarray, lam_left: np.ndarray, lam_right: np.ndarray) -> np.ndarray:
    """Γ from its left form ``λ_left Γ`` and right form ``Γ λ_right`` (same gauge).

    Each entry is divided by the larger of its two Schmidt values, so both
    ``λ_left Γ`` and ``Γ λ_right`` recomputed from the result stay accurate to
    round-off even when the spectra span many decades.
    """
    den_l = lam_left[:, None, None]
    den_r = lam_right[None, None, :]
    use_right = den_r >= den_l
    return np.where(use_right, b_form / den_r, a_form / den_l)


def _svd_sweep(tensors: list[np.ndarray], center: int, trunc_tol: float):
    # one right-to-left pass over a chain; returns Γ's, λ's, the swept chain
    # (center on site 1, others right-isometric) and whether anything was dropped
    tensors = list(tensors)
    n = len(tensors)
    move_center(tensors, center, n)
    lambdas: list[np.ndarray] = [np.ones(1)] * (n - 1)
    gammas: list[np.ndarray] = [np.ones(1)] * n
    rights: list[np.ndarray] = [np.ones(1)] * n
    dropped = False
    # left-isometric site tensor with its right bond already rotated into the
    # new Schmidt basis, and that bond's Schmidt values
    left_iso, s_right = tensors[n - 1], np.ones(1)
    for k in range(n, 1, -1):
        cl, dd, cr = left_iso.shape
        u, s, vh = svd((left_iso * s_right[None, None, :]).reshape(cl, dd * cr))
        keep = keep_count(s, None, trunc_tol)
        dropped |= keep < s.size
        u, s = u[:, :keep], s[:keep].copy()
        rights[k - 1] = vh[:keep].reshape(keep, dd, cr)
        a_form = np.tensordot(u.conj().T, left_iso, axes=(1, 0))
        gammas[k - 1] = gamma_from_forms(a_form, rights[k - 1], s, s_right)
        lambdas[k - 2] = s
        left_iso, s_right = np.tensordot(tensors[k - 2], u, axes=(2, 0)), s
    gammas[0] = left_iso
    rights[0] = left_iso * s_right[None, None, :]
    return gammas, lambdas, rights, dropped


def mixed_to_vidal(
    tensors: list[np.ndarray], center: int, trunc_tol: float
) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Rebuild Γ/λ from a mixed-canonical chain by right-to-left SVD sweeps.

    Dropping a Schmidt value at one bond perturbs the decomposition of the
    bonds already swept, so a sweep that dropped anything is repeated on its
    own (rank-reduced) output until one passes without dropping; every
    repeat lowers the total rank, so this terminates.  Also
    returns that final chain (center on site 1, other sites right-isometric).
    The input list is left untouched.
    """
    gammas, lambdas, rights, dropped = _svd_sweep(tensors, center, trunc_tol)
    while dropped:
        gammas, lambdas, rights, dropped = _svd_sweep(rights, 1, trunc_tol)
    return gammas, lambdas, rights


# checkpoint I/O ---------------------------------------------------------------

MAGIC = b"NMPO"
FORMAT_VERSION = 1


def save_mpo(mpo: Mpo, path: str | Path) -> None:
    """Write a self-describing little-endian binary checkpoint.

    Layout: magic ``NMPO``, u16 version, u32 n, u32 d, u32 chi_max,
    f64 trunc_tol, then per site three u32 dims followed by the tensor as
    interleaved (re, im) f64 pairs in C order, then per bond a u32 length
    and that many f64 Schmidt values.
    """
    mpo.canonicalize()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HIIId", FORMAT_VERSION, mpo.n, mpo.d, mpo.chi_max, mpo.trunc_tol))
        for g in mpo.gammas:
            fh.write(struct.pack("<III", *g.shape))
            fh.write(np.ascontiguousarray(g, dtype="<c16").tobytes())
        for s in mpo.lambdas:
            fh.write(struct.pack("<I", s.size))
            fh.write(np.ascontiguousarray(s, dtype="<f8").tobytes())


def load_mpo(path: str | Path) -> Mpo:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an MPO checkpoint")
    off = 4
    version, n, d, chi_max, tol = struct.unpack_from("<HIIId", data, off)
    off += struct.calcsize("<HIIId")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    gammas, lambdas = [], []
    for _ in range(n):
        shape = struct.unpack_from("<III", data, off)
        off += 12
        count = int(np.prod(shape))
        gammas.append(np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape(shape).astype(np.complex128))
        off += 16 * count
    for _ in range(n - 1):
        (size,) = struct.unpack_from("<I", data, off)
        off += 4
        lambdas.append(np.frombuffer(data, dtype="<f8", count=size, offset=off).astype(np.float64))
        off += 8 * size
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    return Mpo(gammas, lambdas, d, chi_max, tol)
