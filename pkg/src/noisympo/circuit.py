"""Noisy brickwork random circuits: realizations, ensembles and post-processing.

A depth-``t`` layer applies fresh Haar-random two-qubit gates followed by
two-qubit depolarization on bonds ``1, 3, ..., n-1`` (odd ``t``) or
``2, 4, ..., n-2`` (even ``t``), in ascending bond order.  Entropy profiles
are averaged over realizations first and maximized over bonds second.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from noisympo.channels import TwoQubitChannel, compose, depolarize2, unitary_channel
from noisympo.linalg import haar_unitary
from noisympo.mpo import DEFAULT_TRUNC_TOL, Mpo, entropy_profile, product_zero_state, trace
from noisympo.update import UpdateStats, apply_two_site, apply_two_site_fast

CSV_COLUMNS = ("realization", "depth", "bond", "entropy", "trace", "discarded_weight")
AGGREGATE_COLUMNS = ("p", "n", "chi", "depth", "bond", "mean_entropy", "mean_trace")

# round-off allowance when checking trace bookkeeping
TRACE_SLACK = 1e-9


class InvariantError(RuntimeError):
    """A trajectory violated a property that must hold for any valid run."""


@dataclass(frozen=True)
class CircuitConfig:
    n: int
    depth_max: int
    p: float
    chi: int
    n_samples: int = 1
    master_seed: int = 0
    trunc_tol: float = DEFAULT_TRUNC_TOL
    fast_path: bool = False

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if self.depth_max < 1:
            raise ValueError("depth_max must be >= 1")
        if not 0.0 <= self.p <= 15.0 / 16.0:
            raise ValueError(f"p must lie in [0, 15/16], got {self.p}")
        if self.chi < 1:
            raise ValueError("chi must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.trunc_tol < 0:
            raise ValueError("trunc_tol must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> CircuitConfig:
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str, **overrides) -> CircuitConfig:
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values: dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = _parse_value(val, types[key], key)
        values.update({k: v for k, v in overrides.items() if v is not None})
        missing = [k for k in ("n", "depth_max", "p", "chi") if k not in values]
        if missing:
            raise ValueError(f"missing config keys: {', '.join(missing)}")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides) -> CircuitConfig:
        return cls.from_text(Path(path).read_text(), **overrides)


def _parse_value(val: str, typ: str, key: str):
    try:
        if typ == "bool":
            low = val.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(val)
        if typ == "int":
            return int(val, 0)
        return float(val)
    except ValueError:
        raise ValueError(f"bad value for {key}: {val!r}") from None


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one realization, independent of run order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, index])))


def layer_bonds(n: int, t: int) -> range:
    """Bonds hit at depth ``t`` (1-based): odd layers start at bond 1, even at bond 2."""
    return range(1, n, 2) if t % 2 else range(2, n - 1, 2)


def brickwork_gates(
    n: int, depth: int, p: float, rng: np.random.Generator
) -> Iterator[tuple[int, int, TwoQubitChannel]]:
    """Yield ``(depth, bond, channel)`` in application order; unitaries drawn in that order."""
    noise = depolarize2(p)
    for t in range(1, depth + 1):
        for l in layer_bonds(n, t):
            yield t, l, compose(noise, unitary_channel(haar_unitary(4, rng)))


def circuit_gates(cfg: CircuitConfig, index: int) -> Iterator[tuple[int, int, TwoQubitChannel]]:
    """Gate sequence of realization ``index``."""
    return brickwork_gates(cfg.n, cfg.depth_max, cfg.p, realization_rng(cfg.master_seed, index))


@dataclass
class Trajectory:
    index: int
    entropy: np.ndarray  # (depth_max, n-1)
    trace: np.ndarray  # (depth_max,)
    discarded_weight: np.ndarray  # (depth_max,), summed over the layer's gates
    trace_loss: np.ndarray  # (depth_max,), trace carried by the dropped triplets
    mid_spectrum: list[np.ndarray]  # λ at bond n/2 after each layer
    gate_stats: list[UpdateStats] = field(default_factory=list)
    final_state: Mpo | None = None

    @property
    def max_trace_increase(self) -> float:
        """Largest layer-to-layer rise of the trace (0 if it never rises).

        Truncation keeps the Frobenius-dominant part of the state; the
        dropped part has nonnegative weight but its trace can have either
        sign, so small rises are possible.
        """
        steps = np.diff(np.concatenate([[1.0], self.trace]))
        return float(max(0.0, steps.max()))


def run_realization(cfg: CircuitConfig, index: int, keep_state: bool = False) -> Trajectory:
    """Evolve ``|0..0><0..0|`` through one noisy random circuit."""
    mpo = product_zero_state(cfg.n, cfg.chi, cfg.trunc_tol)
    update = apply_two_site_fast if cfg.fast_path else apply_two_site
    D, n = cfg.depth_max, cfg.n
    ent = np.zeros((D, n - 1))
    tr = np.zeros(D)
    disc = np.zeros(D)
    loss = np.zeros(D)
    spectra: list[np.ndarray] = []
    gate_stats: list[UpdateStats] = []
    prev_trace = 1.0
    for t, l, ch in circuit_gates(cfg, index):
        st = update(mpo, ch, l)
        gate_stats.append(st)
        disc[t - 1] += st.discarded_weight
        loss[t - 1] += st.trace_loss
        if l == max(layer_bonds(n, t)):
            ent[t - 1] = entropy_profile(mpo)
            tr[t - 1] = trace(mpo)
            spectra.append(mpo.lam(n // 2).copy())
            # channels preserve the trace, so every change must come from truncation
            if abs(prev_trace - tr[t - 1] - loss[t - 1]) > TRACE_SLACK:
                raise InvariantError(
                    f"realization {index}, depth {t}: trace changed by {prev_trace - tr[t - 1]:.3e} "
                    f"but truncation accounts for {loss[t - 1]:.3e}"
                )
            prev_trace = tr[t - 1]
    return Trajectory(index, ent, tr, disc, loss, spectra, gate_stats, mpo if keep_state else None)


@dataclass
class EnsembleResult:
    config: CircuitConfig
    mean_entropy: np.ndarray  # (depth_max, n-1), averaged over realizations
    mean_trace: np.ndarray
    min_trace: np.ndarray
    realization_max: np.ndarray  # (n_samples, depth_max), diagnostics only
    mid_spectra: list[list[np.ndarray]]  # [realization][depth]

    @property
    def s_max(self) -> np.ndarray:
        """Bond maximum of the averaged profile at each depth."""
        return self.mean_entropy.max(axis=1)

    @property
    def d_star(self) -> int:
        """Depth (1-based) where ``s_max`` peaks; earliest on ties."""
        return int(np.argmax(self.s_max)) + 1

    @property
    def s_star(self) -> float:
        return float(self.s_max.max())


def _run_one(args: tuple[CircuitConfig, int]) -> Trajectory:
    cfg, idx = args
    traj = run_realization(cfg, idx)
    traj.gate_stats = []  # keep inter-process payloads small
    return traj


def run_trajectories(cfg: CircuitConfig, workers: int = 1) -> list[Trajectory]:
    jobs = [(cfg, i) for i in range(cfg.n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(_run_one, jobs))
    else:
        trajs = [_run_one(j) for j in jobs]
    return sorted(trajs, key=lambda tr: tr.index)


def summarize(cfg: CircuitConfig, trajs: Sequence[Trajectory]) -> EnsembleResult:
    trajs = sorted(trajs, key=lambda tr: tr.index)
    ent = np.stack([tr.entropy for tr in trajs])
    traces = np.stack([tr.trace for tr in trajs])
    return EnsembleResult(
        config=cfg,
        mean_entropy=ent.mean(axis=0),
        mean_trace=traces.mean(axis=0),
        min_trace=traces.min(axis=0),
        realization_max=ent.max(axis=2),
        mid_spectra=[tr.mid_spectrum for tr in trajs],
    )


def run_ensemble(cfg: CircuitConfig, workers: int = 1) -> EnsembleResult:
    """Average ``n_samples`` realizations; results do not depend on ``workers``."""
    return summarize(cfg, run_trajectories(cfg, workers))


# reference values and fits -----------------------------------------------------


def page_entropy(m: int, nn: int) -> float:
    """Mean entanglement entropy (bits) of a Haar-random pure state on ``m x nn`` dimensions."""
    if not 1 <= m <= nn:
        raise ValueError(f"need 1 <= m <= nn, got m={m}, nn={nn}")
    harmonic = math.fsum(1.0 / k for k in range(nn + 1, m * nn + 1))
    return (harmonic - (m - 1) / (2 * nn)) * math.log2(math.e)


@dataclass(frozen=True)
class HeuristicFit:
    a: float
    b: float
    alpha: float
    a_stderr: float
    b_stderr: float
    # exponent read off D*(p) ∝ p^(-1/alpha), when peak depths were given
    alpha_from_depth: float | None = None
    alpha_from_depth_stderr: float | None = None


def _loglog(points: Sequence[tuple[float, float]], what: str):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{what}: expected (p, value) pairs")
    if np.any(arr <= 0):
        raise ValueError(f"{what}: p and values must be positive for a log-log fit")
    if np.unique(arr[:, 0]).size < 3:
        raise ValueError(f"{what}: need at least 3 distinct p values, got {np.unique(arr[:, 0]).size}")
    return stats.linregress(np.log(arr[:, 0]), np.log(arr[:, 1]))


def fit_heuristic(
    s_points: Sequence[tuple[float, float]],
    d_points: Sequence[tuple[float, float]] | None = None,
) -> HeuristicFit:
    """Least-squares fit of ``S* = a p^-b`` in log-log space, ``alpha = 1/b``.

    With ``d_points`` the peak depths are fitted to ``D* ∝ p^(-1/alpha)`` as
    an independent estimate of the same exponent.
    """
    res = _loglog(s_points, "S* fit")
    a, b = math.exp(res.intercept), -res.slope
    if b == 0:
        raise ValueError("S* fit: zero exponent, alpha undefined")
    alpha_d = alpha_d_err = None
    if d_points is not None:
        rd = _loglog(d_points, "D* fit")
        if rd.slope == 0:
            raise ValueError("D* fit: zero slope, alpha undefined")
        alpha_d = -1.0 / rd.slope
        alpha_d_err = rd.stderr / rd.slope**2
    return HeuristicFit(a, b, 1.0 / b, a * res.intercept_stderr, res.stderr, alpha_d, alpha_d_err)


# output files -------------------------------------------------------------------


def write_trajectories_csv(path: str | os.PathLike, trajs: Sequence[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for tr in sorted(trajs, key=lambda t: t.index):
            for t in range(tr.entropy.shape[0]):
                for b in range(tr.entropy.shape[1]):
                    w.writerow([tr.index, t + 1, b + 1, repr(float(tr.entropy[t, b])), repr(float(tr.trace[t])),
                                repr(float(tr.discarded_weight[t]))])


def write_aggregate_csv(path: str | os.PathLike, result: EnsembleResult) -> None:
    cfg = result.config
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for t in range(result.mean_entropy.shape[0]):
            for b in range(result.mean_entropy.shape[1]):
                w.writerow([cfg.p, cfg.n, cfg.chi, t + 1, b + 1, repr(float(result.mean_entropy[t, b])),
                            repr(float(result.mean_trace[t]))])


def read_aggregate_csv(path: str | os.PathLike) -> tuple[float, int, int, np.ndarray, np.ndarray]:
    """Return ``(p, n, chi, mean_entropy[depth, bond], mean_trace[depth])``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty aggregate file")
    if set(AGGREGATE_COLUMNS) - set(rows[0]):
        raise ValueError(f"{path}: missing columns {sorted(set(AGGREGATE_COLUMNS) - set(rows[0]))}")
    p, n, chi = float(rows[0]["p"]), int(rows[0]["n"]), int(rows[0]["chi"])
    depth = max(int(r["depth"]) for r in rows)
    ent = np.zeros((depth, n - 1))
    tr = np.zeros(depth)
    for r in rows:
        t, b = int(r["depth"]) - 1, int(r["bond"]) - 1
        ent[t, b] = float(r["mean_entropy"])
        tr[t] = float(r["mean_trace"])
    return p, n, chi, ent, tr


def write_gnuplot_script(csv_path: str | os.PathLike, aggregate: bool = True) -> Path:
    """Emit ``<csv>.gp`` next to the CSV; plots entropy against depth per bond."""
    csv_path = Path(csv_path)
    script = csv_path.with_suffix(csv_path.suffix + ".gp")
    ycol = "mean_entropy" if aggregate else "entropy"
    script.write_text(
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set xlabel 'depth'\n"
        "set ylabel 'MPO entanglement entropy (bits)'\n"
        f"set terminal pngcairo size 900,600\nset output '{csv_path.stem}.png'\n"
        f"plot '{csv_path.name}' using (column('depth')):(column('{ycol}')):(column('bond')) "
        "with points palette pt 7 ps 0.6 title 'S_l'\n"
    )
    return script
