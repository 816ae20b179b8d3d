"""Command-line front end: ``noisympo {run,sweep,sample,oracle-check,fit}``.

Every subcommand exits with status 0 only when its invariant checks pass.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from noisympo import dense
from noisympo.circuit import (
    CircuitConfig,
    InvariantError,
    Trajectory,
    brickwork_gates,
    fit_heuristic,
    read_aggregate_csv,
    realization_rng,
    run_realization,
    summarize,
    write_aggregate_csv,
    write_gnuplot_script,
    write_trajectories_csv,
)
from noisympo.mpo import (
    all_probabilities,
    canonical_defect,
    entropy_profile,
    load_mpo,
    product_zero_state,
    sample,
    save_mpo,
    trace,
)
from noisympo.update import apply_two_site, apply_two_site_fast

log = logging.getLogger("noisympo")

# tolerance for the post-run canonical-gauge check
DEFECT_LIMIT = 1e-8


def _add_config_flags(p: argparse.ArgumentParser, many: bool = False) -> None:
    p.add_argument("--config", type=Path, help="key = value file with CircuitConfig fields")
    if many:
        p.add_argument("--n", type=int, nargs="+", dest="n_list", help="qubit counts to sweep")
        p.add_argument("--p", type=float, nargs="+", dest="p_list", help="error rates to sweep")
    else:
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=float)
    p.add_argument("--depth-max", type=int, dest="depth_max")
    p.add_argument("--chi", type=int)
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--trunc-tol", type=float, dest="trunc_tol")
    p.add_argument("--fast-path", action=argparse.BooleanOptionalAction, dest="fast_path", default=None)
    p.add_argument("--seed", type=lambda s: int(s, 0), required=True, dest="master_seed",
                   help="master seed (64-bit); required for reproducibility")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _config(args: argparse.Namespace, **fixed) -> CircuitConfig:
    names = ("n", "p", "depth_max", "chi", "n_samples", "trunc_tol", "fast_path", "master_seed")
    overrides = {k: getattr(args, k, None) for k in names}
    overrides.update(fixed)
    text = args.config.read_text() if args.config else ""
    return CircuitConfig.from_text(text, **overrides)


def _check_trajectories(trajs: Sequence[Trajectory]) -> list[str]:
    problems = []
    for tr in trajs:
        if not np.all(np.isfinite(tr.entropy)) or np.any(tr.entropy < 0):
            problems.append(f"realization {tr.index}: invalid entropy values")
        if not np.all(np.isfinite(tr.trace)) or np.any(tr.trace <= 0):
            problems.append(f"realization {tr.index}: trace is not positive")
    return problems


def _run_config(cfg: CircuitConfig, out: Path, save_state: Path | None = None) -> tuple[list[str], object]:
    out.mkdir(parents=True, exist_ok=True)
    trajs, problems = [], []
    for i in range(cfg.n_samples):
        try:
            tr = run_realization(cfg, i, keep_state=True)
        except InvariantError as exc:
            problems.append(str(exc))
            continue
        defect = canonical_defect(tr.final_state)
        if defect > DEFECT_LIMIT:
            problems.append(f"realization {i}: canonical defect {defect:.2e}")
        if save_state is not None and i == 0:
            save_mpo(tr.final_state, save_state)
        tr.final_state = None
        tr.gate_stats = []
        trajs.append(tr)
        log.info("realization %d/%d done", i + 1, cfg.n_samples)
    problems += _check_trajectories(trajs)
    if not trajs:
        return problems, None
    result = summarize(cfg, trajs)
    stem = f"n{cfg.n}_p{cfg.p:g}_chi{cfg.chi}"
    traj_csv = out / f"{stem}_trajectories.csv"
    agg_csv = out / f"{stem}_aggregate.csv"
    write_trajectories_csv(traj_csv, trajs)
    write_aggregate_csv(agg_csv, result)
    write_gnuplot_script(traj_csv, aggregate=False)
    write_gnuplot_script(agg_csv)
    return problems, result


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    problems, result = _run_config(cfg, args.out, args.save_state)
    if result is not None:
        print(f"n={cfg.n} p={cfg.p:g} chi={cfg.chi} N_s={cfg.n_samples}: "
              f"D*={result.d_star} S*_max={result.s_star:.4f} min trace={result.min_trace.min():.6f}")
    return _report(problems)


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _config(args, n=(args.n_list or [None])[0], p=(args.p_list or [None])[0])
    ns = args.n_list or [base.n]
    ps = args.p_list or [base.p]
    args.out.mkdir(parents=True, exist_ok=True)
    problems: list[str] = []
    summary = args.out / "sweep_summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "n", "chi", "d_star", "s_star", "min_trace"])
        for n in ns:
            for p in ps:
                cfg = base.replace(n=n, p=p)
                probs, result = _run_config(cfg, args.out)
                problems += probs
                if result is not None:
                    w.writerow([p, n, cfg.chi, result.d_star, repr(result.s_star), repr(float(result.min_trace.min()))])
                    print(f"n={n} p={p:g}: D*={result.d_star} S*_max={result.s_star:.4f}")
    return _report(problems)


def cmd_sample(args: argparse.Namespace) -> int:
    mpo = load_mpo(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    shots = sample(mpo, rng, size=args.shots)
    lines = ["".join(map(str, row)) for row in shots]
    if args.output:
        args.output.write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    problems = []
    t = trace(mpo)
    if not t > 0:
        problems.append(f"checkpoint trace {t} is not positive")
    return _report(problems)


def cmd_oracle_check(args: argparse.Namespace) -> int:
    problems = []
    checked = 0
    for n in args.n:
        for p in args.p:
            for c in range(args.circuits):
                rng = realization_rng(args.seed, c)
                err_p, err_s = oracle_errors(n, brickwork_gates(n, args.depth, p, rng), args.fast_path)
                checked += 1
                if err_p > 1e-9 or err_s > 1e-8:
                    problems.append(f"n={n} p={p} circuit {c}: prob err {err_p:.2e}, entropy err {err_s:.2e}")
    print(f"{checked} circuits checked against the dense simulator")
    return _report(problems)


def oracle_errors(n: int, gates, fast_path: bool = False) -> tuple[float, float]:
    """Largest probability and bond-entropy deviations from the dense simulator at full χ."""
    update = apply_two_site_fast if fast_path else apply_two_site
    mpo = product_zero_state(n, 4 ** (n // 2), trunc_tol=0.0)
    state = dense.zero_state(n)
    for _, l, ch in gates:
        update(mpo, ch, l)
        state = dense.dense_apply(state, ch, l)
    err_p = float(np.max(np.abs(all_probabilities(mpo) - dense.dense_distribution(state))))
    prof = entropy_profile(mpo)
    err_s = max(abs(prof[b - 1] - dense.dense_mpo_entropy(state, b)) for b in range(1, n))
    return err_p, float(err_s)


def cmd_fit(args: argparse.Namespace) -> int:
    s_points, d_points = [], []
    for path in args.aggregates:
        p, n, chi, ent, _ = read_aggregate_csv(path)
        s_max = ent.max(axis=1)
        s_points.append((p, float(s_max.max())))
        d_points.append((p, float(np.argmax(s_max) + 1)))
        print(f"{path}: p={p:g} n={n} chi={chi} D*={d_points[-1][1]:g} S*_max={s_points[-1][1]:.4f}")
    try:
        fit = fit_heuristic(s_points, d_points)
    except ValueError as exc:
        return _report([str(exc)])
    print(f"S* = {fit.a:.4f} * p^-{fit.b:.4f}  (stderr a {fit.a_stderr:.3g}, b {fit.b_stderr:.3g})")
    print(f"alpha = {fit.alpha:.4f} from S*, {fit.alpha_from_depth:.4f} ± {fit.alpha_from_depth_stderr:.3g} from D*")
    return 0


def _report(problems: Sequence[str]) -> int:
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisympo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one ensemble")
    _add_config_flags(p)
    p.add_argument("--save-state", type=Path, help="checkpoint the final MPO of realization 0")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run ensembles over a grid of p and n")
    _add_config_flags(p, many=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="draw bitstrings from a checkpointed MPO")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("--shots", type=int, default=10)
    p.add_argument("--seed", type=lambda s: int(s, 0), required=True)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle-check", help="compare the MPO pipeline with the dense simulator")
    p.add_argument("--n", type=int, nargs="+", default=[2, 4, 6])
    p.add_argument("--p", type=float, nargs="+", default=[0.0, 0.1])
    p.add_argument("--circuits", type=int, default=5)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0)
    p.add_argument("--fast-path", action="store_true")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("fit", help="fit S* = a p^-b from aggregate CSVs")
    p.add_argument("aggregates", type=Path, nargs="+")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
