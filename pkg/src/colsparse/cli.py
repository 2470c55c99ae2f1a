"""Command-line interface: threshold queries, single recoveries, certificate
searches, figure-reproduction sweeps, and the l1 failure-mode demo."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bench
from .certificates import (
    check_exact_cert,
    check_soft_cert,
    find_exact_cert,
    find_soft_cert,
)
from .operators import sample_gaussian
from .solvers import SolverConfig, solve_l1
from .statdim import ConeParams, exact_threshold, m_soft, mu_colstream

__all__ = ["main"]


def _emit(obj) -> None:
    print(json.dumps(obj))


def _ratio_value(text: str, s: int) -> float:
    if text == "average":
        return 1.0 / s
    if text == "large":
        return 0.9
    return float(text)


def _cmd_statdim(args) -> int:
    ratio = _ratio_value(args.ratio, args.s)
    out = {"k": args.k, "s": args.s, "n": args.n, "alpha": args.alpha, "ratio": ratio}
    if args.alpha == 0.0:
        res = exact_threshold(args.k, args.s, args.n)
    else:
        res = m_soft(
            ConeParams(k=args.k, s=args.s, n=args.n, alpha=args.alpha, weight_ratio=ratio)
        )
    out["m_value"] = res.m_value
    out["tau_star"] = res.tau_star
    out["unimodal"] = res.unimodal
    if args.rank is not None:
        mu = mu_colstream(args.k, args.s, args.n, args.rank)
        out["rank"] = args.rank
        out["mu_value"] = mu.m_value
        out["mu_tau_star"] = mu.tau_star
    _emit(out)
    return 0


def _cmd_recover(args) -> int:
    spec = bench.InstanceSpec(k=args.k, n=args.n, s=args.s, r=args.r, seed=args.seed)
    cfg = SolverConfig(max_iters=args.max_iters)
    rec = bench.run_trial(
        spec,
        args.m,
        args.algorithm,
        solver=cfg,
        tau_thresh=args.tau_thresh,
        streamline_iters=args.iters,
    )
    _emit(rec.to_json_dict())
    return 0


def _cmd_cert(args) -> int:
    spec = bench.InstanceSpec(k=args.k, n=args.n, s=args.s, r=args.r, seed=args.seed)
    inst = bench.generate_instance(spec)
    A = sample_gaussian(spec.k, spec.n, args.m, seed=bench.operator_seed(spec, args.m))
    out = {"spec": spec.digest(), "m": args.m, "kind": args.kind, "seed": args.seed}
    if args.kind == "exact":
        p = find_exact_cert(A, inst.polar, inst.support)
        out["found"] = p is not None
        if p is not None:
            out["report"] = check_exact_cert(A, inst.polar, inst.support, p).to_json_dict()
    else:
        if args.i_star == "largest":
            i_star = int(inst.support[np.argmax(inst.polar.weights[inst.support])])
        else:
            i_star = int(args.i_star)
        p = find_soft_cert(A, inst.polar, inst.support, i_star, args.alpha)
        out["found"] = p is not None
        out["i_star"] = i_star
        if p is not None:
            out["report"] = check_soft_cert(
                A, inst.polar, inst.support, i_star, args.alpha, p
            ).to_json_dict()
    _emit(out)
    return 0


def _cmd_sweep(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    figure = args.figure
    path = os.path.join(args.out, f"{figure}.csv")
    if figure == "fig3":
        rows = bench.fig3_rows(args.grid, args.grid, args.n, math.pi / 10)
    elif figure == "fig4":
        rows = bench.fig4_rows(args.grid, 10, args.n, math.pi / 10)
    elif figure == "fig5":
        alphas = np.linspace(0.0, 1.4, 15)
        rows = bench.fig5_rows(alphas, 10, 10, args.n)
    elif figure == "fig8":
        rows = bench.fig8_rows(args.grid, args.grid, args.n, args.rank)
    elif figure in ("fig6", "fig7"):
        if figure == "fig6":
            algorithms = ["l12", "nast"]
            m_values = args.m or [150, 200, 250, 300]
            base = bench.InstanceSpec(k=10, n=args.n, s=10, r=args.rank, seed=0)
        else:
            algorithms = ["nast", "streamline"]
            m_values = args.m or [110, 125, 140]
            base = bench.InstanceSpec(k=10, n=args.n, s=10, r=max(args.rank, 2), seed=0)
        records = bench.run_sweep(
            algorithms,
            base,
            m_values,
            trials=args.trials,
            master_seed=args.seed,
            out_path=os.path.join(args.out, f"{figure}_records"),
            jobs=args.jobs,
            solver=SolverConfig(max_iters=args.max_iters),
        )
        rows = bench.fig6_rows(records) if figure == "fig6" else bench.fig7_rows(records)
    else:
        raise ValueError(f"unknown figure {figure!r}")
    bench.emit_figure_data(rows, figure, path)
    _emit({"figure": figure, "rows": len(rows), "out": path, "master_seed": args.seed})
    return 0


def _cmd_l1demo(args) -> int:
    """Empirical check that plain l1 minimization does not recover softly:
    whenever the solution is off, it zeroes out some true support entry."""
    rng = np.random.Generator(np.random.Philox(args.seed))
    hits = {"exact": 0, "support_zeroed": 0, "other": 0}
    for t in range(args.instances):
        m = int(rng.integers(args.m_min, args.m_max + 1))
        A = rng.standard_normal((m, args.n))
        z0 = np.zeros(args.n)
        S = rng.choice(args.n, size=args.s, replace=False)
        z0[S] = rng.standard_normal(args.s)
        res = solve_l1(A, A @ z0, SolverConfig(max_iters=8000))
        z = res.Z
        rel = np.linalg.norm(z - z0) / np.linalg.norm(z0)
        if rel <= 1e-2:
            hits["exact"] += 1
        elif np.abs(z[S]).min() < 1e-3 * np.abs(z).max():
            hits["support_zeroed"] += 1
        else:
            hits["other"] += 1
    hits["instances"] = args.instances
    hits["master_seed"] = args.seed
    _emit(hits)
    return 0 if hits["other"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colsparse",
        description="Column-sparse matrix recovery: solvers, certificates, thresholds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("statdim", help="threshold queries")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--ratio", default="average", help="average, large, or a number")
    p.add_argument("--rank", type=int, default=None)
    p.set_defaults(func=_cmd_statdim)

    p = sub.add_parser("recover", help="run one instance with one algorithm")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--algorithm", choices=bench.ALGORITHMS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau-thresh", type=float, default=0.95)
    p.add_argument("--iters", type=int, default=10, help="streamline iterations")
    p.add_argument("--max-iters", type=int, default=20000)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("cert", help="search for a recovery certificate")
    p.add_argument("--kind", choices=["exact", "soft"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=math.pi / 10)
    p.add_argument("--i-star", default="largest")
    p.set_defaults(func=_cmd_cert)

    p = sub.add_parser("sweep", help="reproduce figure data files")
    p.add_argument("--figure", required=True, choices=sorted(bench.FIGURE_COLUMNS))
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--m", type=int, nargs="*", default=None)
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--grid", type=int, nargs="*", default=[5, 10, 15, 20, 25, 30])
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("l1demo", help="l1 alternative demonstration")
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--m-min", type=int, default=15)
    p.add_argument("--m-max", type=int, default=40)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_l1demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
