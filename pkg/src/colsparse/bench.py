"""Instance generation, experiment sweeps, success metrics, and persistence.

Trials are fully reproducible: an instance is a pure function of its spec, the
operator seed is derived from ``(spec.seed, m)``, and the solvers are
deterministic, so any record can be regenerated bit-consistently from
``(spec, m, algorithm)``.  Sweeps derive per-trial spec seeds from a master
seed that is always written into the output metadata.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .certificates import RangePartition, build_range_partition
from .core import PolarMatrix, Subspace, polar_decompose
from .operators import MeasurementOp, sample_gaussian
from .recovery import NastConfig, StreamlineConfig, column_streamline, nast
from .solvers import SolveResult, SolverConfig, solve_l12, solve_nuclear_on_support
from .statdim import ConeParams, exact_threshold, m_soft, mu_colstream

__all__ = [
    "ALGORITHMS",
    "Instance",
    "InstanceSpec",
    "TrialRecord",
    "emit_figure_data",
    "fig3_rows",
    "fig4_rows",
    "fig5_rows",
    "fig6_rows",
    "fig7_rows",
    "fig8_rows",
    "generate_instance",
    "records_to_csv",
    "run_sweep",
    "run_trial",
]

SUCCESS_THRESHOLD = 1e-3
ALGORITHMS = ("l12", "nast", "streamline", "nuclear")

CSV_COLUMNS = [
    "spec_hash",
    "k",
    "n",
    "s",
    "r",
    "seed",
    "m",
    "algorithm",
    "rel_error",
    "success",
    "iterations",
    "converged",
    "offsupport_mass",
    "offsupport_ratio",
    "max_angular_error",
]


@dataclass(frozen=True)
class InstanceSpec:
    """Shape and seed of one synthetic ground-truth signal."""

    k: int
    n: int
    s: int
    r: int
    seed: int

    def __post_init__(self):
        if not (1 <= self.s <= self.n):
            raise ValueError("need 1 <= s <= n")
        if not (1 <= self.r <= min(self.k, self.s)):
            raise ValueError("need 1 <= r <= min(k, s)")

    def digest(self) -> str:
        text = f"{self.k},{self.n},{self.s},{self.r},{self.seed}"
        return hashlib.md5(text.encode()).hexdigest()[:12]


@dataclass
class Instance:
    Z0: np.ndarray
    polar: PolarMatrix
    support: np.ndarray
    range_basis: Subspace
    partition: RangePartition


def generate_instance(spec: InstanceSpec) -> Instance:
    """Draw a rank-``r`` signal with ``s`` active columns on a uniform support.

    The ``r`` range directions are uniform on the sphere and the weights are
    i.i.d. standard normal on the shared support.  Draws with a numerically
    zero active column are rejected and retried a bounded number of times.
    """
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence((spec.seed, 0)))
    )
    k, n, s, r = spec.k, spec.n, spec.s, spec.r
    for _ in range(50):
        S = np.sort(rng.choice(n, size=s, replace=False))
        H = rng.standard_normal((k, r))
        H /= np.linalg.norm(H, axis=0)
        W = rng.standard_normal((r, s))
        cols = H @ W
        if np.linalg.norm(cols, axis=0).min() <= 1e-8:
            continue
        Z0 = np.zeros((k, n))
        Z0[:, S] = cols
        polar = polar_decompose(Z0)
        basis = Subspace.from_span(H)
        partition = build_range_partition(polar, range_basis=basis)
        return Instance(
            Z0=Z0, polar=polar, support=S, range_basis=basis, partition=partition
        )
    raise RuntimeError("could not draw a nondegenerate instance")


def operator_seed(spec: InstanceSpec, m: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((spec.seed, m, 1))


@dataclass
class TrialRecord:
    """Outcome of one (instance, m, algorithm) recovery experiment."""

    spec_hash: str
    k: int
    n: int
    s: int
    r: int
    seed: int
    m: int
    algorithm: str
    rel_error: float
    success: bool
    iterations: int
    converged: bool
    offsupport_mass: float
    offsupport_ratio: float
    max_angular_error: float
    angular_errors: list = field(default_factory=list)
    support: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _angular_errors(Z: np.ndarray, inst: Instance) -> np.ndarray:
    errs = []
    for i in inst.support:
        col = Z[:, i]
        nc = np.linalg.norm(col)
        if nc == 0.0:
            errs.append(math.pi)
            continue
        c = float(col @ inst.polar.directions[:, i]) / nc
        errs.append(float(np.arccos(min(1.0, max(-1.0, c)))))
    return np.array(errs)


def _measure(
    spec: InstanceSpec,
    inst: Instance,
    m: int,
    algorithm: str,
    Z: np.ndarray,
    iterations: int,
    converged: bool,
    wall: float,
) -> TrialRecord:
    rel = float(np.linalg.norm(Z - inst.Z0) / np.linalg.norm(inst.Z0))
    norms = np.linalg.norm(Z, axis=0)
    total = float(norms.sum())
    mask = np.ones(spec.n, dtype=bool)
    mask[inst.support] = False
    off_mass = float(norms[mask].sum())
    ang = _angular_errors(Z, inst)
    return TrialRecord(
        spec_hash=spec.digest(),
        k=spec.k,
        n=spec.n,
        s=spec.s,
        r=spec.r,
        seed=spec.seed,
        m=m,
        algorithm=algorithm,
        rel_error=rel,
        success=bool(rel < SUCCESS_THRESHOLD),
        iterations=int(iterations),
        converged=bool(converged),
        offsupport_mass=off_mass,
        offsupport_ratio=off_mass / total if total > 0 else 0.0,
        max_angular_error=float(ang.max()) if ang.size else 0.0,
        angular_errors=[float(a) for a in ang],
        support=[int(i) for i in inst.support],
        wall_time=wall,
    )


def run_trial(
    spec: InstanceSpec,
    m: int,
    algorithm: str,
    solver: SolverConfig | None = None,
    tau_thresh: float = 0.95,
    streamline_iters: int = 10,
    l12_result: SolveResult | None = None,
    instance: Instance | None = None,
    A: MeasurementOp | None = None,
) -> TrialRecord:
    """Run one recovery experiment and measure it against the ground truth."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    inst = instance if instance is not None else generate_instance(spec)
    if A is None:
        A = sample_gaussian(spec.k, spec.n, m, seed=operator_seed(spec, m))
    b = A.apply(inst.Z0)
    cfg = solver or SolverConfig()

    start = time.perf_counter()
    if algorithm == "l12":
        res = l12_result if l12_result is not None else solve_l12(A, b, cfg)
        Z, iters, conv = res.Z, res.iterations, res.converged
    elif algorithm == "nast":
        out = nast(
            A, b, NastConfig(s=spec.s, tau_thresh=tau_thresh, solver=cfg), l12_result
        )
        Z = out.Z
        iters = out.l12.iterations + out.nuclear.iterations
        conv = out.converged
    elif algorithm == "streamline":
        scfg = StreamlineConfig(r=spec.r, max_iters=streamline_iters, solver=cfg)
        Z, hist = column_streamline(A, b, scfg)
        iters = sum(sv["iterations"] for sv in hist.solves)
        conv = all(sv["converged"] for sv in hist.solves)
    else:
        res = solve_nuclear_on_support(A, b, np.arange(spec.n), cfg)
        Z, iters, conv = res.Z, res.iterations, res.converged
    wall = time.perf_counter() - start
    return _measure(spec, inst, m, algorithm, Z, iters, conv, wall)


def _trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence((master_seed, trial)).generate_state(1)[0])


def _run_trial_batch(args) -> list[dict]:
    base, trial, master_seed, m_values, algorithms, solver_kwargs, extra = args
    spec = replace(base, seed=_trial_seed(master_seed, trial))
    inst = generate_instance(spec)
    cfg = SolverConfig(**solver_kwargs) if solver_kwargs else None
    records = []
    for m in m_values:
        A = sample_gaussian(spec.k, spec.n, m, seed=operator_seed(spec, m))
        b = A.apply(inst.Z0)
        # The first-stage solve is shared between the plain program and the
        # thresholding heuristic so the comparison is paired.
        l12_cache = None
        l12_time = 0.0
        if any(a in ("l12", "nast") for a in algorithms):
            start = time.perf_counter()
            l12_cache = solve_l12(A, b, cfg or SolverConfig())
            l12_time = time.perf_counter() - start
        for algorithm in algorithms:
            if algorithm == "l12":
                rec = _measure(
                    spec,
                    inst,
                    m,
                    "l12",
                    l12_cache.Z,
                    l12_cache.iterations,
                    l12_cache.converged,
                    l12_time,
                )
            else:
                rec = run_trial(
                    spec,
                    m,
                    algorithm,
                    solver=cfg,
                    l12_result=l12_cache if algorithm == "nast" else None,
                    instance=inst,
                    A=A,
                    **extra,
                )
            records.append(rec.to_json_dict())
    return records


def default_jobs() -> int:
    return int(os.environ.get("COLSPARSE_JOBS", "1"))


def run_sweep(
    algorithms,
    base: InstanceSpec,
    m_values,
    trials: int,
    master_seed: int,
    out_path: str | None = None,
    jobs: int | None = None,
    solver: SolverConfig | None = None,
    tau_thresh: float = 0.95,
    streamline_iters: int = 10,
) -> list[TrialRecord]:
    """Run ``trials`` seeded instances across ``m_values`` and ``algorithms``.

    Trials run independently (optionally in parallel processes); results come
    back in deterministic order.  When ``out_path`` is given, writes
    ``<out_path>.csv`` (stable byte-for-byte across runs) and
    ``<out_path>.jsonl`` (one record per line, first line holds metadata).
    """
    algorithms = list(algorithms)
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    m_values = [int(m) for m in m_values]
    solver_kwargs = None
    if solver is not None:
        solver_kwargs = {
            "max_iters": solver.max_iters,
            "feas_tol": solver.feas_tol,
            "rel_tol": solver.rel_tol,
            "relaxation": solver.relaxation,
        }
    extra = {"tau_thresh": tau_thresh, "streamline_iters": streamline_iters}
    tasks = [
        (base, t, master_seed, m_values, algorithms, solver_kwargs, extra)
        for t in range(trials)
    ]
    jobs = default_jobs() if jobs is None else jobs
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_trial_batch, tasks))
    else:
        batches = [_run_trial_batch(t) for t in tasks]
    records = [TrialRecord(**d) for batch in batches for d in batch]

    if out_path is not None:
        meta = {
            "master_seed": master_seed,
            "algorithms": algorithms,
            "m_values": m_values,
            "trials": trials,
            "base_spec": asdict(base),
            "success_threshold": SUCCESS_THRESHOLD,
        }
        with open(f"{out_path}.csv", "w", newline="") as fh:
            fh.write(records_to_csv(records))
        with open(f"{out_path}.jsonl", "w") as fh:
            fh.write(json.dumps({"meta": meta}) + "\n")
            for rec in records:
                fh.write(json.dumps(rec.to_json_dict()) + "\n")
    return records


def records_to_csv(records) -> str:
    """Render records as CSV text; excludes wall time so bytes are stable."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


FIGURE_COLUMNS = {
    "fig3": ["k", "s", "n", "alpha", "ratio", "tau_star", "m_value"],
    "fig4": ["k", "s", "n", "alpha", "ratio", "m_value", "m_exact", "m_ratio"],
    "fig5": ["k", "s", "n", "alpha", "ratio", "tau_star", "m_value"],
    "fig6": ["m", "algorithm", "trials", "successes"],
    "fig7": ["m", "algorithm", "trials", "successes_strict", "successes_loose"],
    "fig8": ["k", "s", "n", "r", "tau_star", "mu_value"],
}


def emit_figure_data(rows, figure: str, out_path: str) -> str:
    """Write one delimiter-separated data file for the given figure id.

    ``rows`` is a list of dicts carrying at least the figure's required
    columns; an empty list produces a header-only file.
    """
    if figure not in FIGURE_COLUMNS:
        raise ValueError(f"unknown figure {figure!r}")
    cols = FIGURE_COLUMNS[figure]
    for row in rows:
        missing = [c for c in cols if c not in row]
        if missing:
            raise ValueError(f"row missing columns {missing}")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(cols)
    for row in rows:
        writer.writerow([row[c] for c in cols])
    text = buf.getvalue()
    with open(out_path, "w", newline="") as fh:
        fh.write(text)
    return text


def _ratio_cases(s: int):
    return [("average", 1.0 / s), ("large", 0.9)]


def fig3_rows(k_values, s_values, n: int, alpha: float) -> list[dict]:
    """Threshold heat grid over (k, s) for the average and large column cases."""
    rows = []
    for k in k_values:
        for s in s_values:
            for _, ratio in _ratio_cases(s):
                res = m_soft(ConeParams(k=k, s=s, n=n, alpha=alpha, weight_ratio=ratio))
                rows.append(
                    {
                        "k": k,
                        "s": s,
                        "n": n,
                        "alpha": alpha,
                        "ratio": ratio,
                        "tau_star": res.tau_star,
                        "m_value": res.m_value,
                    }
                )
    return rows


def fig4_rows(s_values, k: int, n: int, alpha: float) -> list[dict]:
    """Ratio of the angular threshold to the exact one, per sparsity level."""
    rows = []
    for s in s_values:
        m0 = exact_threshold(k, s, n).m_value
        for _, ratio in _ratio_cases(s):
            res = m_soft(ConeParams(k=k, s=s, n=n, alpha=alpha, weight_ratio=ratio))
            rows.append(
                {
                    "k": k,
                    "s": s,
                    "n": n,
                    "alpha": alpha,
                    "ratio": ratio,
                    "m_value": res.m_value,
                    "m_exact": m0,
                    "m_ratio": res.m_value / m0,
                }
            )
    return rows


def fig5_rows(alphas, k: int, s: int, n: int) -> list[dict]:
    """Threshold as a function of the angular accuracy, both column cases."""
    rows = []
    for alpha in alphas:
        for _, ratio in _ratio_cases(s):
            res = m_soft(
                ConeParams(k=k, s=s, n=n, alpha=float(alpha), weight_ratio=ratio)
            )
            rows.append(
                {
                    "k": k,
                    "s": s,
                    "n": n,
                    "alpha": float(alpha),
                    "ratio": ratio,
                    "tau_star": res.tau_star,
                    "m_value": res.m_value,
                }
            )
    return rows


def _success_counts(records, threshold: float):
    counts: dict[tuple, int] = {}
    totals: dict[tuple, int] = {}
    for rec in records:
        key = (rec.m, rec.algorithm)
        totals[key] = totals.get(key, 0) + 1
        if rec.rel_error < threshold:
            counts[key] = counts.get(key, 0) + 1
        else:
            counts.setdefault(key, 0)
    return counts, totals


def fig6_rows(records) -> list[dict]:
    """Success counts per (m, algorithm) at the standard threshold."""
    counts, totals = _success_counts(records, SUCCESS_THRESHOLD)
    return [
        {"m": m, "algorithm": a, "trials": totals[(m, a)], "successes": counts[(m, a)]}
        for (m, a) in sorted(totals)
    ]


def fig7_rows(records) -> list[dict]:
    """Success counts at the strict (0.1%) and loose (1%) error thresholds."""
    strict, totals = _success_counts(records, SUCCESS_THRESHOLD)
    loose, _ = _success_counts(records, 1e-2)
    return [
        {
            "m": m,
            "algorithm": a,
            "trials": totals[(m, a)],
            "successes_strict": strict[(m, a)],
            "successes_loose": loose[(m, a)],
        }
        for (m, a) in sorted(totals)
    ]


def fig8_rows(k_values, s_values, n: int, r: int) -> list[dict]:
    """Grid of streamlined thresholds over (k, s)."""
    rows = []
    for k in k_values:
        for s in s_values:
            res = mu_colstream(k, s, n, r)
            rows.append(
                {
                    "k": k,
                    "s": s,
                    "n": n,
                    "r": r,
                    "tau_star": res.tau_star,
                    "mu_value": res.m_value,
                }
            )
    return rows
