"""Two-stage heuristics for matrices that are column-sparse and low rank.

``nast`` (nuclear norm after soft-recovery thresholding) solves the
column-norm program, keeps the shortest prefix of columns (by norm) that is at
least ``s`` long and carries a ``tau`` fraction of the total column mass, and
re-solves a nuclear-norm program restricted to that support.

``column_streamline`` alternates between solving a subspace-penalized
column-norm program and re-estimating the penalty subspace as the leading
left singular subspace of the current iterate, driving the nonzero columns
into a common low-dimensional subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Subspace, principal_angle_sin, top_r_left_subspace
from .operators import MeasurementOp
from .solvers import (
    SolveResult,
    SolverConfig,
    solve_l12,
    solve_nuclear_on_support,
    solve_streamlined,
)

__all__ = [
    "NastConfig",
    "NastResult",
    "StreamlineConfig",
    "StreamlineHistory",
    "column_streamline",
    "nast",
    "select_support",
]


@dataclass
class NastConfig:
    """Sparsity target, mass fraction threshold, and solver settings."""

    s: int
    tau_thresh: float = 0.95
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("sparsity target must be positive")
        if not (0.0 < self.tau_thresh < 1.0):
            raise ValueError("mass threshold must lie in (0, 1)")


@dataclass
class NastResult:
    Z: np.ndarray
    support: np.ndarray
    l12: SolveResult
    nuclear: SolveResult

    @property
    def converged(self) -> bool:
        return self.l12.converged and self.nuclear.converged


def select_support(Z, s: int, tau_thresh: float) -> np.ndarray:
    """Shortest set of at least ``s`` columns carrying a ``tau`` mass fraction.

    Columns are ranked by descending norm with ties broken by lower index, and
    the shortest prefix of length at least ``s`` whose column-norm mass reaches
    ``tau_thresh`` times the total is returned (sorted by index).
    """
    Z = np.asarray(Z, dtype=float)
    norms = np.linalg.norm(Z, axis=0)
    order = np.argsort(-norms, kind="stable")
    mass = np.cumsum(norms[order])
    total = mass[-1] if norms.size else 0.0
    need = tau_thresh * total
    size = int(np.searchsorted(mass, need - 1e-15 * max(total, 1.0)) + 1)
    size = min(max(size, s), norms.size)
    return np.sort(order[:size])


def nast(
    A: MeasurementOp,
    b,
    cfg: NastConfig,
    l12_result: SolveResult | None = None,
) -> NastResult:
    """Column-norm solve, support thresholding, then nuclear-norm finish.

    ``l12_result`` allows reusing an existing first-stage solve on the same
    data (paired experiments).  Solver non-convergence is carried through in
    the stage results, not raised.
    """
    first = l12_result if l12_result is not None else solve_l12(A, b, cfg.solver)
    S_hat = select_support(first.Z, cfg.s, cfg.tau_thresh)
    second = solve_nuclear_on_support(A, b, S_hat, cfg.solver)
    return NastResult(Z=second.Z, support=S_hat, l12=first, nuclear=second)


@dataclass
class StreamlineConfig:
    """Rank target, stopping rules, and solver settings.

    Stop rules besides the iteration cap are optional: ``iterate_tol`` stops
    on a small relative change between iterates, ``sv_tol`` when the
    ``(r+1)``-st singular value falls below it, ``col_tol`` (with
    ``col_sparsity`` = ``s``) when the ``(s+1)``-st largest column norm does.
    ``early_support`` switches to a support-restricted nuclear finish as soon
    as at most that many columns exceed ``early_col_ratio`` times the largest
    column norm.
    """

    r: int
    max_iters: int = 10
    iterate_tol: float | None = 1e-6
    sv_tol: float | None = None
    col_tol: float | None = None
    col_sparsity: int | None = None
    early_support: int | None = None
    early_col_ratio: float = 1e-3
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank target must be positive")
        if self.max_iters < 1 and all(
            rule is None for rule in (self.iterate_tol, self.sv_tol, self.col_tol)
        ):
            raise ValueError("need an iteration cap or at least one stop rule")
        if self.col_tol is not None and self.col_sparsity is None:
            raise ValueError("column stop rule needs a sparsity level")


@dataclass
class StreamlineHistory:
    """Per-iteration diagnostics: objective, subspace drift, singular values."""

    objectives: list = field(default_factory=list)
    l12_norms: list = field(default_factory=list)
    drifts: list = field(default_factory=list)
    singular_values: list = field(default_factory=list)
    solves: list = field(default_factory=list)
    stop_reason: str = "max_iters"
    nuclear_finish: SolveResult | None = None


def _record(history: StreamlineHistory, result: SolveResult, drift: float):
    Z = result.Z
    sv = np.linalg.svd(Z, compute_uv=False)
    history.objectives.append(result.objective)
    history.l12_norms.append(float(np.linalg.norm(Z, axis=0).sum()))
    history.drifts.append(float(drift))
    history.singular_values.append(sv)
    history.solves.append(result.summary())


def column_streamline(
    A: MeasurementOp,
    b,
    cfg: StreamlineConfig,
    V0: Subspace | None = None,
) -> tuple[np.ndarray, StreamlineHistory]:
    """Alternate subspace-penalized solves with leading-subspace updates.

    ``V0`` overrides the initial subspace (otherwise the leading left singular
    subspace of the plain column-norm solution); iterates are warm started
    from the previous solution.  Returns the final iterate and the history.
    """
    if cfg.r >= A.k:
        raise ValueError("rank target must be below the column length")
    history = StreamlineHistory()
    init = solve_l12(A, b, cfg.solver)
    _record(history, init, drift=0.0)
    Y = init.Z
    if float(np.linalg.norm(Y)) == 0.0:
        V = Subspace.zero(A.k) if V0 is None else V0
    else:
        V = top_r_left_subspace(Y, cfg.r) if V0 is None else V0
    dual = None if init.dual is None else -init.dual

    for q in range(cfg.max_iters):
        step = solve_streamlined(A, b, V, cfg.solver, x0=Y, y0=dual)
        Y_new = step.Z
        dual = None if step.dual is None else -step.dual
        if float(np.linalg.norm(Y_new)) == 0.0:
            V_new = V
        else:
            V_new = top_r_left_subspace(Y_new, cfg.r)
        _record(history, step, drift=principal_angle_sin(V_new, V))

        change = np.linalg.norm(Y_new - Y) / max(1.0, np.linalg.norm(Y_new))
        sv = history.singular_values[-1]
        norms = np.sort(np.linalg.norm(Y_new, axis=0))[::-1]
        Y, V = Y_new, V_new

        if cfg.iterate_tol is not None and change <= cfg.iterate_tol:
            history.stop_reason = "iterate_change"
            break
        if cfg.sv_tol is not None and cfg.r < sv.size and sv[cfg.r] <= cfg.sv_tol:
            history.stop_reason = "singular_value"
            break
        if (
            cfg.col_tol is not None
            and cfg.col_sparsity is not None
            and cfg.col_sparsity < norms.size
            and norms[cfg.col_sparsity] <= cfg.col_tol
        ):
            history.stop_reason = "column_norm"
            break
        if cfg.early_support is not None:
            thresh = cfg.early_col_ratio * (norms[0] if norms.size else 0.0)
            big = np.flatnonzero(np.linalg.norm(Y, axis=0) > thresh)
            if 0 < big.size <= cfg.early_support:
                finish = solve_nuclear_on_support(A, b, big, cfg.solver)
                history.nuclear_finish = finish
                history.stop_reason = "early_nuclear_finish"
                return finish.Z, history
    return Y, history
