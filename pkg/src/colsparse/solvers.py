"""First-order primal-dual solvers for equality-constrained norm minimization.

All programs solved here have the shape ``min f(x) subject to K x = b`` (or,
for the certificate searches built on the same engine, ``min g(K x)``), with
``f`` and ``g`` admitting cheap proximal maps.  The engine is a primal-dual
hybrid gradient iteration: a proximal step on the objective, a multiplier
ascent step on the constraint, and over-relaxation.  Step sizes are chosen
from a power-iteration estimate ``L`` of the operator norm so that
``tau * sigma * L**2 = 0.95``.

Non-convergence within the iteration budget is reported on the result, never
raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Subspace, as_support
from .operators import MeasurementOp

__all__ = [
    "SolveResult",
    "SolverConfig",
    "power_norm",
    "project_l1_ball",
    "prox_linf2_columns",
    "solve_l1",
    "solve_l12",
    "solve_nuclear_on_support",
    "solve_streamlined",
    "streamline_prox_columns",
]

_TINY = 1e-300


@dataclass
class SolverConfig:
    """Tuning knobs shared by every solve.

    ``tau``/``sigma`` default to the balanced choice ``sqrt(0.95)/L`` with
    ``L`` the power-iteration norm estimate; when set explicitly their product
    must respect ``tau*sigma*L**2 <= 1``.  ``relaxation`` is the
    over-relaxation factor in ``[1, 2)``.
    """

    max_iters: int = 20000
    feas_tol: float = 1e-6
    rel_tol: float = 1e-8
    tau: float | None = None
    sigma: float | None = None
    relaxation: float = 1.0
    step_product: float = 0.95
    power_iters: int = 30
    check_every: int = 25
    track_history: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.feas_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (1.0 <= self.relaxation < 2.0):
            raise ValueError("relaxation factor must lie in [1, 2)")
        if not (0 < self.step_product <= 1.0):
            raise ValueError("step_product must lie in (0, 1]")


@dataclass
class SolveResult:
    """Outcome of one solve.

    ``Z`` is the primal solution (a ``(k, n)`` matrix, or a vector for the
    plain l1 programs).  ``residual`` is ``||K Z - b|| / ||b||`` (absolute when
    ``b = 0``).  ``dual`` is the multiplier ``p`` scaled so that at optimality
    ``<p, b>`` equals the objective and ``K^* p`` lies in the subdifferential
    of the objective at ``Z``.
    """

    Z: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    dual: np.ndarray | None = None
    method: str = ""
    history: dict | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "objective": self.objective,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def power_norm(F: np.ndarray, iters: int = 30, seed: int = 0) -> float:
    """Spectral norm of a dense matrix by seeded power iteration."""
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(F.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = F.T @ (F @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = np.sqrt(nw)
        v = w / nw
    return float(est)


def _steps(cfg: SolverConfig, L: float) -> tuple[float, float]:
    # 1% headroom guards against a power-iteration underestimate of L.
    Lsafe = max(L * 1.01, 1e-12)
    if cfg.tau is None and cfg.sigma is None:
        base = np.sqrt(cfg.step_product) / Lsafe
        return base, base
    if cfg.tau is not None and cfg.sigma is not None:
        if cfg.tau * cfg.sigma * L**2 > 1.0 + 1e-12:
            raise ValueError("step-size product exceeds 1/L**2")
        return cfg.tau, cfg.sigma
    fixed = cfg.tau if cfg.tau is not None else cfg.sigma
    other = cfg.step_product / (Lsafe**2 * fixed)
    return (fixed, other) if cfg.tau is not None else (other, fixed)


def _pdhg(
    K: np.ndarray,
    prox_f,
    prox_gstar,
    x0: np.ndarray,
    cfg: SolverConfig,
    objective,
    residual_fn,
    dual_ok=None,
    y0: np.ndarray | None = None,
    norm_K: float | None = None,
):
    """Primal-dual hybrid gradient loop over a dense operator ``K``.

    ``residual_fn(x, kx)`` returns the feasibility residual used both for
    reporting and for the stopping test; ``dual_ok(y)``, when given, must be
    true before convergence is declared (used to certify dual feasibility).
    """
    L = power_norm(K, cfg.power_iters) if norm_K is None else norm_K
    tau, sigma = _steps(cfg, L)
    rho = cfg.relaxation

    x = np.asarray(x0, dtype=float).copy()
    y = np.zeros(K.shape[0]) if y0 is None else np.asarray(y0, dtype=float).copy()
    kx = K @ x

    obj_hist: list[float] = []
    res_hist: list[float] = []
    converged = False
    residual = residual_fn(x, kx)
    it = 0
    while it < cfg.max_iters:
        it += 1
        x_new = prox_f(x - tau * (K.T @ y), tau)
        kx_new = K @ x_new
        y_new = prox_gstar(y + sigma * (2.0 * kx_new - kx), sigma)
        if rho != 1.0:
            x_new = x + rho * (x_new - x)
            kx_new = kx + rho * (kx_new - kx)
            y_new = y + rho * (y_new - y)
        step = np.linalg.norm(x_new - x)
        x, kx, y = x_new, kx_new, y_new
        if cfg.track_history:
            obj_hist.append(objective(x))
            res_hist.append(residual_fn(x, kx))
        if it % cfg.check_every == 0 or it == cfg.max_iters:
            residual = residual_fn(x, kx)
            rel_step = step / max(1.0, np.linalg.norm(x))
            if residual <= cfg.feas_tol and rel_step <= cfg.rel_tol:
                if dual_ok is None or dual_ok(y):
                    converged = True
                    break

    history = None
    if cfg.track_history:
        history = {"objective": np.array(obj_hist), "residual": np.array(res_hist)}
    return x, y, it, converged, residual_fn(x, kx), history


def _relative_residual(b: np.ndarray):
    denom = np.linalg.norm(b)
    denom = denom if denom > 0 else 1.0

    def residual(x, kx):
        return float(np.linalg.norm(kx - b) / denom)

    return residual


def _prox_l12_flat(k: int, n: int):
    def prox(v, t):
        X = v.reshape(k, n, order="F")
        norms = np.linalg.norm(X, axis=0)
        scale = np.maximum(1.0 - t / np.maximum(norms, _TINY), 0.0)
        return (X * scale).ravel(order="F")

    return prox


def _l12_objective(k: int, n: int):
    def obj(v):
        return float(np.linalg.norm(v.reshape(k, n, order="F"), axis=0).sum())

    return obj


def solve_l12(
    A: MeasurementOp,
    b,
    cfg: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> SolveResult:
    """Minimize the sum of column norms subject to ``A(Z) = b``.

    The proximal step is column-wise block soft thresholding.  Convergence
    additionally requires the dual iterate ``p`` to satisfy
    ``max_i ||A_i^T p|| <= 1 + 10*rel_tol``, so a converged result carries a
    near-feasible dual certificate with ``<p, b>`` close to the objective.
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=float).ravel()
    if b.shape != (A.m,):
        raise ValueError(f"expected measurement vector of length {A.m}")
    k, n = A.k, A.n
    K = A.flat

    def dual_ok(y):
        V = A.adjoint(-y)
        return np.linalg.norm(V, axis=0).max() <= 1.0 + 10.0 * cfg.rel_tol

    x_init = np.zeros(k * n) if x0 is None else np.asarray(x0, float).ravel(order="F")
    x, y, it, conv, res, hist = _pdhg(
        K,
        _prox_l12_flat(k, n),
        lambda v, s: v - s * b,
        x_init,
        cfg,
        _l12_objective(k, n),
        _relative_residual(b),
        dual_ok=dual_ok,
        y0=y0,
    )
    Z = x.reshape(k, n, order="F").copy()
    return SolveResult(
        Z=Z,
        objective=float(np.linalg.norm(Z, axis=0).sum()),
        residual=res,
        iterations=it,
        converged=conv,
        dual=-y,
        method="l12",
        history=hist,
    )


def solve_nuclear_on_support(
    A: MeasurementOp,
    b,
    S_hat,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Minimize the nuclear norm over matrices supported on columns ``S_hat``.

    Works on the ``(k, |S_hat|)`` submatrix, so off-support columns of the
    returned matrix are exactly zero; the proximal step is singular-value soft
    thresholding of the submatrix.
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=float).ravel()
    if b.shape != (A.m,):
        raise ValueError(f"expected measurement vector of length {A.m}")
    S = as_support(S_hat, A.n)
    if S.size == 0:
        raise ValueError("support must be nonempty")
    k, s = A.k, S.size
    cols = (S[:, None] * k + np.arange(k)[None, :]).ravel()
    K = np.ascontiguousarray(A.flat[:, cols])

    def prox(v, t):
        X = v.reshape(k, s, order="F")
        U, sv, Vt = np.linalg.svd(X, full_matrices=False)
        sv = np.maximum(sv - t, 0.0)
        return ((U * sv) @ Vt).ravel(order="F")

    def objective(v):
        return float(
            np.linalg.svd(v.reshape(k, s, order="F"), compute_uv=False).sum()
        )

    x, y, it, conv, res, hist = _pdhg(
        K,
        prox,
        lambda v, sg: v - sg * b,
        np.zeros(k * s),
        cfg,
        objective,
        _relative_residual(b),
    )
    Z = np.zeros((k, A.n))
    Z[:, S] = x.reshape(k, s, order="F")
    return SolveResult(
        Z=Z,
        objective=float(np.linalg.svd(Z[:, S], compute_uv=False).sum()),
        residual=res,
        iterations=it,
        converged=conv,
        dual=-y,
        method="nuclear",
        history=hist,
    )


def streamline_prox_columns(X: np.ndarray, V: Subspace, t: float) -> np.ndarray:
    """Column-wise proximal map of ``t * (||v|| + ||P_perp v||)``.

    Split each column into its component inside ``V`` (length ``a``) and the
    orthogonal remainder (length ``b``).  By rotational symmetry the prox
    reduces to two scalars, and by Moreau decomposition it subtracts the
    projection onto the dual-ball ``t*(unit ball + unit segment along the
    perpendicular axis)``, giving the closed form

        shrink = (1 - t/d)_+ with d = hypot(a, (b - t)_+),

    applied as ``shrink * a`` inside ``V`` and ``shrink * (b - t)_+`` outside.
    """
    par = V.project(X)
    perp = X - par
    a0 = np.linalg.norm(par, axis=0)
    b0 = np.linalg.norm(perp, axis=0)
    beta0 = np.maximum(b0 - t, 0.0)
    d = np.hypot(a0, beta0)
    shrink = np.where(d > t, 1.0 - t / np.maximum(d, _TINY), 0.0)
    out = par * shrink + perp * (shrink * beta0 / np.maximum(b0, _TINY))
    return out


def solve_streamlined(
    A: MeasurementOp,
    b,
    V: Subspace,
    cfg: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> SolveResult:
    """Minimize ``sum_i ||Z(i)|| + ||P_{V_perp} Z(i)||`` subject to ``A(Z) = b``.

    Column components outside the subspace ``V`` are penalized twice, which
    steers the solution's columns toward ``V``.
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=float).ravel()
    if b.shape != (A.m,):
        raise ValueError(f"expected measurement vector of length {A.m}")
    if V.ambient_dim != A.k:
        raise ValueError("subspace ambient dimension must equal column length")
    k, n = A.k, A.n

    def prox(v, t):
        X = v.reshape(k, n, order="F")
        return streamline_prox_columns(X, V, t).ravel(order="F")

    def objective(v):
        X = v.reshape(k, n, order="F")
        return float(
            np.linalg.norm(X, axis=0).sum()
            + np.linalg.norm(V.project_out(X), axis=0).sum()
        )

    x_init = np.zeros(k * n) if x0 is None else np.asarray(x0, float).ravel(order="F")
    x, y, it, conv, res, hist = _pdhg(
        A.flat,
        prox,
        lambda v, s: v - s * b,
        x_init,
        cfg,
        objective,
        _relative_residual(b),
        y0=y0,
    )
    Z = x.reshape(k, n, order="F").copy()
    return SolveResult(
        Z=Z,
        objective=objective(x),
        residual=res,
        iterations=it,
        converged=conv,
        dual=-y,
        method="streamlined",
        history=hist,
    )


def solve_l1(
    A_mat: np.ndarray,
    b,
    cfg: SolverConfig | None = None,
    nonneg: bool = False,
) -> SolveResult:
    """Minimize ``||z||_1`` subject to ``A z = b`` (optionally also ``z >= 0``)."""
    cfg = cfg or SolverConfig()
    A_mat = np.asarray(A_mat, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A_mat.ndim != 2 or b.shape != (A_mat.shape[0],):
        raise ValueError("matrix and right-hand side shapes do not match")

    if nonneg:

        def prox(v, t):
            return np.maximum(v - t, 0.0)

        def dual_ok(y):
            return (A_mat.T @ (-y)).max() <= 1.0 + 10.0 * cfg.rel_tol

    else:

        def prox(v, t):
            return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)

        def dual_ok(y):
            return np.abs(A_mat.T @ y).max() <= 1.0 + 10.0 * cfg.rel_tol

    x, y, it, conv, res, hist = _pdhg(
        A_mat,
        prox,
        lambda v, s: v - s * b,
        np.zeros(A_mat.shape[1]),
        cfg,
        lambda v: float(np.abs(v).sum()),
        _relative_residual(b),
        dual_ok=dual_ok,
    )
    return SolveResult(
        Z=x,
        objective=float(np.abs(x).sum()),
        residual=res,
        iterations=it,
        converged=conv,
        dual=-y,
        method="l1+" if nonneg else "l1",
        history=hist,
    )


def project_l1_ball(u: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of a nonnegative vector onto the l1 ball."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    u = np.asarray(u, dtype=float)
    if u.sum() <= radius:
        return u.copy()
    # Classic sorted-threshold projection onto the simplex of size `radius`.
    srt = np.sort(u)[::-1]
    css = np.cumsum(srt) - radius
    idx = np.arange(1, u.size + 1)
    valid = srt - css / idx > 0
    rho = idx[valid][-1]
    theta = css[rho - 1] / rho
    return np.maximum(u - theta, 0.0)


def prox_linf2_columns(X: np.ndarray, t: float) -> np.ndarray:
    """Proximal map of ``t * max_i ||X(i)||_2`` over the columns of ``X``.

    By Moreau decomposition this subtracts the projection of ``X`` onto the
    radius-``t`` ball of the dual norm (sum of column norms): project the
    vector of column norms onto the l1 ball and rescale the columns.
    """
    if t == 0.0:
        return X.copy()
    norms = np.linalg.norm(X, axis=0)
    projected = project_l1_ball(norms, t)
    scale = projected / np.maximum(norms, _TINY)
    return X - X * scale
