"""Dual certificates for exact and approximate column-sparse recovery.

A dual vector ``p`` certifies recovery through its adjoint image
``V = A^*(p)``.  Exact recovery needs ``V`` to interpolate the support
directions with all off-support column norms at most one.  Approximate
(angular) recovery relaxes the interpolation on one distinguished column: it
is enough that ``V`` reproduces the signal's weighted direction sum, stays
strictly below norm one away from the distinguished index, and points within
angle ``alpha`` of the true direction there with norm at most ``1/cos(alpha)``.
Any minimizer of the column-norm program then aligns with the true direction
of the distinguished column up to angle ``2*alpha``.

Searches for both kinds of certificate are convex programs solved with the
same primal-dual engine as the recovery programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import PolarMatrix, Subspace, angular_distance, as_support, support_complement
from .operators import MeasurementOp
from .solvers import SolverConfig, _pdhg, prox_linf2_columns

__all__ = [
    "ExactCertReport",
    "RangePartition",
    "SoftCertReport",
    "build_range_partition",
    "check_exact_cert",
    "check_soft_cert",
    "energy_bounds",
    "find_exact_cert",
    "find_soft_cert",
    "project_cone_ball",
    "range_angle_bound",
    "subdiff_member",
]

_TINY = 1e-300


def _cert_config() -> SolverConfig:
    return SolverConfig(max_iters=8000, feas_tol=1e-8, rel_tol=1e-7, check_every=25)


def _support_directions(Z0: PolarMatrix, S: np.ndarray) -> np.ndarray:
    if np.any(Z0.weights[S] <= 0):
        raise ValueError("signal must carry a direction on every support index")
    extra = np.setdiff1d(Z0.support, S)
    if extra.size:
        raise ValueError("signal has mass outside the claimed support")
    return Z0.directions[:, S]


@dataclass(frozen=True)
class ExactCertReport:
    """Deviation of ``V = A^*(p)`` from the exact interpolation conditions."""

    max_support_deviation: float
    max_offsupport_norm: float
    tol: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "max_support_deviation": self.max_support_deviation,
            "max_offsupport_norm": self.max_offsupport_norm,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_exact_cert(
    A: MeasurementOp, Z0: PolarMatrix, S, p, tol: float = 1e-6
) -> ExactCertReport:
    """Test ``V(i) = h_i`` on the support and ``||V(i)|| <= 1`` elsewhere."""
    S = as_support(S, A.n)
    H = _support_directions(Z0, S)
    V = A.adjoint(p)
    dev = float(np.linalg.norm(V[:, S] - H, axis=0).max()) if S.size else 0.0
    off = support_complement(S, A.n)
    off_max = float(np.linalg.norm(V[:, off], axis=0).max()) if off.size else 0.0
    return ExactCertReport(
        max_support_deviation=dev,
        max_offsupport_norm=off_max,
        tol=tol,
        passed=bool(dev <= tol and off_max <= 1.0 + tol),
    )


def find_exact_cert(
    A: MeasurementOp,
    Z0: PolarMatrix,
    S,
    cfg: SolverConfig | None = None,
) -> np.ndarray | None:
    """Search for an exact-recovery certificate.

    The interpolation constraints ``A_i^T p = h_i`` (on the support) are
    eliminated through a particular solution plus a null-space basis, after
    which the off-support worst column norm is minimized; the minimizer is
    returned when its value is below one, and ``None`` otherwise.
    """
    cfg = cfg or _cert_config()
    S = as_support(S, A.n)
    if S.size == 0:
        raise ValueError("support must be nonempty")
    H = _support_directions(Z0, S)
    k = A.k
    C = np.vstack([A.block(i).T for i in S])
    d = H.ravel(order="F")
    p0, _, rank, _ = np.linalg.lstsq(C, d, rcond=None)
    if rank < S.size * k:
        raise ValueError("interpolation constraints are rank deficient on the support")
    N = linalg.null_space(C)

    off = support_complement(S, A.n)
    if off.size == 0:
        return p0
    B = np.vstack([A.block(i).T for i in off])
    w0 = B @ p0
    n_off = off.size

    def off_max(w_flat):
        W = w_flat.reshape(k, n_off, order="F")
        return float(np.linalg.norm(W, axis=0).max())

    if N.shape[1] == 0:
        return p0 if off_max(w0) < 1.0 else None

    K = B @ N

    def prox_gstar(v, s):
        # Conjugate prox of the shifted worst-column-norm objective: project
        # the shifted point onto the unit ball of the dual (column-norm sum).
        W = (v + s * w0).reshape(k, n_off, order="F")
        return (W - prox_linf2_columns(W, 1.0)).ravel(order="F")

    q, _, _, _, _, _ = _pdhg(
        K,
        lambda v, t: v,
        prox_gstar,
        np.zeros(N.shape[1]),
        cfg,
        lambda v: off_max(w0 + K @ v),
        lambda v, kv: 0.0,
    )
    p = p0 + N @ q
    return p if off_max(w0 + K @ q) < 1.0 else None


@dataclass(frozen=True)
class SoftCertReport:
    """Evaluation of the angular-recovery certificate conditions for one ``p``.

    ``cond1_value`` is the weighted direction-sum surplus (wanted ``>= 0``),
    ``cond2_max_offnorm`` the largest off-support column norm of ``V`` (wanted
    strictly below one; it doubles as the energy-concentration constant
    ``gamma``), ``cond3_angle`` the angle between the distinguished column of
    ``V`` and the true direction (wanted ``<= alpha``), and ``cond4_value`` is
    ``||V(i*)|| * cos(alpha) - 1`` (wanted ``<= 0``).  ``max_support_norm``
    reports the largest ``||V(i)||`` over the remaining support columns; for
    certificates produced by :func:`find_soft_cert` it is strictly below one
    as well, while exact certificates sit exactly at one there.
    """

    i_star: int
    alpha: float
    cond1_value: float
    cond2_max_offnorm: float
    cond3_angle: float
    cond4_value: float
    gamma_max: float
    max_support_norm: float
    satisfied: bool
    tol: float

    def to_json_dict(self) -> dict:
        return {
            "i_star": self.i_star,
            "alpha": self.alpha,
            "cond1_value": self.cond1_value,
            "cond2_max_offnorm": self.cond2_max_offnorm,
            "cond3_angle": self.cond3_angle,
            "cond4_value": self.cond4_value,
            "gamma_max": self.gamma_max,
            "max_support_norm": self.max_support_norm,
            "satisfied": self.satisfied,
            "tol": self.tol,
        }


def check_soft_cert(
    A: MeasurementOp,
    Z0: PolarMatrix,
    S,
    i_star: int,
    alpha: float,
    p,
    tol: float = 1e-6,
    strict_margin: float = 1e-9,
) -> SoftCertReport:
    """Fill every certificate condition value for a candidate dual vector."""
    S = as_support(S, A.n)
    if i_star not in S:
        raise ValueError("distinguished index must lie in the support")
    if not (0.0 < alpha < math.pi / 2):
        raise ValueError("alpha must lie in (0, pi/2)")
    H = _support_directions(Z0, S)
    z0 = Z0.weights
    V = A.adjoint(p)

    cond1 = float(np.sum(np.sum(H * V[:, S], axis=0) * z0[S]) - z0.sum())
    off = support_complement(S, A.n)
    off_max = float(np.linalg.norm(V[:, off], axis=0).max()) if off.size else 0.0
    rest = S[S != i_star]
    support_max = (
        float(np.linalg.norm(V[:, rest], axis=0).max()) if rest.size else 0.0
    )
    v_star = V[:, i_star]
    nv = float(np.linalg.norm(v_star))
    h_star = Z0.directions[:, i_star]
    cond3 = math.pi if nv == 0.0 else angular_distance(h_star, v_star)
    cond4 = nv * math.cos(alpha) - 1.0

    satisfied = bool(
        cond1 >= -tol
        and off_max < 1.0 - strict_margin
        and cond3 <= alpha
        and cond4 <= tol
    )
    return SoftCertReport(
        i_star=int(i_star),
        alpha=float(alpha),
        cond1_value=cond1,
        cond2_max_offnorm=off_max,
        cond3_angle=float(cond3),
        cond4_value=float(cond4),
        gamma_max=off_max,
        max_support_norm=support_max,
        satisfied=satisfied,
        tol=tol,
    )


def _project_circular_cone(v: np.ndarray, h: np.ndarray, alpha: float) -> np.ndarray:
    """Projection onto the cone of vectors within angle ``alpha`` of ``h``."""
    c = float(h @ v)
    w = v - c * h
    q = float(np.linalg.norm(w))
    ca, sa = math.cos(alpha), math.sin(alpha)
    if c >= 0.0 and q <= c * math.tan(alpha):
        return v.copy()
    t = c * ca + q * sa
    if t <= 0.0:
        return np.zeros_like(v)
    axis = w / q if q > 0 else np.zeros_like(v)
    return t * (ca * h + sa * axis)


def project_cone_ball(
    v: np.ndarray, h: np.ndarray, alpha: float, radius: float
) -> np.ndarray:
    """Projection onto ``{w : angle(w, h) <= alpha, ||w|| <= radius}``.

    For a cone intersected with a centered ball the projection factors into
    the cone projection followed by a radial clip.
    """
    w = _project_circular_cone(v, h, alpha)
    nw = np.linalg.norm(w)
    if nw > radius:
        w *= radius / nw
    return w


def find_soft_cert(
    A: MeasurementOp,
    Z0: PolarMatrix,
    S,
    i_star: int,
    alpha: float,
    cfg: SolverConfig | None = None,
    margin_tol: float = 1e-6,
) -> np.ndarray | None:
    """Search for an angular-recovery certificate at accuracy ``alpha``.

    Minimizes the worst column norm of ``V = A^*(p)`` over all columns other
    than the distinguished one, subject to the direction-sum condition, the
    angular condition (a circular cone, via the convex rewrite
    ``<V(i*), h> >= cos(alpha) ||V(i*)||``), and the norm cap on the
    distinguished column.  The direction-sum condition is eliminated exactly:
    at any optimum it is active (otherwise shrinking ``p`` lowers every
    norm), so the search runs over ``p = p0 + N q`` with ``<b, p> = ||z||_1``
    pinned.  After the iteration the distinguished column is placed exactly
    inside its cone-and-ball set by a least-norm correction orthogonal to
    ``b``.  A certificate is returned only when the final report is satisfied
    and every column other than the distinguished one is strictly below norm
    one with margin ``margin_tol``.
    """
    cfg = cfg or _cert_config()
    S = as_support(S, A.n)
    if i_star not in S:
        raise ValueError("distinguished index must lie in the support")
    if not (0.0 < alpha < math.pi / 2):
        raise ValueError("alpha must lie in (0, pi/2)")
    _support_directions(Z0, S)
    z1 = float(Z0.weights.sum())
    if z1 <= 0.0:
        raise ValueError("signal must be nonzero")

    k, n = A.k, A.n
    b = A.apply(Z0.to_matrix())
    h_star = Z0.directions[:, i_star]
    radius = 1.0 / math.cos(alpha)
    # Small internal shrink of the cone and ball: the iterate meets the
    # dual-enforced constraints only up to a slowly decaying residual, and the
    # closing correction must stay small.
    margin = 1e-3
    alpha_int = alpha * (1.0 - margin)
    radius_int = radius * (1.0 - margin)
    others = np.flatnonzero(np.arange(n) != i_star)

    p0 = (z1 / float(b @ b)) * b
    N = linalg.null_space(b[None, :])
    K = A.flat.T @ N
    w0 = A.flat.T @ p0
    kn = k * n
    W0 = w0.reshape(k, n, order="F")

    def prox_gstar(y, s):
        V = y.reshape(k, n, order="F").copy()
        W = V[:, others] + s * W0[:, others]
        V[:, others] = W - prox_linf2_columns(W, 1.0)
        shifted = V[:, i_star] / s + W0[:, i_star]
        V[:, i_star] -= s * (
            project_cone_ball(shifted, h_star, alpha_int, radius_int)
            - W0[:, i_star]
        )
        return V.ravel(order="F")

    def residual(x, kx):
        v = (kx + w0).reshape(k, n, order="F")[:, i_star]
        nv = np.linalg.norm(v)
        r3 = max(0.0, math.cos(alpha_int) * nv - float(h_star @ v)) / max(nv, 1e-12)
        r4 = max(0.0, nv - radius_int) / radius_int
        return float(max(r3, r4))

    def objective(x):
        V = (w0 + K @ x).reshape(k, n, order="F")
        return float(np.linalg.norm(V[:, others], axis=0).max())

    q, _, _, _, _, _ = _pdhg(
        K,
        lambda v, t: v,
        prox_gstar,
        np.zeros(N.shape[1]),
        cfg,
        objective,
        residual,
    )
    p = p0 + N @ q

    # One-shot closing correction: place the distinguished column exactly on
    # the (slightly interior) cone-and-ball set without touching <b, p>.
    v = A.block(i_star).T @ p
    target = project_cone_ball(
        v, h_star, alpha * (1.0 - 1e-6), radius * (1.0 - 1e-9)
    )
    if np.linalg.norm(target - v) > 0:
        M = np.vstack([A.block(i_star).T, b[None, :]])
        rhs = np.concatenate([target - v, [0.0]])
        delta, _, _, _ = np.linalg.lstsq(M, rhs, rcond=None)
        p = p + delta

    report = check_soft_cert(A, Z0, S, i_star, alpha, p)
    worst = max(report.cond2_max_offnorm, report.max_support_norm)
    if report.satisfied and worst < 1.0 - margin_tol:
        return p
    return None


def energy_bounds(
    A: MeasurementOp,
    Z0: PolarMatrix,
    S,
    i_star: int,
    alpha: float,
    gamma: float,
    z_hat: np.ndarray,
) -> tuple[float, float]:
    """Bounds on the off-support mass and on-support weight error of a minimizer.

    Valid when a certificate holds at ``(i_star, alpha)`` with off-support
    norms at most ``gamma < 1`` and every support column of the minimizer is
    within angle ``alpha`` of the truth.  Returns

        off  = (1 - cos a) / (cos a (1 - gamma)) * z_hat[i_star],
        on   = sin a * max_{i in S} ||A_i|| / smin * ||z0||_1
               + max_i ||A_i|| / smin * ||z_hat restricted off S||_1,

    with ``smin`` the smallest singular value of the support-restricted
    induced map.
    """
    S = as_support(S, A.n)
    if i_star not in S:
        raise ValueError("distinguished index must lie in the support")
    if gamma >= 1.0:
        raise ValueError("gamma must be strictly below one")
    if not (0.0 <= alpha < math.pi / 2):
        raise ValueError("alpha must lie in [0, pi/2)")
    z_hat = np.asarray(z_hat, dtype=float).ravel()
    if z_hat.shape != (A.n,):
        raise ValueError("z_hat must hold one weight per column")
    smin = A.restricted_sigma_min(Z0.directions, S)
    if smin <= 0.0:
        raise ValueError("support-restricted map is singular")
    ca, sa = math.cos(alpha), math.sin(alpha)
    off_bound = (1.0 - ca) / (ca * (1.0 - gamma)) * float(z_hat[i_star])
    norms = A.block_norms()
    off = support_complement(S, A.n)
    z0_l1 = float(Z0.weights.sum())
    off_mass = float(z_hat[off].sum()) if off.size else 0.0
    on_bound = (
        sa * (float(norms[S].max()) / smin) * z0_l1
        + (float(norms.max()) / smin) * off_mass
    )
    return off_bound, on_bound


@dataclass(frozen=True)
class RangePartition:
    """Support split into direction classes with one unit representative each.

    ``blocks[l]`` lists the support indices whose true direction equals
    ``frame[:, l]`` up to sign; ``lower_bound`` is the smallest eigenvalue of
    the frame operator of the representatives restricted to the signal range.
    """

    blocks: tuple
    frame: np.ndarray
    lower_bound: float

    def __post_init__(self):
        blocks = tuple(as_support(b, 10**9) for b in self.blocks)
        frame = np.asarray(self.frame, dtype=float)
        if frame.ndim != 2 or frame.shape[1] != len(blocks):
            raise ValueError("need one frame vector per block")
        if np.any(np.abs(np.linalg.norm(frame, axis=0) - 1.0) > 1e-9):
            raise ValueError("frame vectors must be unit norm")
        all_idx = np.concatenate(blocks) if blocks else np.array([], dtype=int)
        if all_idx.size != np.unique(all_idx).size:
            raise ValueError("blocks must be disjoint")
        if self.lower_bound < 0:
            raise ValueError("frame lower bound must be nonnegative")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "frame", frame)


def build_range_partition(
    Z0: PolarMatrix,
    range_basis: Subspace | None = None,
    angle_tol: float = 1e-6,
) -> RangePartition:
    """Cluster the support columns of ``Z0`` by direction up to sign.

    For rank-one signals this yields a single block with lower bound one.  The
    lower bound is the smallest eigenvalue of ``sum_l eta_l eta_l^T``
    restricted to the signal range (given or derived from the directions).
    """
    S = Z0.support
    if S.size == 0:
        raise ValueError("signal must be nonzero")
    cos_tol = math.cos(angle_tol)
    reps: list[np.ndarray] = []
    members: list[list[int]] = []
    for i in S:
        h = Z0.directions[:, i]
        for l, eta in enumerate(reps):
            if abs(float(eta @ h)) >= cos_tol:
                members[l].append(int(i))
                break
        else:
            sign = 1.0
            nz = np.flatnonzero(np.abs(h) > 1e-12)
            if nz.size and h[nz[0]] < 0:
                sign = -1.0
            reps.append(sign * h)
            members.append([int(i)])
    frame = np.column_stack(reps)
    Q = (range_basis or Subspace.from_span(Z0.directions[:, S])).basis
    M = Q.T @ (frame @ frame.T) @ Q
    lam = float(np.linalg.eigvalsh(M).min()) if Q.shape[1] else 0.0
    return RangePartition(
        blocks=tuple(np.array(m, dtype=int) for m in members),
        frame=frame,
        lower_bound=max(lam, 0.0),
    )


def range_angle_bound(
    z_hat: PolarMatrix,
    S,
    alpha: float,
    partition: RangePartition,
) -> float:
    """Bound on the sine of the angle between the leading left singular
    subspace of the minimizer and the true signal range.

    Returns ``inf`` when the denominator argument is not positive (the bound
    is then vacuous).
    """
    S = as_support(S, z_hat.n)
    w = z_hat.weights
    off = support_complement(S, z_hat.n)
    sa = math.sin(alpha)
    zS = float(np.linalg.norm(w[S]))
    zOff = float(np.linalg.norm(w[off])) if off.size else 0.0
    min_block = min(float(np.linalg.norm(w[b])) for b in partition.blocks)
    den_sq = partition.lower_bound * min_block**2 - sa * zS**2
    if den_sq <= 0.0:
        return math.inf
    return max(sa * zS, zOff) / math.sqrt(den_sq)


def subdiff_member(
    v: np.ndarray,
    i: int,
    S,
    H0_subspace: Subspace,
    h_i0: np.ndarray | None = None,
    tol: float = 1e-9,
) -> bool:
    """Membership test for the subdifferential of the subspace-penalized
    column-norm sum at a signal with range ``H0_subspace``.

    On the support the column must equal the true direction plus a vector of
    norm at most one orthogonal to the range; off the support it must decompose
    as a unit-ball vector plus an orthogonal-complement vector of norm at most
    one, which after clipping the orthogonal part reduces to
    ``||parallel||^2 + (||orth|| - 1)_+^2 <= 1``.
    """
    v = np.asarray(v, dtype=float).ravel()
    S = set(int(j) for j in np.asarray(S, dtype=int).ravel())
    on_support = int(i) in S
    if on_support and h_i0 is None:
        raise ValueError("support index needs the true direction")
    if not on_support and h_i0 is not None:
        raise ValueError("off-support index must not carry a direction")
    par = H0_subspace.project(v)
    perp = v - par
    if on_support:
        return bool(
            np.linalg.norm(par - np.asarray(h_i0, dtype=float)) <= tol
            and np.linalg.norm(perp) <= 1.0 + tol
        )
    q = float(np.linalg.norm(perp))
    clipped = perp if q <= 1.0 else perp / q
    return bool(np.linalg.norm(v - clipped) <= 1.0 + tol)
