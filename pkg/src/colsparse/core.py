"""Matrix containers, polar decomposition, norms, angles, and proximal primitives.

Signals are matrices ``Z`` of shape ``(k, n)``: ``n`` columns of length ``k``,
with sparsity counted column-wise.  Every routine here is pure and operates on
plain numpy arrays; the small container classes are immutable value types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolarMatrix",
    "Subspace",
    "angular_distance",
    "as_support",
    "block_soft_threshold",
    "l12_norm",
    "linf2_norm",
    "polar_decompose",
    "principal_angle_sin",
    "support_complement",
    "top_r_left_subspace",
]


def l12_norm(Z) -> float:
    """Sum of the Euclidean norms of the columns of ``Z``."""
    Z = np.asarray(Z, dtype=float)
    return float(np.linalg.norm(Z, axis=0).sum())


def linf2_norm(Z) -> float:
    """Largest Euclidean column norm of ``Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return 0.0
    return float(np.linalg.norm(Z, axis=0).max())


@dataclass(frozen=True)
class PolarMatrix:
    """Column-wise polar form of a matrix: nonnegative weights times unit directions.

    ``weights[i]`` is the Euclidean norm of column ``i`` and ``directions[:, i]``
    the corresponding unit vector.  Columns with zero weight carry no direction;
    they are stored as zero columns and flagged by :attr:`has_direction`.
    """

    weights: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        H = np.asarray(self.directions, dtype=float)
        if w.ndim != 1 or H.ndim != 2 or H.shape[1] != w.shape[0]:
            raise ValueError("weights must be (n,) and directions (k, n)")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(H)):
            raise ValueError("weights must be finite and nonnegative")
        norms = np.linalg.norm(H, axis=0)
        live = w > 0
        if np.any(np.abs(norms[live] - 1.0) > 1e-12):
            raise ValueError("directions of positive-weight columns must be unit norm")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", H)

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def has_direction(self) -> np.ndarray:
        return self.weights > 0

    @property
    def support(self) -> np.ndarray:
        """Indices of nonzero columns, strictly increasing."""
        return np.flatnonzero(self.weights > 0)

    def direction(self, i: int):
        """Unit direction of column ``i``, or ``None`` if the column is zero."""
        if self.weights[i] == 0:
            return None
        return self.directions[:, i]

    def to_matrix(self) -> np.ndarray:
        """Recompose the dense ``(k, n)`` matrix."""
        return self.directions * self.weights


def polar_decompose(Z) -> PolarMatrix:
    """Split ``Z`` into nonnegative column weights and unit column directions.

    Weights are the Euclidean column norms.  Columns that are exactly zero get
    an absent direction (stored as a zero column) so the map is a pure function
    of ``Z``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("expected a (k, n) matrix")
    if not np.all(np.isfinite(Z)):
        raise ValueError("matrix entries must be finite")
    w = np.linalg.norm(Z, axis=0)
    H = np.zeros_like(Z)
    live = w > 0
    H[:, live] = Z[:, live] / w[live]
    return PolarMatrix(weights=w, directions=H)


def as_support(indices, n: int) -> np.ndarray:
    """Validate and sort a support set: distinct integers in ``[0, n)``."""
    S = np.asarray(indices, dtype=int).ravel()
    if S.size and (S.min() < 0 or S.max() >= n):
        raise ValueError("support indices out of range")
    S = np.sort(S)
    if S.size != np.unique(S).size:
        raise ValueError("support indices must be distinct")
    return S


def support_complement(S, n: int) -> np.ndarray:
    """Indices in ``[0, n)`` not contained in ``S``."""
    mask = np.ones(n, dtype=bool)
    mask[as_support(S, n)] = False
    return np.flatnonzero(mask)


def angular_distance(h, g) -> float:
    """Geodesic distance ``arccos(<h, g>)`` between two directions on the sphere.

    Inputs are renormalized internally; exactly-zero vectors are rejected.  The
    inner product is clamped to ``[-1, 1]`` so rounding noise cannot escape the
    domain of ``arccos``.
    """
    h = np.asarray(h, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    if h.shape != g.shape:
        raise ValueError("direction vectors must have equal length")
    nh = np.linalg.norm(h)
    ng = np.linalg.norm(g)
    if nh == 0.0 or ng == 0.0:
        raise ValueError("zero vector has no direction")
    c = float(np.dot(h, g) / (nh * ng))
    return float(np.arccos(min(1.0, max(-1.0, c))))


def _fix_basis_signs(U: np.ndarray) -> np.ndarray:
    """Flip basis-vector signs so the first nonzero entry of each is positive."""
    U = U.copy()
    for j in range(U.shape[1]):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0:
            U[:, j] = -col
    return U


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^k given by an orthonormal basis of shape ``(k, r)``.

    ``r`` may be zero (the trivial subspace).  Basis-dependent quantities are
    never exposed; all derived operations (projections, principal angles) are
    invariant under sign and rotation of the basis.
    """

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2:
            raise ValueError("basis must be a (k, r) array")
        k, r = B.shape
        if r > k:
            raise ValueError("subspace dimension exceeds ambient dimension")
        if r:
            gram = B.T @ B
            if np.max(np.abs(gram - np.eye(r))) > 1e-10:
                raise ValueError("basis columns must be orthonormal")
        object.__setattr__(self, "basis", B)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_span(cls, vectors, rcond: float = 1e-12) -> "Subspace":
        """Orthonormalize the span of the given ``(k, j)`` collection of vectors."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        if V.ndim != 2:
            raise ValueError("expected a (k, j) array of spanning vectors")
        if V.shape[1] == 0:
            return cls(basis=np.zeros((V.shape[0], 0)))
        U, svals, _ = np.linalg.svd(V, full_matrices=False)
        rank = int(np.sum(svals > rcond * max(1.0, svals[0] if svals.size else 0.0)))
        return cls(basis=_fix_basis_signs(U[:, :rank]))

    @classmethod
    def zero(cls, k: int) -> "Subspace":
        return cls(basis=np.zeros((k, 0)))

    @classmethod
    def full(cls, k: int) -> "Subspace":
        return cls(basis=np.eye(k))

    def project(self, X) -> np.ndarray:
        """Orthogonal projection of vectors (columns of ``X``) onto the subspace."""
        X = np.asarray(X, dtype=float)
        if self.dim == 0:
            return np.zeros_like(X)
        return self.basis @ (self.basis.T @ X)

    def project_out(self, X) -> np.ndarray:
        """Component of ``X`` orthogonal to the subspace."""
        return np.asarray(X, dtype=float) - self.project(X)


def principal_angle_sin(E: Subspace, F: Subspace) -> float:
    """Sine of the principal angle between subspaces: ``||P_{E_perp} P_F||``.

    Computed from the singular values of ``(I - B_E B_E^T) B_F`` where the
    ``B``'s are orthonormal bases, which equals the operator norm of the
    projector product without forming any ``k x k`` matrix.
    """
    if E.ambient_dim != F.ambient_dim:
        raise ValueError("subspaces live in different ambient dimensions")
    if F.dim == 0:
        return 0.0
    M = F.basis - E.project(F.basis)
    s = np.linalg.svd(M, compute_uv=False)
    return float(min(1.0, s[0] if s.size else 0.0))


def block_soft_threshold(v, t: float) -> np.ndarray:
    """Shrink the Euclidean norm of ``v`` by ``t``: ``(1 - t/||v||)_+ v``.

    This is the proximal map of ``t * ||.||_2``; the zero vector maps to zero.
    """
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv <= t:
        return np.zeros_like(v)
    return (1.0 - t / nv) * v


def top_r_left_subspace(Z, r: int) -> Subspace:
    """Span of the ``r`` leading left singular vectors of ``Z``.

    Singular values are taken in nonincreasing order with ties broken by
    retaining the first ``r`` vectors; basis signs are fixed so the result is
    deterministic.
    """
    Z = np.asarray(Z, dtype=float)
    k, n = Z.shape
    if not (1 <= r <= min(k, n)):
        raise ValueError("rank target out of range")
    U, _, _ = np.linalg.svd(Z, full_matrices=False)
    return Subspace(basis=_fix_basis_signs(U[:, :r]))
