"""Block-structured linear measurement operators on column-sparse matrices.

A measurement map sends a ``(k, n)`` matrix ``Z`` to ``m`` numbers via
``sum_i A_i Z(i)`` with per-column blocks ``A_i`` of shape ``(m, k)``.  The
blocks are the canonical storage; a flattened ``(m, k*n)`` matrix acting on
column-stacked ``Z`` is kept as a cached view for fast repeated application
and for dense oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import PolarMatrix, as_support

__all__ = [
    "MeasurementOp",
    "operator_norm",
    "sample_gaussian",
]


@dataclass
class MeasurementOp:
    """Linear map ``R^{k x n} -> R^m`` stored as ``n`` blocks of shape ``(m, k)``."""

    blocks: np.ndarray
    _flat: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        B = np.asarray(self.blocks, dtype=float)
        if B.ndim != 3:
            raise ValueError("blocks must have shape (n, m, k)")
        if not np.all(np.isfinite(B)):
            raise ValueError("block entries must be finite")
        self.blocks = B
        self._flat = None

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def k(self) -> int:
        return self.blocks.shape[2]

    def block(self, i: int) -> np.ndarray:
        """The ``(m, k)`` block acting on column ``i``."""
        return self.blocks[i]

    @property
    def flat(self) -> np.ndarray:
        """Dense ``(m, k*n)`` matrix acting on ``Z.ravel(order="F")``."""
        if self._flat is None:
            n, m, k = self.blocks.shape
            self._flat = np.ascontiguousarray(
                self.blocks.transpose(1, 0, 2).reshape(m, n * k)
            )
        return self._flat

    def apply(self, Z) -> np.ndarray:
        """Measurements of the matrix ``Z``: ``sum_i A_i Z(i)``."""
        Z = np.asarray(Z, dtype=float)
        if Z.shape != (self.k, self.n):
            raise ValueError(f"expected matrix of shape {(self.k, self.n)}")
        return self.flat @ Z.ravel(order="F")

    def adjoint(self, p) -> np.ndarray:
        """Adjoint image of a dual vector: column ``i`` equals ``A_i^T p``."""
        p = np.asarray(p, dtype=float).ravel()
        if p.shape != (self.m,):
            raise ValueError(f"expected dual vector of length {self.m}")
        return (self.flat.T @ p).reshape(self.k, self.n, order="F")

    def _directions(self, H) -> np.ndarray:
        if isinstance(H, PolarMatrix):
            H = H.directions
        H = np.asarray(H, dtype=float)
        if H.shape != (self.k, self.n):
            raise ValueError(f"expected directions of shape {(self.k, self.n)}")
        return H

    def induced(self, H, cols=None) -> np.ndarray:
        """Matrix of the map ``z -> sum_i z_i A_i h_i`` for fixed directions ``H``.

        Column ``i`` of the result is ``A_i h_i``.  ``cols`` restricts to a
        subset of column indices.  Absent (non-unit) directions among the
        requested columns are rejected.
        """
        H = self._directions(H)
        idx = np.arange(self.n) if cols is None else as_support(cols, self.n)
        norms = np.linalg.norm(H[:, idx], axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-8):
            raise ValueError("all requested columns must carry a unit direction")
        out = np.empty((self.m, idx.size))
        for j, i in enumerate(idx):
            out[:, j] = self.blocks[i] @ H[:, i]
        return out

    def block_norms(self) -> np.ndarray:
        """Operator norm (largest singular value) of every block."""
        return np.array(
            [np.linalg.svd(self.blocks[i], compute_uv=False)[0] for i in range(self.n)]
        )

    def restricted_sigma_min(self, H0, S) -> float:
        """Smallest singular value of the induced map restricted to columns ``S``."""
        S = as_support(S, self.n)
        if S.size == 0:
            raise ValueError("support must be nonempty")
        M = self.induced(H0, cols=S)
        return float(np.linalg.svd(M, compute_uv=False)[-1])

    def to_json(self) -> str:
        """Serialize dims plus row-major block entries for experiment replay."""
        return json.dumps(
            {
                "m": self.m,
                "k": self.k,
                "n": self.n,
                "blocks": self.blocks.ravel(order="C").tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MeasurementOp":
        obj = json.loads(text)
        blocks = np.asarray(obj["blocks"], dtype=float).reshape(
            obj["n"], obj["m"], obj["k"]
        )
        return cls(blocks=blocks)


def sample_gaussian(k: int, n: int, m: int, seed: int) -> MeasurementOp:
    """Draw an operator with i.i.d. standard normal entries.

    Entries come from a counter-based Philox stream, so an identical seed gives
    a bit-identical operator and independent trials can derive disjoint streams
    without shared state.  Entries are unnormalized N(0, 1); the recovery
    thresholds of interest are invariant under rescaling the operator.
    """
    if min(k, n, m) < 1:
        raise ValueError("all dimensions must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    return MeasurementOp(blocks=rng.standard_normal((n, m, k)))


def operator_norm(A: MeasurementOp, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral norm of the flattened map."""
    F = A.flat
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
