import numpy as np
import pytest

from colsparse.core import polar_decompose
from colsparse.operators import MeasurementOp, operator_norm, sample_gaussian

from conftest import make_rng, sparse_instance


def test_sampling_deterministic():
    A1 = sample_gaussian(2, 3, 4, seed=7)
    A2 = sample_gaussian(2, 3, 4, seed=7)
    assert np.array_equal(A1.blocks, A2.blocks)
    A3 = sample_gaussian(2, 3, 4, seed=8)
    assert not np.array_equal(A1.blocks, A3.blocks)


def test_sampling_moments():
    A = sample_gaussian(10, 100, 1000, seed=1)
    entries = A.blocks.ravel()
    assert entries.size == 10**6
    # 5 sigma band around zero mean and unit variance.
    assert abs(entries.mean()) < 5.0 / np.sqrt(entries.size)
    assert abs(entries.var() - 1.0) < 0.01


def test_apply_zero_and_one_hot():
    A = sample_gaussian(3, 5, 7, seed=2)
    assert np.allclose(A.apply(np.zeros((3, 5))), 0.0)
    rng = make_rng(0)
    h = rng.standard_normal(3)
    for i in range(5):
        Z = np.zeros((3, 5))
        Z[:, i] = h
        assert np.allclose(A.apply(Z), A.block(i) @ h)


def test_apply_matches_flattening_oracle():
    rng = make_rng(4)
    A = sample_gaussian(4, 6, 9, seed=3)
    dense = np.hstack([A.block(i) for i in range(A.n)])
    for _ in range(20):
        Z = rng.standard_normal((4, 6))
        oracle = dense @ Z.ravel(order="F")
        assert np.linalg.norm(A.apply(Z) - oracle) <= 1e-10 * max(
            1.0, np.linalg.norm(oracle)
        )


def test_adjoint_zero_and_single_block():
    A = sample_gaussian(3, 1, 6, seed=5)
    assert np.allclose(A.adjoint(np.zeros(6)), 0.0)
    rng = make_rng(1)
    p = rng.standard_normal(6)
    assert np.allclose(A.adjoint(p)[:, 0], A.block(0).T @ p)


def test_adjointness_identity():
    rng = make_rng(6)
    A = sample_gaussian(3, 7, 11, seed=6)
    for _ in range(1000):
        Z = rng.standard_normal((3, 7))
        p = rng.standard_normal(11)
        lhs = float(A.apply(Z) @ p)
        rhs = float((Z * A.adjoint(p)).sum())
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_induced_map_definition():
    rng = make_rng(8)
    A = sample_gaussian(4, 5, 9, seed=9)
    H = rng.standard_normal((4, 5))
    H /= np.linalg.norm(H, axis=0)
    M = A.induced(H)
    for i in range(5):
        assert np.allclose(M[:, i], A.block(i) @ H[:, i])
    # adjoint of the induced map
    for _ in range(20):
        p = rng.standard_normal(9)
        expected = np.array([H[:, i] @ (A.block(i).T @ p) for i in range(5)])
        assert np.linalg.norm(M.T @ p - expected) <= 1e-10 * max(
            1.0, np.linalg.norm(expected)
        )
    # consistency with apply on z.H
    for _ in range(20):
        z = rng.standard_normal(5)
        assert np.linalg.norm(A.apply(H * z) - M @ z) <= 1e-10 * max(
            1.0, np.linalg.norm(M @ z)
        )


def test_induced_rejects_absent_direction():
    A = sample_gaussian(3, 4, 5, seed=10)
    H = np.zeros((3, 4))
    H[0, :3] = 1.0
    with pytest.raises(ValueError):
        A.induced(H)
    # restricting to live columns is fine
    assert A.induced(H, cols=[0, 1, 2]).shape == (5, 3)


def test_block_norms():
    blocks = np.stack([np.eye(3), 2.0 * np.eye(3)])
    A = MeasurementOp(blocks=blocks)
    assert np.allclose(A.block_norms(), [1.0, 2.0])


def test_block_norms_match_power_iteration_oracle():
    A = sample_gaussian(4, 3, 6, seed=11)
    norms = A.block_norms()
    rng = make_rng(2)
    for i in range(3):
        B = A.block(i)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        for _ in range(500):
            w = B.T @ (B @ v)
            v = w / np.linalg.norm(w)
        est = np.linalg.norm(B @ v)
        assert norms[i] == pytest.approx(est, abs=1e-8)


def test_restricted_sigma_min_trivial():
    # Blocks built as q_i h_i^T give induced columns q_i.
    k = 3
    q = np.eye(4)
    h = np.eye(3)[:, [0, 1, 2, 0]]
    blocks = np.stack([np.outer(q[:, i], h[:, i]) for i in range(4)])
    A = MeasurementOp(blocks=blocks)
    H = h / np.linalg.norm(h, axis=0)
    assert A.restricted_sigma_min(H, [0, 1, 2]) == pytest.approx(1.0)
    # singleton support equals the norm of the induced column
    assert A.restricted_sigma_min(H, [1]) == pytest.approx(
        np.linalg.norm(A.block(1) @ H[:, 1])
    )


def test_restricted_sigma_min_matches_gram_oracle():
    rng = make_rng(13)
    A = sample_gaussian(4, 8, 12, seed=13)
    H = rng.standard_normal((4, 8))
    H /= np.linalg.norm(H, axis=0)
    S = [1, 3, 6]
    M = np.column_stack([A.block(i) @ H[:, i] for i in S])
    oracle = np.sqrt(np.linalg.eigvalsh(M.T @ M).min())
    assert A.restricted_sigma_min(H, S) == pytest.approx(oracle, abs=1e-9)


def test_restricted_sigma_min_positive_at_generous_m():
    # Full column rank of the support-restricted induced map at m >= 4 max(s,k).
    k, n, s = 3, 10, 4
    m = 4 * max(s, k)
    for seed in range(100):
        rng = make_rng(1000 + seed)
        Z0, S = sparse_instance(rng, k, n, s, r=1)
        H = polar_decompose(Z0).directions
        A = sample_gaussian(k, n, m, seed=seed)
        assert A.restricted_sigma_min(H, S) > 0


def test_operator_norm_estimate():
    A = sample_gaussian(5, 6, 20, seed=21)
    exact = np.linalg.svd(A.flat, compute_uv=False)[0]
    assert operator_norm(A, iters=100) == pytest.approx(exact, rel=1e-6)


def test_json_round_trip():
    A = sample_gaussian(3, 4, 5, seed=30)
    B = MeasurementOp.from_json(A.to_json())
    assert np.array_equal(A.blocks, B.blocks)
    assert (B.m, B.k, B.n) == (5, 3, 4)


def test_shape_validation():
    A = sample_gaussian(3, 4, 5, seed=31)
    with pytest.raises(ValueError):
        A.apply(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        A.adjoint(np.zeros(4))
    with pytest.raises(ValueError):
        sample_gaussian(0, 1, 1, seed=0)
