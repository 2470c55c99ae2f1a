import numpy as np
import pytest

from colsparse.bench import InstanceSpec, generate_instance, operator_seed
from colsparse.core import Subspace, l12_norm, polar_decompose
from colsparse.operators import sample_gaussian
from colsparse.recovery import (
    NastConfig,
    StreamlineConfig,
    column_streamline,
    nast,
    select_support,
)
from colsparse.solvers import SolverConfig, solve_l12, solve_streamlined

from conftest import make_rng, sparse_instance


def test_select_support_sparse_matrix():
    Z = np.zeros((3, 10))
    Z[:, [2, 7]] = make_rng(0).standard_normal((3, 2))
    S = select_support(Z, s=2, tau_thresh=1.0 - 1e-12)
    assert list(S) == [2, 7]


def test_select_support_equal_norms():
    Z = np.ones((2, 10))
    S = select_support(Z, s=1, tau_thresh=0.5)
    assert list(S) == [0, 1, 2, 3, 4]


def test_select_support_at_least_s():
    Z = np.zeros((2, 8))
    Z[0, 3] = 10.0
    S = select_support(Z, s=4, tau_thresh=0.5)
    assert len(S) == 4
    assert 3 in S


def test_select_support_exactly_s_when_mass_concentrated():
    rng = make_rng(1)
    Z = np.zeros((3, 12))
    S_true = [1, 5, 9]
    Z[:, S_true] = rng.standard_normal((3, 3)) * 5
    Z[:, 0] = 1e-4
    on_mass = np.linalg.norm(Z[:, S_true], axis=0).sum()
    frac = on_mass / np.linalg.norm(Z, axis=0).sum()
    S = select_support(Z, s=3, tau_thresh=min(frac - 1e-9, 0.999))
    assert len(S) == 3
    assert list(S) == S_true


def test_nast_config_validation():
    with pytest.raises(ValueError):
        NastConfig(s=0)
    with pytest.raises(ValueError):
        NastConfig(s=2, tau_thresh=1.0)


def test_nast_support_soundness():
    # Whenever the off-support mass fraction is at most 1 - tau, the selected
    # set contains the true support.
    k, n, s, m = 4, 18, 3, 30
    tau = 0.9
    checked = 0
    for seed in range(10):
        rng = make_rng(700 + seed)
        Z0, S_true = sparse_instance(rng, k, n, s, r=1)
        A = sample_gaussian(k, n, m, seed=seed)
        res = solve_l12(A, A.apply(Z0))
        norms = np.linalg.norm(res.Z, axis=0)
        off = np.setdiff1d(np.arange(n), S_true)
        if norms.sum() == 0 or norms[off].sum() / norms.sum() > 1 - tau:
            continue
        checked += 1
        S_hat = select_support(res.Z, s, tau)
        assert np.all(np.isin(S_true, S_hat))
    assert checked >= 5


def test_nast_beats_plain_l12_small():
    k, n, s, m = 6, 30, 4, 45
    wins = ties = 0
    for seed in range(8):
        rng = make_rng(800 + seed)
        Z0, _ = sparse_instance(rng, k, n, s, r=1)
        A = sample_gaussian(k, n, m, seed=seed)
        b = A.apply(Z0)
        first = solve_l12(A, b)
        out = nast(A, b, NastConfig(s=s), l12_result=first)
        err_l12 = np.linalg.norm(first.Z - Z0) / np.linalg.norm(Z0)
        err_nast = np.linalg.norm(out.Z - Z0) / np.linalg.norm(Z0)
        ok_l12 = err_l12 < 1e-3
        ok_nast = err_nast < 1e-3
        assert ok_nast >= ok_l12  # thresholding never hurts on these draws
        wins += ok_nast and not ok_l12
        ties += ok_nast == ok_l12
    assert wins >= 1


def test_nast_reuses_first_stage():
    k, n, s, m = 3, 12, 2, 20
    rng = make_rng(2)
    Z0, _ = sparse_instance(rng, k, n, s, r=1)
    A = sample_gaussian(k, n, m, seed=3)
    b = A.apply(Z0)
    first = solve_l12(A, b)
    out = nast(A, b, NastConfig(s=s), l12_result=first)
    assert out.l12 is first


def test_streamline_config_validation():
    with pytest.raises(ValueError):
        StreamlineConfig(r=0)
    with pytest.raises(ValueError):
        StreamlineConfig(r=1, col_tol=1e-3)


def test_streamline_zero_rhs_stops_immediately():
    A = sample_gaussian(4, 10, 8, seed=5)
    Y, hist = column_streamline(A, np.zeros(8), StreamlineConfig(r=1))
    assert np.allclose(Y, 0.0)
    assert hist.stop_reason == "iterate_change"
    assert len(hist.objectives) == 2  # init solve plus one refinement


def test_streamline_rejects_rank_at_k():
    A = sample_gaussian(3, 10, 8, seed=6)
    with pytest.raises(ValueError):
        column_streamline(A, np.zeros(8), StreamlineConfig(r=3))


def test_streamline_oracle_subspace_recovers_below_plain_threshold():
    # With the true range injected, the subspace-penalized program succeeds at
    # a measurement count where the plain program fails.
    k, n, s, m = 10, 100, 10, 160
    cfg = StreamlineConfig(r=1, max_iters=3, solver=SolverConfig(max_iters=8000))
    hits_stream = 0
    trials = 6
    for t in range(trials):
        spec = InstanceSpec(k=k, n=n, s=s, r=1, seed=40_000 + t)
        inst = generate_instance(spec)
        A = sample_gaussian(k, n, m, seed=operator_seed(spec, m))
        b = A.apply(inst.Z0)
        Y, hist = column_streamline(A, b, cfg, V0=inst.range_basis)
        err = np.linalg.norm(Y - inst.Z0) / np.linalg.norm(inst.Z0)
        hits_stream += err < 1e-3
    assert hits_stream > trials / 2


def test_streamline_fixed_point_objective():
    # Solving the subspace-penalized program at the true range from the true
    # signal cannot end above the signal's own objective value.
    k, n, s, m = 5, 20, 3, 40
    rng = make_rng(7)
    Z0, S = sparse_instance(rng, k, n, s, r=1)
    A = sample_gaussian(k, n, m, seed=8)
    b = A.apply(Z0)
    V = Subspace.from_span(polar_decompose(Z0).directions[:, S])
    res = solve_streamlined(A, b, V, x0=Z0, y0=np.zeros(m))
    assert res.converged
    assert res.objective <= l12_norm(Z0) + 1e-6


def test_streamline_history_well_formed():
    k, n, s, m = 4, 16, 3, 26
    rng = make_rng(9)
    Z0, _ = sparse_instance(rng, k, n, s, r=2)
    A = sample_gaussian(k, n, m, seed=10)
    Y, hist = column_streamline(A, A.apply(Z0), StreamlineConfig(r=2, max_iters=4))
    assert len(hist.objectives) == len(hist.drifts) == len(hist.singular_values)
    for sv in hist.singular_values:
        assert np.all(np.diff(sv) <= 1e-12)
    for d in hist.drifts:
        assert 0.0 <= d <= 1.0
    assert hist.stop_reason in {"iterate_change", "max_iters"}


def test_streamline_early_nuclear_finish():
    k, n, s, m = 5, 24, 3, 42
    rng = make_rng(11)
    Z0, _ = sparse_instance(rng, k, n, s, r=1)
    A = sample_gaussian(k, n, m, seed=12)
    cfg = StreamlineConfig(r=1, max_iters=5, early_support=2 * s)
    Y, hist = column_streamline(A, A.apply(Z0), cfg)
    assert hist.stop_reason in {"early_nuclear_finish", "iterate_change"}
    if hist.stop_reason == "early_nuclear_finish":
        assert hist.nuclear_finish is not None
        err = np.linalg.norm(Y - Z0) / np.linalg.norm(Z0)
        assert err < 1e-3


def test_streamline_singular_value_stop():
    k, n, s, m = 5, 20, 3, 40
    rng = make_rng(13)
    Z0, _ = sparse_instance(rng, k, n, s, r=1)
    A = sample_gaussian(k, n, m, seed=14)
    cfg = StreamlineConfig(r=1, max_iters=6, iterate_tol=None, sv_tol=1e-6)
    Y, hist = column_streamline(A, A.apply(Z0), cfg)
    assert hist.stop_reason in {"singular_value", "max_iters"}
