import numpy as np
import pytest


def make_rng(seed=0):
    return np.random.default_rng(seed)


@pytest.fixture
def rng():
    return make_rng(12345)


def random_unit(rng, k):
    v = rng.standard_normal(k)
    return v / np.linalg.norm(v)


def sparse_instance(rng, k, n, s, r=1):
    """Draw a rank-r signal with s active columns; returns (Z0, support)."""
    S = np.sort(rng.choice(n, size=s, replace=False))
    H = rng.standard_normal((k, r))
    H /= np.linalg.norm(H, axis=0)
    W = rng.standard_normal((r, s))
    Z0 = np.zeros((k, n))
    Z0[:, S] = H @ W
    return Z0, S


def cap_projection_oracle(v, h, radius, floor):
    """Projection of v onto {w: ||w|| <= radius, <w, h> >= floor} by direct
    constrained minimization of the squared distance (independent of any
    closed-form distance expression)."""
    from scipy.optimize import minimize

    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)

    res = minimize(
        lambda w: np.sum((w - v) ** 2),
        x0=np.clip(v, -radius, radius) * 0.0 + floor * h,
        jac=lambda w: 2.0 * (w - v),
        constraints=[
            {
                "type": "ineq",
                "fun": lambda w: radius**2 - np.sum(w**2),
                "jac": lambda w: -2.0 * w,
            },
            {
                "type": "ineq",
                "fun": lambda w: float(w @ h) - floor,
                "jac": lambda w: h,
            },
        ],
        method="SLSQP",
        options={"maxiter": 300, "ftol": 1e-14},
    )
    return res.x
