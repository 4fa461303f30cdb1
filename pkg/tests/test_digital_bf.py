import numpy as np
import pytest
from oracles import crandn, digital_objective, project_per_bs, projected_gradient

from pass_cellfree.digital_bf import (
    build_coefficients,
    kkt_residuals,
    linear_term,
    matched_filter_init,
    objective,
    per_bs_update,
    sequential_digital_bf,
)


def random_problem(rng, L=2, N=2, K=2):
    H = crandn(rng, K, L * N)
    u = crandn(rng, K)
    q = rng.uniform(0.5, 3.0, K)
    return H, build_coefficients(H, u, q, L, N)


def test_coefficients_match_definitions(rng):
    H, c = random_problem(rng)
    u, q = crandn(rng, 2), np.array([1.5, 0.7])
    c = build_coefficients(H, u, q, 2, 2)
    A = sum(q[t] * abs(u[t]) ** 2 * np.outer(H[t], H[t].conj()) for t in range(2))
    np.testing.assert_allclose(c.A, A, rtol=1e-12)
    np.testing.assert_allclose(c.a[:, 1], q[1] * u[1] * H[1], rtol=1e-12)
    np.testing.assert_allclose(c.block(0, 1), c.block(1, 0).conj().T)
    W = crandn(rng, 4, 2)
    assert objective(c, W) == pytest.approx(digital_objective(c.A, c.a, W), rel=1e-12)


def test_objective_equals_weighted_mse_up_to_constant(rng):
    """The quadratic is ``sum_k q_k e_k`` minus terms independent of ``W``."""
    from pass_cellfree.metrics import mses

    H = crandn(rng, 2, 4)
    u, q = crandn(rng, 2), np.array([1.3, 0.4])
    c = build_coefficients(H, u, q, 2, 2)
    sigma2 = 0.2

    def weighted(W):
        return float(np.sum(q * mses(H, W, u, sigma2)))

    W1, W2 = crandn(rng, 4, 2), crandn(rng, 4, 2)
    assert weighted(W1) - weighted(W2) == pytest.approx(objective(c, W1) - objective(c, W2), rel=1e-10)


def test_single_user_single_bs_is_scaled_channel(rng):
    h = crandn(rng, 1, 3)
    c = build_coefficients(h, np.array([2.0 + 1j]), np.array([5.0]), 1, 3)
    P = 1e-3  # unconstrained solution has much larger power
    W, lam = per_bs_update(c, np.zeros((3, 1), complex), 0, P)
    assert lam > 0
    assert np.sum(np.abs(W) ** 2) == pytest.approx(P, rel=1e-9)
    cos = abs(np.vdot(h[0], W[:, 0])) / (np.linalg.norm(h) * np.linalg.norm(W))
    assert cos == pytest.approx(1.0, abs=1e-12)


def test_rank_one_block_gives_minimum_norm_solution(rng):
    """Only user 0 has weight; BS 0 serves it alone, so A_00 is rank one."""
    H = crandn(rng, 2, 4)
    H[0, 2:] = 0
    u = np.array([0.3 + 0.2j, 0.0])
    c = build_coefficients(H, u, np.array([2.0, 1.0]), 2, 2)
    W, lam = per_bs_update(c, np.zeros((4, 2), complex), 0, 1e6)
    assert lam == 0.0
    A00 = c.block(0, 0)
    np.testing.assert_allclose(W, np.linalg.pinv(A00, hermitian=True) @ linear_term(c, np.zeros((4, 2)), 0), atol=1e-12)
    # column of user 0 is parallel to h_{0,0}; user 1 gets nothing
    assert np.linalg.norm(W[:, 1]) < 1e-12
    assert abs(abs(np.vdot(H[0, :2], W[:, 0])) - np.linalg.norm(H[0, :2]) * np.linalg.norm(W[:, 0])) < 1e-12


def test_per_bs_update_beats_random_feasible_samples(rng):
    for _ in range(5):
        H, c = random_problem(rng)
        P = rng.uniform(0.1, 2.0)
        W = project_per_bs(crandn(rng, 4, 2), 2, 2, P)
        W_l, _ = per_bs_update(c, W, 1, P)
        best = W.copy()
        best[2:] = W_l
        f_best = objective(c, best)
        for _ in range(1000):
            trial = W.copy()
            s = crandn(rng, 2, 2)
            trial[2:] = s * np.sqrt(P * rng.uniform()) / np.linalg.norm(s)
            assert objective(c, trial) >= f_best - 1e-12 * abs(f_best)


def test_sequential_matches_projected_gradient(rng):
    for _ in range(5):
        H, c = random_problem(rng)
        P = rng.uniform(0.2, 3.0)
        W0 = matched_filter_init(H, 2, 2, P)
        res = sequential_digital_bf(c, W0, P)
        ref = projected_gradient(c.A, c.a, W0, 2, 2, P)
        f_ref = objective(c, ref)
        assert abs(res.objective - f_ref) <= 1e-5 * abs(f_ref)
        assert res.converged


def test_sweeps_are_monotone_and_feasible(rng):
    H, c = random_problem(rng, L=3, N=2, K=2)
    P = 0.5
    res = sequential_digital_bf(c, matched_filter_init(H, 3, 2, P), P)
    assert np.all(np.diff(res.history) <= 1e-12 * np.abs(res.history[:-1]))
    for l in range(3):
        assert np.sum(np.abs(res.W[2 * l : 2 * l + 2]) ** 2) <= P * (1 + 1e-9)


def test_kkt_residuals_at_termination(rng):
    for _ in range(5):
        H, c = random_problem(rng)
        P = rng.uniform(0.2, 3.0)
        res = sequential_digital_bf(c, matched_filter_init(H, 2, 2, P), P)
        for stat, slack in kkt_residuals(c, res.W, res.multipliers, P):
            assert stat <= 1e-8 and slack <= 1e-8


def test_single_bs_needs_one_sweep(rng):
    H, c = random_problem(rng, L=1, N=3, K=2)
    res = sequential_digital_bf(c, matched_filter_init(H, 1, 3, 0.4), 0.4, tol=0.0, max_sweeps=2, kkt_tol=None)
    assert abs(res.history[2] - res.history[1]) < 1e-12 * abs(res.history[1])


def test_max_sweeps_flag(rng):
    H, c = random_problem(rng)
    res = sequential_digital_bf(c, matched_filter_init(H, 2, 2, 1.0), 1.0, tol=0.0, max_sweeps=3, kkt_tol=None)
    assert not res.converged and res.sweeps == 3


def test_matched_filter_init_uses_full_power(rng):
    H = crandn(rng, 3, 6)
    W = matched_filter_init(H, 2, 3, 0.7)
    for l in range(2):
        assert np.sum(np.abs(W[3 * l : 3 * l + 3]) ** 2) == pytest.approx(0.7)
