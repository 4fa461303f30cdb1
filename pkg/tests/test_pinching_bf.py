import numpy as np
import pytest
from oracles import crandn, q_stationarity, single_pa_channel, stacked_q_oracle

from conftest import random_psd
from pass_cellfree.channel import assemble_channels
from pass_cellfree.pinching_bf import (
    PinchingOptions,
    RateQuadratic,
    WindowGrid,
    channel_scale,
    element_search,
    penalty_objective,
    penalty_pinching_bf,
    phase_resolving_points,
    q_update,
    rate_objective,
    rate_quadratic,
    violation,
)
from pass_cellfree.metrics import mses
from pass_cellfree.scenario import SystemConfig, build_scenario, feasible_interval, initial_deployment


def random_rq(rng, K=2, D=4):
    B = np.stack([random_psd(rng, D, rank=2) for _ in range(K)])
    return RateQuadratic(B=B, b=crandn(rng, K, D))


def test_rate_quadratic_tracks_weighted_mse(rng):
    """``f(H)`` equals ``sum_k q_k e_k`` up to a constant independent of ``H``."""
    W, u, q = crandn(rng, 4, 2), crandn(rng, 2), np.array([0.8, 1.7])
    rq = rate_quadratic(W, u, q)
    H1, H2 = crandn(rng, 2, 4), crandn(rng, 2, 4)
    d_mse = np.sum(q * mses(H1, W, u, 0.3)) - np.sum(q * mses(H2, W, u, 0.3))
    assert rate_objective(rq, H1) - rate_objective(rq, H2) == pytest.approx(d_mse, rel=1e-10)


def test_scaling_preserves_objective(rng):
    rq = random_rq(rng)
    H = crandn(rng, 2, 4)
    assert rate_objective(rq.scaled(7.0), 7.0 * H) == pytest.approx(rate_objective(rq, H), rel=1e-12)
    assert channel_scale(rq.scaled(channel_scale(rq))) == pytest.approx(1.0)


def test_q_update_matches_stacked_system(rng):
    for _ in range(10):
        rq = random_rq(rng)
        h_pa = crandn(rng, 2, 2, 4)
        rho = float(rng.uniform(0.05, 20))
        Q = q_update(rq, h_pa, rho)
        np.testing.assert_allclose(Q, stacked_q_oracle(rq.B, rq.b, h_pa, rho), rtol=1e-9, atol=1e-12)
        scale = max(np.abs(rq.b).max(), np.abs(h_pa).max() / rho)
        assert np.abs(q_stationarity(rq.B, rq.b, h_pa, Q, rho)).max() <= 1e-8 * scale


def test_q_update_limits(rng):
    h_pa = crandn(rng, 3, 2, 4)
    b = crandn(rng, 2, 4)
    zero = RateQuadratic(B=np.zeros((2, 4, 4)), b=b)
    np.testing.assert_allclose(q_update(zero, h_pa, 2.0), h_pa + 2.0 * b[None], rtol=1e-13)
    Q = q_update(random_rq(rng), h_pa, 1e-9)
    np.testing.assert_allclose(Q, h_pa, atol=1e-7)
    with pytest.raises(ValueError):
        q_update(zero, h_pa, 0.0)


def test_q_update_minimizes_penalty(rng):
    rq = random_rq(rng)
    h_pa = crandn(rng, 2, 2, 4)
    Q = q_update(rq, h_pa, 0.5)
    g = penalty_objective(rq, h_pa, Q, 0.5)
    for _ in range(200):
        assert penalty_objective(rq, h_pa, Q + 1e-3 * crandn(rng, *Q.shape), 0.5) >= g
    assert violation(h_pa, h_pa) == 0.0


@pytest.fixture
def single_pa():
    sc = build_scenario(SystemConfig(L=1, N=3, M=1, K=3, rng_seed=11))
    return sc, initial_deployment(sc)


def oracle_channel(sc, x):
    return single_pa_channel(x, sc.feed_pos[0, 0], sc.user_pos, sc.kappa_c, sc.kappa_g, sc.eta, sc.config.M)


def test_element_search_recovers_planted_grid_point(single_pa):
    sc, dep = single_pa
    grid = WindowGrid(sc, 2000, phase_samples=0)
    gx, _, _ = grid.get(0, 0)
    x_true = gx[1234]
    target = oracle_channel(sc, [x_true])[0] * 1e4
    x, J = element_search(sc, dep, target, 0, 0, 0, scale=1e4, grid=grid, phase_samples=0)
    assert x == pytest.approx(x_true, abs=1e-12)
    assert J == pytest.approx(0.0, abs=1e-20)


def test_element_search_never_worse_than_incumbent(single_pa, rng):
    sc, dep = single_pa
    for _ in range(10):
        x0 = float(dep.x[0, 0, 0])
        target = crandn(rng, 3)
        j0 = np.sum(np.abs(1e4 * oracle_channel(sc, [x0])[0] - target) ** 2)
        _, J = element_search(sc, dep, target, 0, 0, 0, scale=1e4)
        assert J <= j0 + 1e-12
        assert dep.is_feasible()


def test_element_search_respects_neighbours():
    sc = build_scenario(SystemConfig(L=2, N=2, M=3, K=2, rng_seed=3))
    dep = initial_deployment(sc)
    target = np.ones(2, complex)
    for m in range(3):
        lo, hi = feasible_interval(dep, 1, m, 0)
        x, _ = element_search(sc, dep, target, 1, m, 0, scale=1e4)
        assert lo <= x <= hi
    assert dep.is_feasible()


def test_element_search_sockets_only(single_pa, rng):
    sc, dep = single_pa
    from pass_cellfree.scenario import snap_to_sockets, socket_positions

    dep = snap_to_sockets(dep, 27)
    x, _ = element_search(sc, dep, crandn(rng, 3), 0, 0, 0, sockets=27, scale=1e4)
    assert np.min(np.abs(socket_positions(sc.windows[0], 27) - x)) < 1e-12


def test_phase_resolving_grid_size():
    sc = build_scenario(SystemConfig())
    assert phase_resolving_points(sc, 2000, 0) == 2000
    n = phase_resolving_points(sc, 2000, 8)
    period = 2 * np.pi / (sc.kappa_g + sc.kappa_c)
    assert sc.config.L_hat / (n - 1) <= period / 8


def test_penalty_loop_monotone_and_feasible():
    sc = build_scenario(SystemConfig(L=2, N=2, M=2, K=2, rng_seed=5))
    dep = initial_deployment(sc)
    H = assemble_channels(sc, dep).h
    W = H.T.conj().copy() * 1e3
    u = np.full(2, 0.5 + 0.1j)
    q = np.array([2.0, 1.0])
    res = penalty_pinching_bf(sc, dep, rate_quadratic(W, u, q), PinchingOptions())
    assert res.deployment.is_feasible()
    for rd in res.rounds:
        g = np.array(rd.g)
        assert np.all(np.diff(g) <= 1e-10 * np.abs(g[:-1]))
    if res.converged:
        assert res.rounds[-1].violation <= 1e-6
    rhos = [rd.rho for rd in res.rounds]
    np.testing.assert_allclose(np.array(rhos[1:]) / np.array(rhos[:-1]), 0.3)
