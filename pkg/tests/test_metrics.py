import numpy as np
import pytest

from conftest import crandn
from pass_cellfree.metrics import (
    BeamformingState,
    mse,
    mses,
    sinrs,
    state_objective,
    sum_rate,
    user_rate,
    user_rates,
    wmmse_objective,
)
from pass_cellfree.wmmse_driver import update_equalizers_weights


def test_rates_match_scalar_formula(rng):
    H, W = crandn(rng, 3, 4), crandn(rng, 4, 3)
    sigma2 = 0.3
    for k in range(3):
        assert user_rates(H, W, sigma2)[k] == pytest.approx(user_rate(H[k], W, sigma2, k), rel=1e-13)
        assert mses(H, W, np.full(3, 0.2 + 0.1j), sigma2)[k] == pytest.approx(mse(H[k], W, 0.2 + 0.1j, sigma2, k))
    assert sum_rate(H, W, sigma2) == pytest.approx(np.log2(1 + sinrs(H, W, sigma2)).sum())


def test_single_user_rate_is_log_snr(rng):
    h, w = crandn(rng, 1, 4), crandn(rng, 4, 1)
    snr = abs(h[0].conj() @ w[:, 0]) ** 2 / 0.5
    assert sum_rate(h, w, 0.5) == pytest.approx(np.log2(1 + snr))


def test_mmse_equalizer_gives_inverse_sinr_error(rng):
    H, W = crandn(rng, 2, 4), crandn(rng, 4, 2)
    st = update_equalizers_weights(H, BeamformingState(W, np.zeros(2, complex), np.ones(2)), 0.1)
    e = mses(H, W, st.u, 0.1)
    np.testing.assert_allclose(e, 1 / (1 + sinrs(H, W, 0.1)), rtol=1e-12)
    np.testing.assert_allclose(-np.log2(e), user_rates(H, W, 0.1), rtol=1e-12)


def test_mmse_equalizer_minimizes_mse(rng):
    H, W = crandn(rng, 2, 3), crandn(rng, 3, 2)
    st = update_equalizers_weights(H, BeamformingState(W, np.zeros(2, complex), np.ones(2)), 0.2)
    for _ in range(200):
        u = st.u + 0.05 * crandn(rng, 2)
        assert np.all(mses(H, W, u, 0.2) >= mses(H, W, st.u, 0.2) - 1e-14)


def test_objective_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        wmmse_objective(np.array([1.0, 0.0]), np.array([0.5, 0.5]))


def test_state_objective_at_optimum(rng):
    H, W = crandn(rng, 2, 4), crandn(rng, 4, 2)
    st = update_equalizers_weights(H, BeamformingState(W, np.zeros(2, complex), np.ones(2)), 1.0)
    assert state_objective(H, st, 1.0) == pytest.approx(np.log(2) * sum_rate(H, W, 1.0) - 2, abs=1e-12)
