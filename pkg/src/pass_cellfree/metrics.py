"""Rates, MSEs and the WMMSE objective.

``H`` holds user channels as rows (``H[k] = h_k``) and ``W`` holds
beamformers as columns (``W[:, k] = w_k``), so ``(H.conj() @ W)[k, i]`` is
the effective gain ``h_k^H w_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BeamformingState:
    W: np.ndarray  # (L*N, K)
    u: np.ndarray  # (K,) complex equalizers
    q: np.ndarray  # (K,) positive MSE weights

    def copy(self) -> "BeamformingState":
        return BeamformingState(self.W.copy(), self.u.copy(), self.q.copy())


def gains(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    return H.conj() @ W


def sinrs(H: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    p = np.abs(gains(H, W)) ** 2
    signal = np.diag(p)
    interference = p.sum(axis=1) - signal
    return signal / (interference + sigma2)


def user_rates(H: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user rates in bit/s/Hz."""
    return np.log2(1.0 + sinrs(H, W, sigma2))


def sum_rate(H: np.ndarray, W: np.ndarray, sigma2: float) -> float:
    return float(user_rates(H, W, sigma2).sum())


def user_rate(h_k: np.ndarray, W: np.ndarray, sigma2: float, k: int) -> float:
    z = np.abs(np.conj(h_k) @ W) ** 2
    return float(np.log2(1.0 + z[k] / (z.sum() - z[k] + sigma2)))


def mse(h_k: np.ndarray, W: np.ndarray, u_k: complex, sigma2: float, k: int) -> float:
    """MSE of ``u_k^* y_k`` as an estimate of ``s_k``."""
    z = np.conj(h_k) @ W
    total = float(np.sum(np.abs(z) ** 2)) + sigma2
    return float(abs(u_k) ** 2 * total - 2.0 * np.real(np.conj(u_k) * z[k]) + 1.0)


def mses(H: np.ndarray, W: np.ndarray, u: np.ndarray, sigma2: float) -> np.ndarray:
    z = gains(H, W)
    total = np.sum(np.abs(z) ** 2, axis=1) + sigma2
    return np.abs(u) ** 2 * total - 2.0 * np.real(np.conj(u) * np.diag(z)) + 1.0


def wmmse_objective(q: np.ndarray, e: np.ndarray) -> float:
    """``sum_k log q_k - q_k e_k`` with the natural logarithm."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("MSE weights must be strictly positive")
    return float(np.sum(np.log(q) - q * np.asarray(e, dtype=float)))


def state_objective(H: np.ndarray, state: BeamformingState, sigma2: float) -> float:
    return wmmse_objective(state.q, mses(H, state.W, state.u, sigma2))
