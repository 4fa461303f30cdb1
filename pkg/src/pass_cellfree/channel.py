"""Line-of-sight PASS channels.

All channel vectors are column vectors. Stacked vectors of length ``L*N``
are ordered BS-major: entry ``l*N + n`` belongs to waveguide ``n`` of BS ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Deployment, Scenario


def wireless_coeff(pa_pos, user_pos, kappa_c: float, eta: float) -> complex:
    """Free-space spherical-wave coefficient ``eta * exp(-j kappa_c d) / d``."""
    d = float(np.linalg.norm(np.asarray(pa_pos, float) - np.asarray(user_pos, float)))
    if d == 0.0:
        raise ZeroDivisionError("PA and user positions coincide")
    return eta * np.exp(-1j * kappa_c * d) / d


def inwaveguide_coeff(pa_pos, feed_pos, kappa_g: float, M: int) -> complex:
    """Guided propagation from the feed to a PA with equal power split ``1/sqrt(M)``."""
    d = float(np.linalg.norm(np.asarray(pa_pos, float) - np.asarray(feed_pos, float)))
    return np.exp(-1j * kappa_g * d) / np.sqrt(M)


def pa_user_channel(scenario: Scenario, l: int, n: int, x, scale: float = 1.0) -> np.ndarray:
    """Feed-to-user coefficient ``f * g`` for PAs at positions ``x`` on waveguide (l, n).

    Returns an array of shape ``x.shape + (K,)``. Vectorized over candidate
    positions; this is the inner kernel of the element-wise search.
    """
    x = np.asarray(x, dtype=float)
    feed = scenario.feed_pos[l, n]
    users = scenario.user_pos
    dx = x[..., None] - users[:, 0]
    dy = feed[1] - users[:, 1]
    dz = feed[2] - users[:, 2]
    d = np.sqrt(dx * dx + dy * dy + dz * dz)
    d_guide = np.abs(x - feed[0])[..., None]
    M = scenario.config.M
    phase = scenario.kappa_g * d_guide + scenario.kappa_c * d
    return (scale * scenario.eta / np.sqrt(M)) * np.exp(-1j * phase) / d


@dataclass
class ChannelSet:
    """Per-PA-index channel contributions ``h_pa[m, k, :]`` (length ``L*N``)."""

    h_pa: np.ndarray  # (M, K, L*N)
    L: int
    N: int

    @property
    def h(self) -> np.ndarray:
        """Composite channels, row ``k`` is ``h_k``; shape (K, L*N)."""
        return self.h_pa.sum(axis=0)

    def per_bs(self, l: int) -> np.ndarray:
        """Rows ``h_{l,k}`` for every user, shape (K, N)."""
        return self.h[:, l * self.N : (l + 1) * self.N]


def assemble_channels(scenario: Scenario, dep: Deployment) -> ChannelSet:
    cfg = scenario.config
    L, M, N, K = cfg.L, cfg.M, cfg.N, cfg.K
    h_pa = np.empty((M, K, L * N), dtype=complex)
    for l in range(L):
        for n in range(N):
            h_pa[:, :, l * N + n] = pa_user_channel(scenario, l, n, dep.x[l, :, n])
    return ChannelSet(h_pa=h_pa, L=L, N=N)


def ula_positions(scenario: Scenario) -> np.ndarray:
    """Antenna positions of the conventional MIMO baseline, shape (L, N, 3).

    Each BS carries an N-element half-wavelength ULA along x, centred on its
    anchor point.
    """
    cfg = scenario.config
    offsets = (np.arange(cfg.N) - (cfg.N - 1) / 2.0) * cfg.wavelength / 2.0
    pos = np.repeat(scenario.anchors[:, None, :], cfg.N, axis=1).astype(float)
    pos[:, :, 0] += offsets[None, :]
    return pos


def ula_channels(scenario: Scenario) -> ChannelSet:
    """Fixed-array channels: one antenna per RF chain, no guided phase, unit power factor."""
    cfg = scenario.config
    L, N, K = cfg.L, cfg.N, cfg.K
    pos = ula_positions(scenario).reshape(L * N, 3)
    diff = pos[None, :, :] - scenario.user_pos[:, None, :]
    d = np.linalg.norm(diff, axis=-1)
    h = scenario.eta * np.exp(-1j * scenario.kappa_c * d) / d
    return ChannelSet(h_pa=h[None, :, :], L=L, N=N)
