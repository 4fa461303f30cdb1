"""Sequential per-BS digital beamforming with KKT closed forms.

With equalizers ``u`` and weights ``q`` fixed the weighted-MSE problem in
``W`` is the convex quadratic

    sum_k  w_k^H A w_k - 2 Re(a_k^H w_k),   tr(W_l^H W_l) <= P_l  for every BS l,

with ``A = sum_t q_t |u_t|^2 h_t h_t^H`` and ``a_k = q_k u_k h_k``. Each BS block
is solved exactly given the others (water-filling style multiplier search),
cycling over BSs until the objective settles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import HermitianEig, NumericalError, multiplier_search

log = logging.getLogger(__name__)


@dataclass
class QuadraticCoefficients:
    A: np.ndarray  # (L*N, L*N); block (i, j) is A_{i,j}
    a: np.ndarray  # (L*N, K); column k is a_k
    L: int
    N: int

    def rows(self, l: int) -> slice:
        return slice(l * self.N, (l + 1) * self.N)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.A[self.rows(i), self.rows(j)]


def build_coefficients(H: np.ndarray, u: np.ndarray, q: np.ndarray, L: int, N: int) -> QuadraticCoefficients:
    weight = q * np.abs(u) ** 2
    Ht = H.T  # columns are h_k
    A = (Ht * weight) @ Ht.conj().T
    A = 0.5 * (A + A.conj().T)
    a = Ht * (q * u)
    return QuadraticCoefficients(A=A, a=a, L=L, N=N)


def objective(coeffs: QuadraticCoefficients, W: np.ndarray) -> float:
    quad = np.real(np.sum(W.conj() * (coeffs.A @ W)))
    lin = np.real(np.sum(coeffs.a.conj() * W))
    return float(quad - 2.0 * lin)


def linear_term(coeffs: QuadraticCoefficients, W: np.ndarray, l: int) -> np.ndarray:
    """``c_{l,k} = a_{l,k} - sum_{i != l} A_{l,i} w_{i,k}`` for all k, shape (N, K)."""
    r = coeffs.rows(l)
    cross = coeffs.A[r, :] @ W - coeffs.block(l, l) @ W[r, :]
    return coeffs.a[r, :] - cross


def per_bs_update(coeffs, W, l, P_lin, eig=None):
    """Optimal beamformers of BS ``l`` with every other BS held fixed.

    Returns
    -------
    W_l : ndarray, shape (N, K)
    lam : float
        Power multiplier; zero when the budget is inactive.
    """
    eig = eig or HermitianEig(coeffs.block(l, l))
    c = linear_term(coeffs, W, l)
    coords = eig.coords(c)
    coords_sq = np.sum(np.abs(coords) ** 2, axis=1)
    keep = eig.range_mask()
    # zero multiplier: pseudo-inverse, ignoring directions A_ll cannot reach
    range_sq = np.where(keep, coords_sq, 0.0)
    if eig.power(range_sq, 0.0) <= P_lin:
        inv = np.zeros_like(eig.s)
        inv[keep] = 1.0 / eig.s[keep]
        return eig.V @ (coords * inv[:, None]), 0.0

    # the full power curve lies above the range-only one, so a root exists;
    # only a rounding tie at the budget can violate that
    if not eig.power(coords_sq, 0.0) > P_lin:
        return eig.pinv(c), 0.0
    upper = np.sqrt(coords_sq.sum() / P_lin)
    lam = multiplier_search(lambda x: eig.power(coords_sq, x), P_lin, upper=upper)
    W_l = eig.V @ (coords / (eig.s + lam)[:, None])
    if not np.all(np.isfinite(W_l)):
        raise NumericalError(f"non-finite beamformer at BS {l}")
    return W_l, lam


@dataclass
class DigitalResult:
    W: np.ndarray
    objective: float
    multipliers: np.ndarray
    sweeps: int
    converged: bool
    history: list = field(default_factory=list)


def sequential_digital_bf(
    coeffs: QuadraticCoefficients,
    W0: np.ndarray,
    P_lin,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    kkt_tol: Optional[float] = 1e-8,
) -> DigitalResult:
    """Cycle BS-wise exact updates until the objective settles.

    A sweep ends the loop when the fractional objective decrease is at most
    ``tol`` and, unless ``kkt_tol`` is None, every BS block also satisfies
    the KKT stationarity and slackness conditions to ``kkt_tol`` (relative).
    The decrease test alone cannot certify tight stationarity: the decrease
    is quadratic in the step, so it hits round-off first.
    """
    L = coeffs.L
    budgets = np.broadcast_to(np.asarray(P_lin, dtype=float), (L,))
    eigs = [HermitianEig(coeffs.block(l, l)) for l in range(L)]
    W = np.array(W0, dtype=complex, copy=True)
    lams = np.zeros(L)
    prev = objective(coeffs, W)
    history = [prev]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for l in range(L):
            try:
                W_l, lams[l] = per_bs_update(coeffs, W, l, budgets[l], eigs[l])
            except NumericalError as exc:
                raise NumericalError(f"BS {l}: {exc}") from exc
            W[coeffs.rows(l), :] = W_l
        cur = objective(coeffs, W)
        history.append(cur)
        if not np.isfinite(cur):
            raise NumericalError("digital beamforming objective is not finite")
        if prev - cur <= tol * abs(prev) or prev == 0.0:
            if kkt_tol is None or _kkt_ok(coeffs, W, lams, budgets, kkt_tol):
                converged = True
                break
        prev = cur
    if not converged:
        log.warning("digital beamforming hit max_sweeps=%d", max_sweeps)
    return DigitalResult(W, history[-1], lams, sweeps, converged, history)


ROUNDOFF_FLOOR = 1e-12


def _kkt_ok(coeffs, W, lams, budgets, kkt_tol) -> bool:
    """Every block meets ``kkt_tol`` or is at working precision.

    With an ill-conditioned ``A_ll`` the residual relative to ``||c||`` has a
    round-off floor above ``kkt_tol``; a block whose normwise backward error
    ``||r|| / (||A_ll + lam I|| ||w|| + ||c||)`` is at round-off level cannot
    be improved and counts as converged.
    """
    for l, (stat, slack) in enumerate(kkt_residuals(coeffs, W, lams, budgets)):
        if slack > kkt_tol:
            return False
        if stat <= kkt_tol:
            continue
        r = coeffs.rows(l)
        A = coeffs.block(l, l)
        c = linear_term(coeffs, W, l)
        resid = np.linalg.norm(A @ W[r, :] + lams[l] * W[r, :] - c)
        denom = (np.linalg.norm(A, 2) + lams[l]) * np.linalg.norm(W[r, :]) + np.linalg.norm(c)
        if resid > ROUNDOFF_FLOOR * max(denom, np.finfo(float).tiny):
            return False
    return True


def matched_filter_init(H: np.ndarray, L: int, N: int, P_lin: float) -> np.ndarray:
    """Per-BS matched filters ``w_{l,k} ∝ h_{l,k}`` at full power."""
    W = H.T.astype(complex).copy()
    for l in range(L):
        r = slice(l * N, (l + 1) * N)
        norm = np.linalg.norm(W[r, :])
        if norm > 0:
            W[r, :] *= np.sqrt(P_lin) / norm
    return W


def kkt_residuals(coeffs, W, multipliers, P_lin):
    """Relative stationarity and complementary-slackness residuals per BS."""
    out = []
    budgets = np.broadcast_to(np.asarray(P_lin, dtype=float), (coeffs.L,))
    for l in range(coeffs.L):
        r = coeffs.rows(l)
        c = linear_term(coeffs, W, l)
        lhs = coeffs.block(l, l) @ W[r, :] + multipliers[l] * W[r, :]
        stat = np.linalg.norm(lhs - c) / max(np.linalg.norm(c), np.finfo(float).tiny)
        power = float(np.sum(np.abs(W[r, :]) ** 2))
        slack = abs(multipliers[l] * (power - budgets[l])) / budgets[l]
        out.append((float(stat), float(slack)))
    return out
