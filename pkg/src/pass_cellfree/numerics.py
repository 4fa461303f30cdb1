"""Hermitian solves, pseudo-inverses and the power-multiplier root search."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

PINV_RTOL = 1e-12


class NumericalError(ArithmeticError):
    """A numerical kernel hit a state its preconditions exclude."""


class SingularSystemError(NumericalError):
    """``A + shift*I`` is numerically singular; use :func:`pinv_apply` instead."""


def as_hermitian(A, tol: float = 1e-12) -> np.ndarray:
    """Return ``(A + A^H) / 2`` after checking ``A`` is Hermitian to ``tol`` (relative)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > tol * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not Hermitian")
    return 0.5 * (A + A.conj().T)


class HermitianEig:
    """Eigendecomposition of a Hermitian PSD matrix, reused across many shifts.

    Negative eigenvalues from round-off are clipped to zero.
    """

    def __init__(self, A):
        A = as_hermitian(A)
        s, V = np.linalg.eigh(A)
        self.s = np.clip(s, 0.0, None)
        self.V = V
        self.smax = float(self.s.max(initial=0.0))

    def coords(self, rhs: np.ndarray) -> np.ndarray:
        return self.V.conj().T @ rhs

    def range_mask(self, rel_tol: float = PINV_RTOL) -> np.ndarray:
        return self.s > rel_tol * self.smax if self.smax > 0 else np.zeros_like(self.s, bool)

    def solve(self, rhs: np.ndarray, shift: float) -> np.ndarray:
        d = self.s + shift
        if shift <= 0 and not np.all(d > PINV_RTOL * max(self.smax, np.finfo(float).tiny)):
            raise SingularSystemError("matrix is singular at zero shift")
        c = self.coords(rhs)
        return self.V @ (c / (d[:, None] if c.ndim == 2 else d))

    def pinv(self, rhs: np.ndarray, rel_tol: float = PINV_RTOL) -> np.ndarray:
        keep = self.range_mask(rel_tol)
        inv = np.zeros_like(self.s)
        inv[keep] = 1.0 / self.s[keep]
        c = self.coords(rhs)
        return self.V @ (c * (inv[:, None] if c.ndim == 2 else inv))

    def power(self, coords_sq: np.ndarray, shift: float) -> float:
        """``||(A + shift I)^{-1} rhs||^2`` given ``|V^H rhs|^2`` summed over columns."""
        d = self.s + shift
        live = coords_sq > 0
        with np.errstate(divide="ignore"):
            return float(np.sum(coords_sq[live] / d[live] ** 2))


def psd_solve(A, shift: float, rhs) -> np.ndarray:
    """Solve ``(A + shift*I) x = rhs`` for Hermitian PSD ``A``."""
    if shift < 0:
        raise ValueError("shift must be non-negative")
    return HermitianEig(A).solve(np.asarray(rhs, dtype=complex), shift)


def pinv_apply(A, rhs, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of Hermitian PSD ``A`` applied to ``rhs``."""
    return HermitianEig(A).pinv(np.asarray(rhs, dtype=complex), rel_tol)


def multiplier_search(
    power_of: Callable[[float], float],
    target: float,
    rtol: float = 1e-12,
    max_iter: int = 200,
    upper: Optional[float] = None,
) -> float:
    """Find ``lam > 0`` with ``power_of(lam) == target`` for a decreasing ``power_of``.

    The upper bracket is grown geometrically (from ``upper`` if given), then
    bisected. The returned multiplier always lies on the feasible side,
    ``power_of(lam) <= target``.
    """
    p_lo = power_of(0.0)
    if not p_lo > target:
        raise NumericalError("power at zero multiplier already meets the budget")

    lo = 0.0
    hi = upper if upper is not None and upper > 0 else 1.0
    p_hi = power_of(hi)
    for _ in range(2000):
        if p_hi <= target:
            break
        if p_hi > p_lo * (1 + 1e-12):
            raise NumericalError("power_of is not decreasing in the multiplier")
        lo, p_lo = hi, p_hi
        hi *= 2.0
        p_hi = power_of(hi)
    else:
        raise NumericalError("could not bracket the power multiplier")

    for _ in range(max_iter):
        if abs(p_hi - target) <= rtol * target:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        p = power_of(mid)
        if p > p_lo * (1 + 1e-12) or p < p_hi * (1 - 1e-12):
            raise NumericalError("power_of is not decreasing in the multiplier")
        if p > target:
            lo, p_lo = mid, p
        else:
            hi, p_hi = mid, p
    return hi
