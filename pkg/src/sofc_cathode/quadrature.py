"""Cubic-spline interpolation of nodal integrands and exact integration of the pieces.

Piece ``i`` on ``[x_i, x_{i+1}]`` is ``a + b t + c t**2 + d t**3`` with
``t = x - x_i``. Integrals are evaluated from these coefficients in closed
form, so any cubic sampled on the knots is integrated to round-off when the
end conditions reproduce it (not-a-knot always does, natural does for
polynomials of degree <= 1 and for cubics whose second derivative vanishes
at both ends).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NATURAL = "natural"
NOT_A_KNOT = "not-a-knot"
BOUNDARY_CONDITIONS = (NATURAL, NOT_A_KNOT)


@dataclass(frozen=True)
class SplineCurve:
    knots: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        """(N-1, 4) array of per-interval coefficients in increasing power."""
        return np.column_stack([self.a, self.b, self.c, self.d])

    def _locate(self, x):
        idx = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(idx, 0, len(self.knots) - 2)

    def __call__(self, x, nu=0):
        x = np.asarray(x, dtype=float)
        i = self._locate(x)
        t = x - self.knots[i]
        a, b, c, d = self.a[i], self.b[i], self.c[i], self.d[i]
        if nu == 0:
            out = a + t * (b + t * (c + t * d))
        elif nu == 1:
            out = b + t * (2.0 * c + 3.0 * t * d)
        elif nu == 2:
            out = 2.0 * c + 6.0 * t * d
        else:
            raise ValueError("only derivatives up to order 2 are supported")
        return float(out) if out.ndim == 0 else out

    def piece_integrals(self) -> np.ndarray:
        h = np.diff(self.knots)
        return h * (self.a + h * (self.b / 2.0 + h * (self.c / 3.0 + h * self.d / 4.0)))


def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm. ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = len(diag)
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _second_derivatives(x, y, bc):
    h = np.diff(x)
    slopes = np.diff(y) / h
    lower = h[:-1].copy()
    diag = 2.0 * (h[:-1] + h[1:])
    upper = h[1:].copy()
    rhs = 6.0 * np.diff(slopes)

    if bc == NATURAL:
        M_inner = solve_tridiagonal(lower, diag, upper, rhs)
        return np.concatenate([[0.0], M_inner, [0.0]])

    # not-a-knot: third derivative continuous across x_1 and x_{n-2}, i.e.
    # M_0 = (1 + r0) M_1 - r0 M_2 and M_{n-1} = (1 + r1) M_{n-2} - r1 M_{n-3}.
    r0 = h[0] / h[1]
    r1 = h[-1] / h[-2]
    diag = diag.copy()
    diag[0] += h[0] * (1.0 + r0)
    upper[0] -= h[0] * r0
    diag[-1] += h[-1] * (1.0 + r1)
    lower[-1] -= h[-1] * r1
    M_inner = solve_tridiagonal(lower, diag, upper, rhs)
    M0 = (1.0 + r0) * M_inner[0] - r0 * M_inner[1]
    Mn = (1.0 + r1) * M_inner[-1] - r1 * M_inner[-2]
    return np.concatenate([[M0], M_inner, [Mn]])


def build_spline(knots, values, bc=NATURAL) -> SplineCurve:
    """Interpolating cubic spline through ``(knots, values)``.

    ``bc`` is ``"natural"`` (zero second derivative at both ends) or
    ``"not-a-knot"``.
    """
    x = np.asarray(knots, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or y.shape != x.shape:
        raise ValueError(f"knots and values must be 1-D of equal length, got {x.shape} and {y.shape}")
    if len(x) < 4:
        raise ValueError("a cubic spline needs at least 4 knots")
    if not np.all(np.diff(x) > 0.0):
        raise ValueError("knots must be strictly increasing")
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown spline end condition {bc!r}")

    M = _second_derivatives(x, y, bc)
    h = np.diff(x)
    a = y[:-1].copy()
    b = np.diff(y) / h - h * (2.0 * M[:-1] + M[1:]) / 6.0
    c = M[:-1] / 2.0
    d = np.diff(M) / (6.0 * h)
    return SplineCurve(x, a, b, c, d)


def cumulative_integral(spline: SplineCurve) -> np.ndarray:
    """I[i] = integral of the spline from knots[0] to knots[i]; I[0] = 0."""
    return np.concatenate([[0.0], np.cumsum(spline.piece_integrals())])


def tail_integrals(spline: SplineCurve) -> np.ndarray:
    """Q[i] = integral from knots[i] to knots[-1]; Q[-1] = 0."""
    pieces = spline.piece_integrals()
    return np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])


def definite_integral(spline: SplineCurve) -> float:
    return float(np.sum(spline.piece_integrals()))
