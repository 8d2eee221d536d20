"""Shared builders for the test suite: reference maps, random instances,
and the one-entry bisection tuner used to manufacture singular cases."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from lenschain.pwamap import PwaMap


def pentagon_map() -> PwaMap:
    """Three-dimensional map with exact fraction entries sitting at a
    non-terminating shrinking point of the 2/5 word."""
    a_l = np.array([
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [float(Fraction(28, 87)), 0.0, 0.0],
    ])
    a_r = np.array([
        [float(Fraction(-23, 14)), 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [float(Fraction(3, 2)), 0.0, 0.0],
    ])
    return PwaMap(a_l, a_r, np.array([1.0, 0.0, 0.0]))


PENTAGON_TEXT = """\
N = 3
A_L = 0, 1, 0, 1, 0, 1, 28/87, 0, 0
A_R = -23/14, 1, 0, 0, 0, 1, 3/2, 0, 0
b = 1, 0, 0
mu = 1
"""


def terminating_map(m: int, n: int) -> tuple[PwaMap, float]:
    """2D map whose left branch is a pure rotation by 2*pi*m/n; with
    mu = -1 the left fixed point is admissible, so the map sits at a
    terminating shrinking point for the rotation number m/n."""
    theta = 2.0 * np.pi * m / n
    c, s = np.cos(theta), np.sin(theta)
    a_l = np.array([[c, -s], [s, c]])
    a_r = np.array([[0.5, -s], [0.2, c]])
    return PwaMap(a_l, a_r, np.array([1.0, 0.0])), -1.0


def random_map(rng: np.random.Generator, n_dim: int, scale: float = 0.7) -> PwaMap:
    """Random continuous pair: shared columns except the first."""
    shared = rng.normal(size=(n_dim, n_dim)) * scale
    a_l = shared.copy()
    a_r = shared.copy()
    a_l[:, 0] = rng.normal(size=n_dim) * scale
    a_r[:, 0] = rng.normal(size=n_dim) * scale
    b = rng.normal(size=n_dim)
    return PwaMap(a_l, a_r, b)


def random_word(rng: np.random.Generator, n: int) -> str:
    return "".join(rng.choice(["L", "R"], size=n))


def with_entry(base: PwaMap, row: int, value: float) -> PwaMap:
    """Copy of the map with A_R[row, 0] replaced (first column is free)."""
    a_r = base.A_R.copy()
    a_r[row, 0] = value
    return PwaMap(base.A_L, a_r, base.b)


def tune_entry(base: PwaMap, row: int, quantity, lo: float = -4.0,
               hi: float = 4.0, samples: int = 161):
    """Bisect A_R[row, 0] to a zero of quantity(map).

    Returns (tuned_map, residual) or (None, None) when no sign change is
    bracketed.  The bisection itself is the test oracle: the residual
    certifies how exactly the target quantity was driven to zero.
    """
    grid = np.linspace(lo, hi, samples)
    values = [quantity(with_entry(base, row, v)) for v in grid]
    for k in range(samples - 1):
        va, vb = values[k], values[k + 1]
        if not (np.isfinite(va) and np.isfinite(vb)):
            continue
        if np.sign(va) == np.sign(vb) or va == 0.0:
            continue
        a, b = grid[k], grid[k + 1]
        fa = va
        for _ in range(100):
            mid = 0.5 * (a + b)
            fm = quantity(with_entry(base, row, mid))
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        tuned = with_entry(base, row, 0.5 * (a + b))
        return tuned, abs(quantity(tuned))
    return None, None
