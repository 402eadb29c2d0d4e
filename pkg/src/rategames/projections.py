"""Euclidean projections onto the feasible sets of the game players.

Player domains: the multiplier vector lives in a nonnegative l1-ball, model
parameters in an l2-ball, and auxiliary slack variables in coordinate boxes.
"""

from __future__ import annotations

import numpy as np


def project_nonneg_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Project onto {x >= 0, ||x||_1 <= radius} in the l2 sense.

    Clips to the nonnegative orthant first; if the result still exceeds the
    ball, applies the sort-based simplex threshold (Duchi et al. style).
    Problem sizes here are tiny, so O(n log n) is fine.
    """
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    x = np.maximum(np.asarray(v, dtype=float), 0.0)
    total = x.sum()
    if total <= radius:
        return x
    if radius == 0.0:
        return np.zeros_like(x)
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, x.size + 1)
    cond = u - (css - radius) / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = (css[rho] - radius) / (rho + 1)
    return np.maximum(x - tau, 0.0)


def project_l2_ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Rescale w onto the l2 ball of the given radius if it lies outside."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm <= radius:
        return w.copy()
    return w * (radius / norm)


def project_box(v: np.ndarray, lo, hi) -> np.ndarray:
    """Coordinate-wise clamp of v into [lo, hi]."""
    lo_arr = np.asarray(lo, dtype=float)
    hi_arr = np.asarray(hi, dtype=float)
    if np.any(lo_arr > hi_arr):
        raise ValueError("box lower bound exceeds upper bound")
    return np.clip(np.asarray(v, dtype=float), lo_arr, hi_arr)


def project_floored_l1_ball(v: np.ndarray, radius: float, floor: np.ndarray) -> np.ndarray:
    """Project onto {x >= floor, ||x||_1 <= radius} with floor >= 0.

    Shift by the floor, project the remainder onto the shrunken nonnegative
    ball, and shift back.  Requires sum(floor) <= radius.
    """
    floor = np.asarray(floor, dtype=float)
    slack = radius - floor.sum()
    if slack < 0:
        raise ValueError("floor mass exceeds the l1 radius")
    return floor + project_nonneg_l1_ball(np.asarray(v, dtype=float) - floor, slack)
