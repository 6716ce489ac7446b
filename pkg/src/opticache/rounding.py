"""Randomized discretization subroutines: Madow systematic sampling, the
Dantzig fractional-Knapsack relaxation, half-probability rounding of
almost-integral vectors, and weighted dependent rounding.

All randomness flows through an injected numpy Generator so every experiment
is replayable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FRAC_TOL, IntegralCacheSet


def _is_fractional(v: float) -> bool:
    return FRAC_TOL < v < 1.0 - FRAC_TOL


@dataclass(frozen=True)
class AlmostIntegralVector:
    """A [0,1]^N vector with at most one strictly fractional coordinate."""

    mass: np.ndarray
    fractional_index: int | None = None

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if np.any(m < -FRAC_TOL) or np.any(m > 1.0 + FRAC_TOL):
            raise ValueError("coordinates must lie in [0, 1]")
        frac = np.flatnonzero((m > FRAC_TOL) & (m < 1.0 - FRAC_TOL))
        if frac.size > 1:
            raise ValueError(f"more than one fractional coordinate: {frac.tolist()}")
        expected = int(frac[0]) if frac.size else None
        if expected != self.fractional_index:
            object.__setattr__(self, "fractional_index", expected)
        object.__setattr__(self, "mass", m)

    def ones(self) -> np.ndarray:
        return np.flatnonzero(self.mass >= 1.0 - FRAC_TOL)


def madow_sample(mass: np.ndarray, capacity: int, rng) -> IntegralCacheSet:
    """Systematic sampling of at most `capacity` files with inclusion
    probabilities equal to `mass`.

    A single uniform U seeds the C lattice points U, U+1, ..., U+C-1; item j
    is picked by the lattice point falling in its cumulative-mass interval.
    Exactly C items come back whenever the masses sum to C.
    """
    mass = np.asarray(mass, dtype=float)
    lo, hi = mass.min(), mass.max()
    if lo < -FRAC_TOL or hi > 1.0 + FRAC_TOL:
        raise ValueError("inclusion probabilities must lie in [0, 1]")
    total = mass.sum()
    if total > capacity + 1e-9:
        raise ValueError(f"total mass {total} exceeds capacity {capacity}")
    if lo < 0.0 or hi > 1.0:
        mass = np.clip(mass, 0.0, 1.0)
    cum = np.cumsum(mass)
    targets = rng.random() + np.arange(capacity)
    picks = np.searchsorted(cum, targets, side="right")
    return IntegralCacheSet(frozenset(picks[picks < mass.shape[0]].tolist()))


def dantzig_relax(capacity: float, profits: np.ndarray, sizes: np.ndarray
                  ) -> tuple[AlmostIntegralVector, int | None]:
    """Fractional Knapsack by decreasing profit-to-size ratio.

    Returns the almost-integral optimum (ones on the best-ratio prefix, one
    fractional item filling the leftover space) and the original index of the
    critical item, or None when everything fits.  Ratio ties break toward the
    lower file index.
    """
    p = np.asarray(profits, dtype=float)
    s = np.asarray(sizes, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("profits must be finite")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("sizes must be positive")
    n = p.shape[0]
    order = np.lexsort((np.arange(n), -p / s))
    filled = np.cumsum(s[order])
    over = np.flatnonzero(filled > capacity)
    y = np.zeros(n)
    if over.size == 0:
        y[:] = 1.0
        return AlmostIntegralVector(y), None
    pos = int(over[0])
    critical = int(order[pos])
    y[order[:pos]] = 1.0
    leftover = capacity - (filled[pos - 1] if pos > 0 else 0.0)
    y[critical] = leftover / s[critical]
    return AlmostIntegralVector(y), critical


def rand_half(v: AlmostIntegralVector, rng) -> IntegralCacheSet:
    """Round an almost-integral vector: the ones-set or the fractional
    singleton, each with probability 1/2.

    A fully integral input returns its ones-set surely, so every coordinate
    keeps expectation at least half its fractional mass.
    """
    if v.fractional_index is None or rng.random() < 0.5:
        return IntegralCacheSet.of(v.ones())
    return IntegralCacheSet.of([v.fractional_index])


def depround(a: np.ndarray, sizes: np.ndarray, rng) -> AlmostIntegralVector:
    """Weighted dependent rounding.

    Repeatedly resolves the two leftmost fractional coordinates with a
    two-outcome move that snaps at least one of them to {0, 1}, preserves the
    size-weighted sum exactly, and keeps every marginal unbiased.
    """
    out = np.array(a, dtype=float)
    s = np.asarray(sizes, dtype=float)
    if np.any(out < -FRAC_TOL) or np.any(out > 1.0 + FRAC_TOL):
        raise ValueError("coordinates must lie in [0, 1]")
    if np.any(s <= 0):
        raise ValueError("sizes must be positive")

    # only the active pair ever changes, so one ascending sweep suffices
    frac_idxs = np.flatnonzero((out > FRAC_TOL) & (out < 1.0 - FRAC_TOL))
    hold = -1
    for j in frac_idxs:
        if hold < 0:
            hold = j
            continue
        i = hold
        ai, aj = out[i], out[j]
        ratio = s[j] / s[i]
        up = min(1.0 - ai, ratio * aj)          # raise a_i, lower a_j
        down = min(ai, ratio * (1.0 - aj))      # lower a_i, raise a_j
        if rng.random() < down / (up + down):
            if 1.0 - ai <= ratio * aj:
                out[i] = 1.0
                out[j] = aj - (1.0 - ai) / ratio
            else:
                out[i] = ai + ratio * aj
                out[j] = 0.0
        else:
            if ai <= ratio * (1.0 - aj):
                out[i] = 0.0
                out[j] = aj + ai / ratio
            else:
                out[i] = ai - ratio * (1.0 - aj)
                out[j] = 1.0
        if _is_fractional(out[i]):
            hold = i
        elif _is_fractional(out[j]):
            hold = j
        else:
            hold = -1
    np.clip(out, 0.0, 1.0, out=out)
    return AlmostIntegralVector(out)
