"""Shared domain types: library configuration, requests, predictions, and the
per-slot bookkeeping (cumulative request counts, prediction-error ledger) that
every policy builds on.

Requests and predictions are kept sparse; dense vectors only materialize where
a policy actually needs them (score construction, projections).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Tolerance used when classifying a coordinate as integral (0 or 1).
FRAC_TOL = 1e-9


class ContractViolation(Exception):
    """A policy was driven out of the decide-then-observe order."""


@dataclass(frozen=True)
class LibraryConfig:
    """A file library: N files, file sizes, and a cache of capacity C.

    Sizes default to all ones (equal-size mode), in which case the capacity
    must be an integer number of file slots.
    """

    n_files: int
    capacity: float
    sizes: np.ndarray | None = None

    def __post_init__(self):
        if self.n_files <= 0:
            raise ValueError("n_files must be positive")
        if not np.isfinite(self.capacity) or self.capacity <= 0:
            raise ValueError("capacity must be a positive real")
        if self.sizes is None:
            object.__setattr__(self, "sizes", np.ones(self.n_files))
        else:
            s = np.asarray(self.sizes, dtype=float)
            if s.shape != (self.n_files,):
                raise ValueError("sizes must have length n_files")
            if not np.all(np.isfinite(s)) or np.any(s <= 0):
                raise ValueError("sizes must be positive reals")
            if np.any(s > self.capacity):
                raise ValueError("every file must fit in the cache (s_i <= C)")
            object.__setattr__(self, "sizes", s)
        if self.is_equal_size and abs(self.capacity - round(self.capacity)) > 1e-12:
            raise ValueError("equal-size mode requires an integer capacity")

    @property
    def is_equal_size(self) -> bool:
        return bool(np.all(self.sizes == 1.0))

    @property
    def int_capacity(self) -> int:
        return int(round(self.capacity))


@dataclass(frozen=True)
class RequestEvent:
    """One slot's revealed demand: exactly one file (and its user location in
    the bipartite setting)."""

    slot: int
    file: int
    user: int | None = None


@dataclass(frozen=True)
class PredictionVector:
    """A (possibly probabilistic) forecast of the next request.

    Stored as a sparse set of overrides on top of a constant background mass,
    which covers one-hot forecasts, smoothed "density" forecasts, and fully
    dense draws alike.  A zero total mass encodes the null prediction used by
    the non-optimistic baselines.
    """

    n_items: int
    overrides: dict[int, float] = field(default_factory=dict)
    background: float = 0.0

    def __post_init__(self):
        if self.background < -FRAC_TOL:
            raise ValueError("prediction masses must be nonnegative")
        for i, p in self.overrides.items():
            if not 0 <= i < self.n_items:
                raise ValueError(f"prediction index {i} out of range")
            if p < -FRAC_TOL:
                raise ValueError("prediction masses must be nonnegative")
        total = self.total_mass()
        if not (abs(total) <= 1e-9 or abs(total - 1.0) <= 1e-9):
            raise ValueError(f"prediction mass must be 0 (null) or 1, got {total}")

    @classmethod
    def one_hot(cls, n_items: int, index: int) -> "PredictionVector":
        return cls(n_items, {index: 1.0})

    @classmethod
    def null(cls, n_items: int) -> "PredictionVector":
        return cls(n_items)

    @classmethod
    def with_background(cls, n_items: int, index: int, mass: float) -> "PredictionVector":
        """Mass on one item, the remainder spread uniformly over the rest."""
        if n_items < 2:
            return cls.one_hot(n_items, index)
        bg = (1.0 - mass) / (n_items - 1)
        return cls(n_items, {index: mass}, background=bg)

    @classmethod
    def from_dense(cls, probs: np.ndarray) -> "PredictionVector":
        probs = np.asarray(probs, dtype=float)
        return cls(probs.shape[0], {i: float(p) for i, p in enumerate(probs) if p != 0.0})

    def total_mass(self) -> float:
        n_bg = self.n_items - len(self.overrides)
        return self.background * n_bg + sum(self.overrides.values())

    @property
    def is_null(self) -> bool:
        return self.background == 0.0 and not self.overrides

    def add_to(self, dense: np.ndarray) -> None:
        """Accumulate this prediction into a dense score vector, in place."""
        if self.background != 0.0:
            dense += self.background
            for i, p in self.overrides.items():
                dense[i] += p - self.background
        else:
            for i, p in self.overrides.items():
                dense[i] += p

    def to_dense(self) -> np.ndarray:
        out = np.full(self.n_items, self.background)
        for i, p in self.overrides.items():
            out[i] = p
        return out

    def mass_at(self, index: int) -> float:
        return self.overrides.get(index, self.background)


class CumulativeGradient:
    """Running total of revealed requests (the aggregated gradient vector)."""

    __slots__ = ("counts",)

    def __init__(self, n_items: int):
        self.counts = np.zeros(n_items)

    def add(self, index: int) -> None:
        self.counts[index] += 1.0

    @property
    def total(self) -> float:
        return float(self.counts.sum())


class PredictionErrorLedger:
    """Accumulated squared prediction errors, in l2 and l1."""

    __slots__ = ("sum_l2_sq", "sum_l1_sq", "slots")

    def __init__(self):
        self.sum_l2_sq = 0.0
        self.sum_l1_sq = 0.0
        self.slots = 0

    def record(self, l2_sq: float, l1_sq: float) -> None:
        self.sum_l2_sq += l2_sq
        self.sum_l1_sq += l1_sq
        self.slots += 1


@dataclass(frozen=True)
class FractionalAllocation:
    """A point of the relaxed cache polytope: per-file mass in [0, 1]."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if np.any(m < -FRAC_TOL) or np.any(m > 1.0 + FRAC_TOL):
            raise ValueError("allocation mass outside [0, 1]")
        object.__setattr__(self, "mass", m)

    def check_capacity(self, sizes: np.ndarray, capacity: float, tol: float = 1e-9) -> None:
        used = float(self.mass @ sizes)
        if used > capacity + tol:
            raise ValueError(f"allocation uses {used} > capacity {capacity}")


@dataclass(frozen=True)
class IntegralCacheSet:
    """A committed discrete cache state: the set of stored file ids."""

    files: frozenset[int]

    @classmethod
    def of(cls, ids) -> "IntegralCacheSet":
        if isinstance(ids, np.ndarray):
            return cls(frozenset(ids.tolist()))
        return cls(frozenset(int(i) for i in ids))

    def __contains__(self, file: int) -> bool:
        return file in self.files

    def __len__(self) -> int:
        return len(self.files)

    def total_size(self, sizes: np.ndarray) -> float:
        return float(sum(sizes[i] for i in self.files))

    def indicator(self, n_items: int) -> np.ndarray:
        out = np.zeros(n_items)
        out[list(self.files)] = 1.0
        return out


def pair_index(file: int, user: int, n_users: int) -> int:
    """Flat index of a (file, user) pair in the bipartite request space."""
    return file * n_users + user


def error_increments(request: RequestEvent, prediction: PredictionVector,
                     n_users: int | None = None) -> tuple[float, float]:
    """Squared l2 and l1 distance between the one-hot request and a prediction.

    Computed exactly over the sparse union of supports; the background mass is
    folded in closed form.  `n_users` is only needed for bipartite requests,
    where the one-hot lives on (file, user) pairs.
    """
    if request.user is None:
        true_idx = request.file
    else:
        true_idx = pair_index(request.file, request.user, n_users)
    bg = prediction.background
    l2 = 0.0
    l1 = 0.0
    for i, p in prediction.overrides.items():
        d = abs(1.0 - p) if i == true_idx else p
        l2 += d * d
        l1 += d
    n_bg = prediction.n_items - len(prediction.overrides)
    if true_idx not in prediction.overrides:
        n_bg -= 1
        d = abs(1.0 - bg)
        l2 += d * d
        l1 += d
    l2 += n_bg * bg * bg
    l1 += n_bg * bg
    return l2, l1 * l1
