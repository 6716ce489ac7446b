"""Offline best-in-hindsight benchmarks and (alpha-)regret accounting.

The static benchmark is computed once from the full-horizon request counts:
top-C most-requested files (equal sizes), an exact 0/1-Knapsack DP (integer
sizes), or exhaustive enumeration of cache assignments (bipartite).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from math import comb

import numpy as np

from .core import IntegralCacheSet
from .policies import bipartite_served, top_c_files
from .projections import BipartitePolytopeSpec


class InstanceTooLarge(Exception):
    """Exhaustive benchmark refused: the configuration space is too big."""


def _as_counts(counts) -> np.ndarray:
    return np.asarray(getattr(counts, "counts", counts), dtype=float)


def best_in_hindsight_topc(counts, capacity: int) -> IntegralCacheSet:
    """The capacity most-requested files, ties broken by file index."""
    return IntegralCacheSet.of(top_c_files(_as_counts(counts), capacity))


def knapsack_dp_opt(counts, sizes, capacity: int) -> tuple[float, IntegralCacheSet]:
    """Exact 0/1 Knapsack over integer sizes by dynamic programming.

    Value ties break toward the lexicographically smallest index set (compare
    as sorted tuples, shorter prefix first).
    """
    values = _as_counts(counts)
    s = np.asarray(sizes, dtype=float)
    if np.any(np.abs(s - np.round(s)) > 1e-9) or np.any(s <= 0):
        raise ValueError("knapsack DP requires positive integer sizes")
    s = np.round(s).astype(int)
    cap = int(capacity)
    n = values.shape[0]
    # best[i, c] = optimal value over items i.. with capacity c
    best = np.zeros((n + 1, cap + 1))
    for i in range(n - 1, -1, -1):
        best[i] = best[i + 1]
        si = s[i]
        if si <= cap:
            np.maximum(best[i, si:], best[i + 1, :cap + 1 - si] + values[i],
                       out=best[i, si:])
    total = best[0, cap]
    chosen = []
    cap_left = cap
    acc = 0.0
    for i in range(n):
        if abs(acc - total) <= 1e-9:
            break
        if s[i] <= cap_left and abs(acc + values[i] + best[i + 1, cap_left - s[i]] - total) <= 1e-9:
            chosen.append(i)
            acc += values[i]
            cap_left -= s[i]
    return float(total), IntegralCacheSet.of(chosen)


def bipartite_exhaustive_opt(counts2d, spec: BipartitePolytopeSpec,
                             budget: int = 10 ** 6
                             ) -> tuple[float, tuple[IntegralCacheSet, ...]]:
    """Exact bipartite benchmark by enumerating every per-cache content
    choice.  Deterministic: ties keep the first assignment in enumeration
    order."""
    counts2d = np.asarray(counts2d, dtype=float)
    n = spec.n_files
    caps = [min(int(round(c)), n) for c in spec.capacities]
    size = 1
    for c in caps:
        size *= comb(n, c)
        if size > budget:
            raise InstanceTooLarge(f"{size} cache configurations exceed budget {budget}")
    conn = [spec.connected_caches(i) for i in range(spec.n_users)]
    best_val = -1.0
    best_sets = None
    for assignment in product(*[combinations(range(n), c) for c in caps]):
        held = np.zeros((n, spec.n_caches), dtype=bool)
        for j, files in enumerate(assignment):
            held[list(files), j] = True
        value = 0.0
        for i in range(spec.n_users):
            served = held[:, conn[i]].any(axis=1)
            value += counts2d[served, i].sum()
        if value > best_val:
            best_val = value
            best_sets = assignment
    return best_val, tuple(IntegralCacheSet.of(files) for files in best_sets)


@dataclass
class RegretSeries:
    """Per-slot utilities of policy and benchmark, and the cumulative
    alpha-regret alpha * bench - policy."""

    alpha: float
    policy_utils: np.ndarray
    bench_utils: np.ndarray

    @property
    def cum_policy(self) -> np.ndarray:
        return np.cumsum(self.policy_utils)

    @property
    def cum_bench(self) -> np.ndarray:
        return np.cumsum(self.bench_utils)

    @property
    def regret(self) -> np.ndarray:
        return self.alpha * self.cum_bench - self.cum_policy

    @property
    def final_regret(self) -> float:
        return float(self.alpha * self.bench_utils.sum() - self.policy_utils.sum())


def regret_accounting(actions, requests, alpha: float, benchmark,
                      spec: BipartitePolytopeSpec | None = None) -> RegretSeries:
    """Static-regret accounting of a finished run against the full-horizon
    benchmark (an IntegralCacheSet, or the per-cache sets in bipartite mode)."""
    t = len(requests)
    policy_utils = np.zeros(t)
    bench_utils = np.zeros(t)
    bipartite = spec is not None
    for idx, (action, req) in enumerate(zip(actions, requests)):
        if bipartite:
            policy_utils[idx] = 1.0 if bipartite_served(action, req, spec) else 0.0
            caches = spec.connected_caches(req.user)
            bench_utils[idx] = 1.0 if any(req.file in benchmark[j] for j in caches) else 0.0
        else:
            policy_utils[idx] = 1.0 if req.file in action else 0.0
            bench_utils[idx] = 1.0 if req.file in benchmark else 0.0
    return RegretSeries(alpha, policy_utils, bench_utils)


def prefix_opt_curve(files: np.ndarray, n_files: int, capacity: int) -> np.ndarray:
    """Prefix-recomputed hindsight optimum (equal sizes): entry t is the
    top-C value of the first t requests.  A plotting aid, distinct from the
    static benchmark used for regret."""
    counts = np.zeros(n_files)
    out = np.zeros(len(files))
    for t, f in enumerate(files):
        counts[f] += 1.0
        if capacity >= n_files:
            out[t] = counts.sum()
        else:
            out[t] = np.sort(counts)[-capacity:].sum()
    return out
