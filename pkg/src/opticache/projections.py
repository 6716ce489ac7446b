"""Euclidean projections onto the feasible polytopes used by the policies:
the capped simplex (equal sizes), its size-weighted variant, the 2-simplex for
the meta-learner weights, and the bipartite caching/routing polytope (via
Dykstra's alternating projections).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DykstraNotConverged(Exception):
    """Alternating projections hit the sweep budget with residual above tol."""

    def __init__(self, residual: float, tol: float):
        super().__init__(f"residual {residual:.3e} > tol {tol:.3e} after max sweeps")
        self.residual = residual


def _check_finite(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("projection input must be finite")
    return z


def _pivot_small(z: np.ndarray, capacity: float) -> float:
    """Breakpoint scan for the capped-simplex multiplier, plain-Python flavor
    (faster than numpy dispatch below a few dozen coordinates)."""
    events = sorted([(v - 1.0, -1) for v in z] + [(v, 1) for v in z])
    prev, delta0 = events[0]
    mass = float(len(z))
    slope = delta0
    for p, delta in events[1:]:
        new_mass = mass + slope * (p - prev)
        if new_mass <= capacity:
            if slope < 0:
                return prev + (capacity - mass) / slope
            return p
        mass, prev = new_mass, p
        slope += delta
    return prev  # unreachable for capacity > 0


def project_capped_simplex(z: np.ndarray, capacity: float) -> np.ndarray:
    """Project z onto {x in [0,1]^N : sum(x) <= capacity}.

    Exact solve: the box projection is returned when already feasible;
    otherwise the unique multiplier lambda with sum(clip(z - lambda, 0, 1)) =
    capacity is found by scanning the 2N sorted breakpoints of the piecewise
    linear mass function (O(N log N), no iteration).
    """
    z = _check_finite(z)
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    x = np.clip(z, 0.0, 1.0)
    if x.sum() <= capacity:
        return x
    n = z.shape[0]
    if n <= 48:
        return np.clip(z - _pivot_small(z.tolist(), capacity), 0.0, 1.0)
    # mass(lambda) = sum_i clip(z_i - lambda, 0, 1): each coordinate ramps
    # down with slope -1 on (z_i - 1, z_i).
    pts = np.concatenate([z, z])
    pts[:n] -= 1.0
    order = pts.argsort()
    pts = pts[order]
    slopes = np.where(order < n, -1.0, 1.0)
    np.cumsum(slopes, out=slopes)
    mass = np.empty(2 * n)
    mass[0] = 0.0
    np.multiply(slopes[:-1], pts[1:] - pts[:-1], out=mass[1:])
    np.cumsum(mass, out=mass)
    mass += n
    # last breakpoint index with mass >= capacity; the crossing lies in the
    # segment that starts there
    idx = int(np.searchsorted(-mass, -capacity, side="right")) - 1
    if mass[idx] == capacity or slopes[idx] >= 0:
        lam = pts[idx]
    else:
        lam = pts[idx] + (mass[idx] - capacity) / (-slopes[idx])
    return np.clip(z - lam, 0.0, 1.0)


def project_weighted_capped_simplex(z: np.ndarray, sizes: np.ndarray,
                                    capacity: float) -> np.ndarray:
    """Project z onto {x in [0,1]^N : sum(s_i x_i) <= capacity}.

    The multiplier is found by bisection on the monotone map
    lambda -> sum(s_i clip(z_i - lambda s_i, 0, 1)); termination once the
    feasible-side residual drops below 1e-10 * capacity.
    """
    z = _check_finite(z)
    s = _check_finite(sizes)
    if np.any(s <= 0):
        raise ValueError("sizes must be positive")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    x = np.clip(z, 0.0, 1.0)
    if s @ x <= capacity:
        return x
    lo = 0.0
    hi = float(np.max(z / s))
    lam = hi
    tol = 1e-10 * capacity
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        used = s @ np.clip(z - mid * s, 0.0, 1.0)
        if used > capacity:
            lo = mid
        else:
            hi = mid
            if capacity - used <= tol:
                break
        lam = hi
    else:
        lam = hi
    return np.clip(z - lam * s, 0.0, 1.0)


def project_two_simplex(w) -> tuple[float, float]:
    """Project a weight pair onto {(a, b) : a, b >= 0, a + b = 1}."""
    w0, w1 = float(w[0]), float(w[1])
    if not (np.isfinite(w0) and np.isfinite(w1)):
        raise ValueError("projection input must be finite")
    p = min(max((w0 - w1 + 1.0) / 2.0, 0.0), 1.0)
    return p, 1.0 - p


@dataclass(frozen=True)
class BipartitePolytopeSpec:
    """Topology of a bipartite caching network: J caches with capacities C_j
    serving I user locations through a 0/1 adjacency d_ij."""

    n_files: int
    capacities: np.ndarray
    adjacency: np.ndarray

    def __post_init__(self):
        caps = np.asarray(self.capacities, dtype=float)
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.ndim != 2 or adj.shape[1] != caps.shape[0]:
            raise ValueError("adjacency must be (n_users, n_caches)")
        if not np.all(np.isin(adj, (0.0, 1.0))):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(adj.sum(axis=1) < 1):
            raise ValueError("every user must reach at least one cache")
        if np.any(caps < 1):
            raise ValueError("every cache capacity must be >= 1")
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_caches(self) -> int:
        return self.capacities.shape[0]

    @property
    def n_users(self) -> int:
        return self.adjacency.shape[0]

    def connected_caches(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[user] == 1.0)


class BipartitePoint:
    """A point over the bipartite variables: caching block k (N x J) and
    routing block u (N x I x J)."""

    __slots__ = ("k", "u")

    def __init__(self, k: np.ndarray, u: np.ndarray):
        self.k = np.asarray(k, dtype=float)
        self.u = np.asarray(u, dtype=float)

    @classmethod
    def zeros(cls, spec: BipartitePolytopeSpec) -> "BipartitePoint":
        n, i, j = spec.n_files, spec.n_users, spec.n_caches
        return cls(np.zeros((n, j)), np.zeros((n, i, j)))

    def copy(self) -> "BipartitePoint":
        return BipartitePoint(self.k.copy(), self.u.copy())


def bipartite_residual(point: BipartitePoint, spec: BipartitePolytopeSpec) -> float:
    """Largest constraint violation of a point w.r.t. the LP relaxation."""
    k, u = point.k, point.u
    r = max(
        float(np.max(k.sum(axis=0) - spec.capacities)),
        float(np.max(u.sum(axis=2) - 1.0)),
        float(np.max(u - k[:, None, :])),
        float(-min(k.min(), u.min())),
        float(max(k.max(), u.max()) - 1.0),
    )
    off = spec.adjacency == 0.0
    if off.any():
        r = max(r, float(np.max(np.abs(u[:, off]))))
    return r


def dykstra_project_bipartite(z: BipartitePoint, spec: BipartitePolytopeSpec,
                              tol: float = 1e-6,
                              max_iters: int = 5000) -> BipartitePoint:
    """Project onto the LP relaxation of the bipartite caching/routing set:
    boxes, per-cache capacity, per-(file,user) routing caps, and the coupling
    u_nij <= k_nj (u_nij = 0 where d_ij = 0).

    Dykstra sweeps cycle over four families of exact projections, each a
    product of low-dimensional sets; stops when a full sweep moves the iterate
    less than tol in l-infinity.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = _check_finite(z.k).copy()
    u = _check_finite(z.u).copy()
    n_users = spec.n_users
    caps = spec.capacities
    mask = spec.adjacency[None, :, :]  # broadcast over files

    # one correction term per constraint family (Dykstra increments)
    c_caps = np.zeros_like(k)
    c_ubox = np.zeros_like(u)
    c_route = np.zeros((k.shape[0], n_users, 1))
    c_pair = [np.zeros_like(k) for _ in range(n_users)]  # u side; k side is its negation
    # routing caps are implied by the box whenever users reach <= 1 cache
    route_needed = bool(np.max(spec.adjacency.sum(axis=1)) > 1)

    for _ in range(max_iters):
        prev_k = k.copy()
        prev_u = u.copy()

        # per-cache capped simplex on the caching block
        y = k + c_caps
        for j in range(spec.n_caches):
            yj = y[:, j]
            col = np.clip(yj, 0.0, 1.0)
            if col.sum() > caps[j]:
                if yj.shape[0] <= 48:
                    col = np.clip(yj - _pivot_small(yj.tolist(), caps[j]), 0.0, 1.0)
                else:
                    col = project_capped_simplex(yj, caps[j])
            k[:, j] = col
        new_c = y - k
        move = float(np.max(np.abs(new_c - c_caps)))
        c_caps = new_c

        # box on the routing block, with non-adjacent coordinates pinned at 0
        y = u + c_ubox
        u = np.clip(y, 0.0, 1.0) * mask
        new_c = y - u
        move = max(move, float(np.max(np.abs(new_c - c_ubox))))
        c_ubox = new_c

        # per-(file,user) halfspace sum_j u_nij <= 1
        if route_needed:
            y = u + c_route
            excess = y.sum(axis=2) - 1.0
            np.clip(excess, 0.0, None, out=excess)
            excess /= spec.n_caches
            new_c = excess[:, :, None]
            move = max(move, float(np.max(np.abs(new_c - c_route))))
            c_route = new_c
            u = y - c_route

        # coupling u_nij <= k_nj on adjacent pairs, grouped per user
        # (disjoint 2-d halfspaces); corrections are +/- the applied shift
        for i in range(n_users):
            yu = u[:, i, :] + c_pair[i]
            yk = k - c_pair[i]
            shift = yu - yk
            np.clip(shift, 0.0, None, out=shift)
            shift *= 0.5 * spec.adjacency[i]
            u[:, i, :] = yu - shift
            k = yk + shift
            move = max(move, float(np.max(np.abs(shift - c_pair[i]))))
            c_pair[i] = shift

        # stationarity must cover the corrections as well: the iterate can
        # stall on a box face for a sweep while corrections still grow
        move = max(move, float(np.max(np.abs(k - prev_k))),
                   float(np.max(np.abs(u - prev_u))))
        if move < tol:
            # accept only once the iterate is also feasible within tol
            probe = BipartitePoint(np.clip(k, 0.0, 1.0), np.clip(u, 0.0, 1.0) * mask)
            if bipartite_residual(probe, spec) <= tol:
                break

    np.clip(k, 0.0, 1.0, out=k)
    np.clip(u, 0.0, 1.0, out=u)
    u *= mask
    out = BipartitePoint(k, u)
    resid = bipartite_residual(out, spec)
    if resid > tol:
        raise DykstraNotConverged(resid, tol)
    return out
