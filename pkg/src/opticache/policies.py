"""Online caching policies.  Every policy runs the same two-phase slot
protocol: decide(prediction) commits an action before the request is known,
observe(request) then reveals the demand and updates the internal state.
Calling them out of order raises ContractViolation.

Prediction-adaptive smoothing follows two routes: regularization, whose
weight grows with the accumulated squared l2 prediction error, and Gaussian
score perturbation scaled by the accumulated squared l1 error.  Unequal file
sizes are handled by rounding the fractional Knapsack point (half-probability
guarantee); the bipartite variant discretizes each cache independently and
routes after the request lands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ContractViolation,
    CumulativeGradient,
    FractionalAllocation,
    IntegralCacheSet,
    LibraryConfig,
    PredictionErrorLedger,
    PredictionVector,
    RequestEvent,
    error_increments,
    pair_index,
)
from .projections import (
    BipartitePoint,
    BipartitePolytopeSpec,
    dykstra_project_bipartite,
    project_capped_simplex,
    project_two_simplex,
    project_weighted_capped_simplex,
)
from .rounding import AlmostIntegralVector, dantzig_relax, depround, madow_sample, rand_half


def top_c_files(scores: np.ndarray, c: int) -> np.ndarray:
    """Indices of the c largest scores, ties broken by file index (ascending).

    Linear-time selection; only the boundary value needs an explicit
    tie-break pass.
    """
    n = scores.shape[0]
    if c >= n:
        return np.arange(n)
    if c <= 0:
        return np.empty(0, dtype=np.int64)
    part = np.argpartition(-scores, c - 1)[:c]
    thresh = scores[part].min()
    above = np.flatnonzero(scores > thresh)
    tied = np.flatnonzero(scores == thresh)
    return np.concatenate([above, tied[: c - above.size]])


class RegularizationSchedule:
    """Regularization weights sigma_t driven by the squared l2 prediction
    error, plus the proximal anchor sum(sigma_tau * xhat_tau)."""

    __slots__ = ("sigma_base", "sigma_cum", "anchor")

    def __init__(self, sigma_base: float, dim: int | None = None):
        self.sigma_base = sigma_base
        self.sigma_cum = 0.0
        self.anchor = np.zeros(dim) if dim is not None else None

    def update(self, ledger: PredictionErrorLedger) -> float:
        """Refresh sigma_{1:t} from the ledger; returns the increment sigma_t."""
        new_cum = self.sigma_base * math.sqrt(ledger.sum_l2_sq)
        sigma_t = new_cum - self.sigma_cum
        self.sigma_cum = new_cum
        return sigma_t


class PerturbationState:
    """Gaussian perturbation with scale eta_t driven by the squared l1
    prediction error.  The noise vector is drawn once up front; fresh-per-slot
    redraws are an opt-in for adaptive adversaries."""

    __slots__ = ("gamma", "eta", "fresh_each_slot", "scale", "_rng")

    def __init__(self, n_items: int, capacity: float, rng,
                 fresh_each_slot: bool = False):
        self.scale = (1.3 / math.sqrt(capacity)) * \
            (1.0 / math.log(n_items * math.e / capacity)) ** 0.25
        self.gamma = rng.standard_normal(n_items)
        self.eta = 0.0
        self.fresh_each_slot = fresh_each_slot
        self._rng = rng

    def update(self, ledger: PredictionErrorLedger) -> float:
        self.eta = self.scale * math.sqrt(ledger.sum_l1_sq)
        return self.eta

    def perturbation(self) -> np.ndarray:
        if self.fresh_each_slot:
            self.gamma = self._rng.standard_normal(self.gamma.shape[0])
        return self.gamma


class Policy:
    """Base slot protocol: decide, then observe, in strict alternation."""

    name = "policy"

    def __init__(self):
        self._awaiting_observe = False

    def decide(self, prediction: PredictionVector):
        if self._awaiting_observe:
            raise ContractViolation(f"{self.name}: decide called before observing the last slot")
        action = self._decide(prediction)
        self._awaiting_observe = True
        return action

    def observe(self, request: RequestEvent) -> None:
        if not self._awaiting_observe:
            raise ContractViolation(f"{self.name}: observe called before a decision")
        self._observe(request)
        self._awaiting_observe = False

    def _decide(self, prediction):
        raise NotImplementedError

    def _observe(self, request):
        raise NotImplementedError


class OftrlCache(Policy):
    """Regularized leader with proximal smoothing, discretized by Madow
    sampling.  Equal-size mode."""

    name = "oftrl"

    def __init__(self, lib: LibraryConfig, rng):
        super().__init__()
        if not lib.is_equal_size:
            raise ValueError(f"{self.name} requires equal-size files")
        self.lib = lib
        self.rng = rng
        self.c = lib.int_capacity
        self.grad = CumulativeGradient(lib.n_files)
        self.ledger = PredictionErrorLedger()
        self.sched = RegularizationSchedule(1.0 / math.sqrt(self.c), dim=lib.n_files)
        self._xhat: np.ndarray | None = None
        self._pred: PredictionVector | None = None

    def _fractional_point(self, prediction: PredictionVector) -> np.ndarray:
        g = self.grad.counts.copy()
        prediction.add_to(g)
        if self.sched.sigma_cum == 0.0:
            # all past predictions perfect: unregularized leader
            xhat = np.zeros(g.shape[0])
            xhat[top_c_files(g, self.c)] = 1.0
            return xhat
        g += self.sched.anchor
        g /= self.sched.sigma_cum
        return project_capped_simplex(g, self.c)

    def _decide(self, prediction):
        xhat = self._fractional_point(prediction)
        self._xhat = xhat
        self._pred = prediction
        return madow_sample(xhat, self.c, self.rng)

    def _observe(self, request):
        l2, l1 = error_increments(request, self._pred)
        self.ledger.record(l2, l1)
        sigma_t = self.sched.update(self.ledger)
        if sigma_t != 0.0:
            self.sched.anchor += sigma_t * self._xhat
        self.grad.add(request.file)

    @property
    def last_fractional(self) -> FractionalAllocation:
        return FractionalAllocation(self._xhat)


class OftplCache(Policy):
    """Perturbed leader: top-C of counts + prediction + scaled Gaussian noise.
    Equal-size mode."""

    name = "oftpl"

    def __init__(self, lib: LibraryConfig, rng, fresh_perturbation: bool = False):
        super().__init__()
        if not lib.is_equal_size:
            raise ValueError(f"{self.name} requires equal-size files")
        self.lib = lib
        self.c = lib.int_capacity
        self.grad = CumulativeGradient(lib.n_files)
        self.ledger = PredictionErrorLedger()
        self.pert = PerturbationState(lib.n_files, self.c, rng, fresh_perturbation)
        self._pred: PredictionVector | None = None

    def _decide(self, prediction):
        eta = self.pert.update(self.ledger)
        scores = self.grad.counts.copy()
        prediction.add_to(scores)
        if eta != 0.0:
            scores = scores + eta * self.pert.perturbation()
        self._pred = prediction
        return IntegralCacheSet.of(top_c_files(scores, self.c))

    def _observe(self, request):
        l2, l1 = error_increments(request, self._pred)
        self.ledger.record(l2, l1)
        self.grad.add(request.file)


class OftplUneqCache(Policy):
    """Perturbed leader for unequal sizes: fractional Knapsack of the floored
    perturbed profits, then half-probability rounding."""

    name = "oftpl-uneq"

    def __init__(self, lib: LibraryConfig, rng, fresh_perturbation: bool = False):
        super().__init__()
        self.lib = lib
        self.rng = rng
        self.grad = CumulativeGradient(lib.n_files)
        self.ledger = PredictionErrorLedger()
        self.pert = PerturbationState(lib.n_files, lib.capacity, rng, fresh_perturbation)
        self._yhat: np.ndarray | None = None
        self._pred: PredictionVector | None = None

    def _decide(self, prediction):
        eta = self.pert.update(self.ledger)
        profits = self.grad.counts.copy()
        prediction.add_to(profits)
        if eta != 0.0:
            profits += eta * self.pert.perturbation()
        np.maximum(profits, 0.0, out=profits)
        self._pred = prediction
        # zero-profit items never enter the prefix
        positive = np.flatnonzero(profits > 0.0)
        yhat = np.zeros(profits.shape[0])
        if positive.size:
            sub, _ = dantzig_relax(self.lib.capacity, profits[positive],
                                   self.lib.sizes[positive])
            yhat[positive] = sub.mass
        self._yhat = yhat
        return rand_half(AlmostIntegralVector(yhat), self.rng)

    def _observe(self, request):
        l2, l1 = error_increments(request, self._pred)
        self.ledger.record(l2, l1)
        self.grad.add(request.file)

    @property
    def last_fractional(self) -> FractionalAllocation:
        return FractionalAllocation(self._yhat)


class OftrlUneqCache(Policy):
    """Regularized leader over the weighted polytope, made almost-integral by
    dependent rounding and finished by half-probability rounding."""

    name = "oftrl-uneq"

    def __init__(self, lib: LibraryConfig, rng):
        super().__init__()
        self.lib = lib
        self.rng = rng
        self.grad = CumulativeGradient(lib.n_files)
        self.ledger = PredictionErrorLedger()
        self.sched = RegularizationSchedule(1.0 / math.sqrt(lib.capacity), dim=lib.n_files)
        self._xhat: np.ndarray | None = None
        self._pred: PredictionVector | None = None

    def _decide(self, prediction):
        g = self.grad.counts.copy()
        prediction.add_to(g)
        if self.sched.sigma_cum == 0.0:
            xhat = dantzig_relax(self.lib.capacity, g, self.lib.sizes)[0].mass
        else:
            xhat = project_weighted_capped_simplex(
                (self.sched.anchor + g) / self.sched.sigma_cum,
                self.lib.sizes, self.lib.capacity)
        self._xhat = xhat
        self._pred = prediction
        xbar = depround(xhat, self.lib.sizes, self.rng)
        return rand_half(xbar, self.rng)

    def _observe(self, request):
        l2, l1 = error_increments(request, self._pred)
        self.ledger.record(l2, l1)
        sigma_t = self.sched.update(self.ledger)
        if sigma_t != 0.0:
            self.sched.anchor += sigma_t * self._xhat
        self.grad.add(request.file)

    @property
    def last_fractional(self) -> FractionalAllocation:
        return FractionalAllocation(self._xhat)


@dataclass
class BipartiteAction:
    """Per-cache discrete contents plus the routing chosen once the request
    is revealed (filled during observe)."""

    cache_sets: tuple[IntegralCacheSet, ...]
    routing: dict[tuple[int, int], int] = field(default_factory=dict)

    def holds(self, file: int, caches) -> list[int]:
        return [j for j in caches if file in self.cache_sets[j]]


def bipartite_served(action: BipartiteAction, request: RequestEvent,
                     spec: BipartitePolytopeSpec) -> bool:
    """Hit indicator: some cache connected to the user holds the file."""
    return bool(action.holds(request.file, spec.connected_caches(request.user)))


class OftrlBipCache(Policy):
    """Joint caching/routing over a bipartite network.  The regularized
    leader point lives on the LP relaxation (utility mass on the routing
    block); caches are discretized independently by Madow sampling and the
    request is routed to a uniformly random connected holder."""

    name = "oftrl-bip"

    def __init__(self, spec: BipartitePolytopeSpec, rng,
                 dykstra_tol: float = 1e-6, dykstra_max_iters: int = 5000):
        super().__init__()
        self.spec = spec
        self.rng = rng
        self.tol = dykstra_tol
        self.max_iters = dykstra_max_iters
        n, i = spec.n_files, spec.n_users
        self.grad = CumulativeGradient(n * i)
        self._counts2d = self.grad.counts.reshape(n, i)
        self.ledger = PredictionErrorLedger()
        self.sched = RegularizationSchedule(1.0 / math.sqrt(1.0 + spec.capacities.sum()))
        self.anchor = BipartitePoint.zeros(spec)
        self._lp = None
        self._xhat: BipartitePoint | None = None
        self._pred: PredictionVector | None = None
        self._action: BipartiteAction | None = None

    def _decide(self, prediction):
        g = self.grad.counts.copy()
        prediction.add_to(g)
        g2 = g.reshape(self.spec.n_files, self.spec.n_users)
        if self.sched.sigma_cum == 0.0:
            xhat = self._lp_leader(g2)
        else:
            z = BipartitePoint(
                self.anchor.k / self.sched.sigma_cum,
                (self.anchor.u + g2[:, :, None]) / self.sched.sigma_cum)
            xhat = dykstra_project_bipartite(z, self.spec, self.tol, self.max_iters)
        sets = []
        for j in range(self.spec.n_caches):
            col = np.clip(xhat.k[:, j], 0.0, 1.0)
            cap = self.spec.capacities[j]
            total = col.sum()
            if total > cap:  # squeeze out the projection tolerance
                col *= cap / total
            sets.append(madow_sample(col, int(round(cap)), self.rng))
        self._xhat = xhat
        self._pred = prediction
        self._action = BipartiteAction(cache_sets=tuple(sets))
        return self._action

    def _observe(self, request):
        l2, l1 = error_increments(request, self._pred, n_users=self.spec.n_users)
        self.ledger.record(l2, l1)
        sigma_t = self.sched.update(self.ledger)
        if sigma_t != 0.0:
            self.anchor.k += sigma_t * self._xhat.k
            self.anchor.u += sigma_t * self._xhat.u
        self.grad.add(pair_index(request.file, request.user, self.spec.n_users))
        holders = self._action.holds(request.file, self.spec.connected_caches(request.user))
        if holders:
            j = holders[int(self.rng.integers(len(holders)))]
            self._action.routing[(request.file, request.user)] = j

    def _lp_leader(self, g2: np.ndarray) -> BipartitePoint:
        """Unregularized leader over the LP relaxation (the sigma_{1:t-1} = 0
        branch; exact LP solve)."""
        from scipy.optimize import linprog

        spec = self.spec
        n, iu, j = spec.n_files, spec.n_users, spec.n_caches
        nk, nu = n * j, n * iu * j
        if self._lp is None:
            rows = []
            # per-cache capacity on the k block
            for cj in range(j):
                row = np.zeros(nk + nu)
                row[cj:nk:j] = 1.0
                rows.append(row)
            # per-(file,user) routing cap
            for p in range(n * iu):
                row = np.zeros(nk + nu)
                row[nk + p * j: nk + (p + 1) * j] = 1.0
                rows.append(row)
            # coupling u_nij <= k_nj where reachable
            for fn in range(n):
                for ui in range(iu):
                    for cj in range(j):
                        if spec.adjacency[ui, cj] == 1.0:
                            row = np.zeros(nk + nu)
                            row[nk + (fn * iu + ui) * j + cj] = 1.0
                            row[fn * j + cj] = -1.0
                            rows.append(row)
            b = np.concatenate([spec.capacities, np.ones(n * iu),
                                np.zeros(len(rows) - j - n * iu)])
            bounds = [(0.0, 1.0)] * nk
            for fn in range(n):
                for ui in range(iu):
                    for cj in range(j):
                        hi = 1.0 if spec.adjacency[ui, cj] == 1.0 else 0.0
                        bounds.append((0.0, hi))
            self._lp = (np.array(rows), b, bounds)
        a_ub, b_ub, bounds = self._lp
        cost = np.concatenate([np.zeros(nk),
                               -np.broadcast_to(g2[:, :, None], (n, iu, j)).ravel()])
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise RuntimeError(f"leader LP failed: {res.message}")
        return BipartitePoint(res.x[:nk].reshape(n, j), res.x[nk:].reshape(n, iu, j))

    @property
    def last_fractional(self) -> BipartitePoint:
        return self._xhat


class ExpertsCache(Policy):
    """Meta-learner mixing a prediction-blind gradient-ascent expert with an
    optimist that trusts the oracle outright; the mixture weights follow the
    experts' realized utilities.  Equal-size mode."""

    name = "experts"

    def __init__(self, lib: LibraryConfig, rng):
        super().__init__()
        if not lib.is_equal_size:
            raise ValueError(f"{self.name} requires equal-size files")
        self.lib = lib
        self.rng = rng
        self.c = lib.int_capacity
        self.grad = CumulativeGradient(lib.n_files)
        self.weights = (0.5, 0.5)
        self.pessimist = np.zeros(lib.n_files)
        self.t = 0
        self._prev_file: int | None = None
        self._optimist: np.ndarray | None = None
        self._zhat: np.ndarray | None = None
        # per-slot expert utilities, for regret bookkeeping
        self.pessimist_utils: list[float] = []
        self.optimist_utils: list[float] = []

    def _decide(self, prediction):
        self.t += 1
        step = 1.0 / math.sqrt(self.t)
        if self._prev_file is not None:
            # ascend along the previous slot's gradient (the current request
            # is not revealed yet)
            moved = self.pessimist.copy()
            moved[self._prev_file] += step
            self.pessimist = project_capped_simplex(moved, self.c)
        scores = np.zeros(self.lib.n_files)
        prediction.add_to(scores)
        optimist = np.zeros(self.lib.n_files)
        optimist[top_c_files(scores, self.c)] = 1.0
        self._optimist = optimist
        wp, wo = self.weights
        self._zhat = wp * self.pessimist + wo * optimist
        return madow_sample(self._zhat, self.c, self.rng)

    def _observe(self, request):
        f = request.file
        util_p = float(self.pessimist[f])
        util_o = float(self._optimist[f])
        self.pessimist_utils.append(util_p)
        self.optimist_utils.append(util_o)
        step = 1.0 / math.sqrt(self.t)
        self.weights = project_two_simplex((self.weights[0] + step * util_p,
                                            self.weights[1] + step * util_o))
        self.grad.add(f)
        self._prev_file = f

    @property
    def last_fractional(self) -> FractionalAllocation:
        return FractionalAllocation(self._zhat)


class FtrlBaseline(OftrlCache):
    """Non-optimistic FTRL: the regularized leader fed the null prediction,
    recovering the sqrt(t) smoothing schedule."""

    name = "ftrl"

    def __init__(self, lib: LibraryConfig, rng):
        super().__init__(lib, rng)
        self._null = PredictionVector.null(lib.n_files)

    def _decide(self, prediction):
        return super()._decide(self._null)


class FtplBaseline(OftplCache):
    """Non-optimistic FTPL: the perturbed leader fed the null prediction."""

    name = "ftpl"

    def __init__(self, lib: LibraryConfig, rng, fresh_perturbation: bool = False):
        super().__init__(lib, rng, fresh_perturbation)
        self._null = PredictionVector.null(lib.n_files)

    def _decide(self, prediction):
        return super()._decide(self._null)
