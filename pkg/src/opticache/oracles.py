"""Prediction oracles spanning the experimental regimes: perfect, adversarial
one-hot, fixed or sinusoidal hit-rate, smoothed density, Dirichlet noise, and
the null oracle that powers the non-optimistic baselines.

The oracle peeks at the true upcoming request (the simulator is omniscient;
the policies are not).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PredictionVector, RequestEvent, pair_index

KINDS = ("perfect", "adversarial", "accuracy", "density", "dirichlet", "null")


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    rho: float = 1.0
    zeta: float = 1.0
    # sinusoidal accuracy schedule; active when period > 0
    rho_lo: float = 0.0
    rho_hi: float = 0.0
    period: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        for p in (self.rho, self.zeta):
            if not 0.0 <= p <= 1.0:
                raise ValueError("oracle parameter must lie in [0, 1]")
        if self.period > 0 and self.rho_lo > self.rho_hi:
            raise ValueError("rho_lo must not exceed rho_hi")


def sinusoidal_accuracy(t: int, period: float, lo: float, hi: float) -> float:
    """Accuracy oscillating between lo and hi with the given period."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    return lo + (hi - lo) * (1.0 + math.sin(2.0 * math.pi * t / period)) / 2.0


def predict(spec: OracleSpec, request: RequestEvent, rng,
            n_items: int, n_users: int | None = None) -> PredictionVector:
    """Forecast for the upcoming request.

    `n_items` is the prediction dimension: the library size, or n_files *
    n_users in the bipartite setting (where forecasts live on (file, user)
    pairs, indexed the same way as the requests).
    """
    if request.user is None:
        true_idx = request.file
    else:
        true_idx = pair_index(request.file, request.user, n_users)
    kind = spec.kind
    if kind == "null":
        return PredictionVector.null(n_items)
    if kind == "perfect":
        return PredictionVector.one_hot(n_items, true_idx)
    if kind == "adversarial":
        # deterministic worst one-hot: the lowest index that is a miss
        wrong = 1 if true_idx == 0 else 0
        return PredictionVector.one_hot(n_items, wrong)
    if kind == "accuracy":
        rho = spec.rho
        if spec.period > 0:
            rho = sinusoidal_accuracy(request.slot, spec.period, spec.rho_lo, spec.rho_hi)
        if rng.random() < rho:
            return PredictionVector.one_hot(n_items, true_idx)
        other = int(rng.integers(n_items - 1))
        if other >= true_idx:
            other += 1
        return PredictionVector.one_hot(n_items, other)
    if kind == "density":
        return PredictionVector.with_background(n_items, true_idx, spec.zeta)
    # dirichlet: flat Dirichlet draw, independent of the request
    return PredictionVector.from_dense(rng.dirichlet(np.ones(n_items)))


def parse_oracle(text: str) -> OracleSpec:
    """Parse the CLI oracle grammar:
    perfect | adversarial | null | rho:<f> | zeta:<f> | rho-sin:<lo>,<hi>,<period> | dirichlet
    """
    text = text.strip()
    if text in ("perfect", "adversarial", "null", "dirichlet"):
        return OracleSpec(kind=text)
    if text.startswith("rho-sin:"):
        parts = text[len("rho-sin:"):].split(",")
        if len(parts) != 3:
            raise ValueError(f"rho-sin wants lo,hi,period: {text!r}")
        lo, hi, period = (float(p) for p in parts)
        return OracleSpec(kind="accuracy", rho_lo=lo, rho_hi=hi, period=period)
    if text.startswith("rho:"):
        return OracleSpec(kind="accuracy", rho=float(text[4:]))
    if text.startswith("zeta:"):
        return OracleSpec(kind="density", zeta=float(text[5:]))
    raise ValueError(f"cannot parse oracle spec {text!r}")
