"""Experiment runner: wires trace x oracle x policy x seeds, enforces the
decide-then-observe slot protocol, and emits per-slot CSV rows for external
plotting.

Row format: slot,policy,seed,hit,cum_hits,cum_opt,regret,alpha with one
trailing summary row per run carrying R_T/T.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchmark import best_in_hindsight_topc, bipartite_exhaustive_opt, knapsack_dp_opt
from .core import ContractViolation, LibraryConfig, RequestEvent
from .oracles import OracleSpec, parse_oracle, predict
from .policies import (
    ExpertsCache,
    FtplBaseline,
    FtrlBaseline,
    OftplCache,
    OftplUneqCache,
    OftrlBipCache,
    OftrlCache,
    OftrlUneqCache,
    bipartite_served,
)
from .projections import BipartitePolytopeSpec
from .traces import TraceParseError, assign_sizes, generate_arrays, parse_trace


class ConfigError(Exception):
    """Invalid experiment configuration."""


# rng stream tags, combined with the seed so every component draws
# independently and reproducibly
_TRACE, _ORACLE, _POLICY, _SIZES = 0, 1, 2, 3

POLICY_MODES = {
    "oftrl": "equal",
    "oftpl": "equal",
    "ftrl": "equal",
    "ftpl": "equal",
    "experts": "equal",
    "oftrl-uneq": "uneq",
    "oftpl-uneq": "uneq",
    "oftrl-bip": "bip",
}

ALPHA_AUTO = {"equal": 1.0, "uneq": 0.5, "bip": 1.0 - 1.0 / math.e}


def make_policy(name: str, rng, lib: LibraryConfig | None = None,
                bip_spec: BipartitePolytopeSpec | None = None,
                fresh_perturbation: bool = False):
    if name == "oftrl":
        return OftrlCache(lib, rng)
    if name == "oftpl":
        return OftplCache(lib, rng, fresh_perturbation)
    if name == "ftrl":
        return FtrlBaseline(lib, rng)
    if name == "ftpl":
        return FtplBaseline(lib, rng, fresh_perturbation)
    if name == "experts":
        return ExpertsCache(lib, rng)
    if name == "oftrl-uneq":
        return OftrlUneqCache(lib, rng)
    if name == "oftpl-uneq":
        return OftplUneqCache(lib, rng, fresh_perturbation)
    if name == "oftrl-bip":
        return OftrlBipCache(bip_spec, rng)
    raise ConfigError(f"unknown policy {name!r}")


def simulate(policy, files, users, oracle: OracleSpec, oracle_rng,
             n_pred_items: int, n_users: int | None = None,
             collect_actions: bool = False):
    """Drive one policy through a trace; returns (per-slot hit array, actions
    or None).  The oracle sees the upcoming request; the policy never does."""
    horizon = len(files)
    hits = np.zeros(horizon)
    actions = [] if collect_actions else None
    bip = POLICY_MODES.get(policy.name) == "bip"
    for t in range(horizon):
        req = RequestEvent(slot=t + 1, file=int(files[t]),
                           user=int(users[t]) if users is not None else None)
        pred = predict(oracle, req, oracle_rng, n_pred_items, n_users)
        action = policy.decide(pred)
        if bip:
            hit = bipartite_served(action, req, policy.spec)
        else:
            hit = req.file in action
        hits[t] = 1.0 if hit else 0.0
        policy.observe(req)
        if collect_actions:
            actions.append(action)
    return hits, actions


@dataclass
class ExperimentConfig:
    trace: str
    oracle: str
    policies: list[str]
    capacity: float
    horizon: int
    n_files: int
    seeds: list[int] = field(default_factory=lambda: [0])
    sizes_lo: int = 1
    sizes_hi: int = 1
    alpha: str = "auto"
    out: str = "results.csv"
    fresh_perturbation: bool = False
    topology: str | None = None
    jobs: int = 1

    def validate(self):
        if not self.policies:
            raise ConfigError("at least one policy is required")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 1 <= self.sizes_lo <= self.sizes_hi:
            raise ConfigError("sizes must satisfy 1 <= lo <= hi")
        if self.sizes_hi > self.capacity:
            raise ConfigError("largest file size must not exceed the capacity")
        for name in self.policies:
            if name not in POLICY_MODES:
                raise ConfigError(f"unknown policy {name!r}")
            mode = POLICY_MODES[name]
            if mode == "equal" and self.sizes_hi > 1:
                raise ConfigError(f"{name} requires equal sizes (--sizes 1:1)")
            if mode == "bip" and not self.topology:
                raise ConfigError(f"{name} requires --topology")


def load_topology(path, n_files: int = 0) -> BipartitePolytopeSpec:
    """Topology CSV: rows `cache_id,capacity`, then rows `edge,user_id,cache_id`."""
    caps: dict[int, float] = {}
    edges: list[tuple[int, int]] = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                cells = [c.strip() for c in line.split(",")]
                try:
                    if cells[0] == "edge":
                        edges.append((int(cells[1]), int(cells[2])))
                    else:
                        caps[int(cells[0])] = float(cells[1])
                except (IndexError, ValueError) as exc:
                    raise ConfigError(f"{path}:{line_no}: bad topology row {line!r}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read topology {path}: {exc}") from exc
    if not caps or not edges:
        raise ConfigError(f"topology {path} needs cache rows and edge rows")
    n_caches = max(caps) + 1
    n_users = max(u for u, _ in edges) + 1
    capacities = np.array([caps.get(j, 0) for j in range(n_caches)])
    adjacency = np.zeros((n_users, n_caches))
    for u, j in edges:
        adjacency[u, j] = 1.0
    return BipartitePolytopeSpec(n_files, capacities, adjacency)


def _benchmark_for(mode: str, files, users, cfg: ExperimentConfig,
                   sizes: np.ndarray, bip_spec: BipartitePolytopeSpec | None):
    """Full-horizon hindsight optimum and the per-slot benchmark-hit array."""
    if mode == "bip":
        counts2d = np.zeros((cfg.n_files, bip_spec.n_users))
        np.add.at(counts2d, (files, users), 1.0)
        value, sets = bipartite_exhaustive_opt(counts2d, bip_spec)
        held = np.zeros((cfg.n_files, bip_spec.n_caches), dtype=bool)
        for j, cache in enumerate(sets):
            for f in cache.files:
                held[f, j] = True
        coverage = np.zeros((cfg.n_files, bip_spec.n_users), dtype=bool)
        for i in range(bip_spec.n_users):
            coverage[:, i] = held[:, bip_spec.connected_caches(i)].any(axis=1)
        return coverage[files, users].astype(float)
    counts = np.bincount(files, minlength=cfg.n_files).astype(float)
    if mode == "uneq":
        _, best = knapsack_dp_opt(counts, sizes, int(cfg.capacity))
    else:
        best = best_in_hindsight_topc(counts, int(cfg.capacity))
    member = np.zeros(cfg.n_files, dtype=bool)
    member[list(best.files)] = True
    return member[files].astype(float)


def _run_one(cfg: ExperimentConfig, policy_name: str, seed: int) -> list[str]:
    """Simulate one (policy, seed) run and render its CSV rows."""
    mode = POLICY_MODES[policy_name]
    bip_spec = None
    n_users = 0
    if mode == "bip":
        bip_spec = load_topology(cfg.topology, cfg.n_files)
        n_users = bip_spec.n_users
    trace_spec = parse_trace(cfg.trace, cfg.n_files, cfg.horizon, n_users=n_users)
    files, users = generate_arrays(trace_spec, np.random.default_rng([seed, _TRACE]))
    if mode == "bip" and users is None:
        raise ConfigError("bipartite policies need a trace with user ids")
    sizes = assign_sizes(cfg.n_files, cfg.sizes_lo, cfg.sizes_hi,
                         np.random.default_rng([seed, _SIZES]))
    lib = None
    if mode != "bip":
        lib = LibraryConfig(cfg.n_files, cfg.capacity,
                            sizes if mode == "uneq" else np.ones(cfg.n_files))
    alpha = ALPHA_AUTO[mode] if cfg.alpha == "auto" else float(cfg.alpha)
    policy_rng = np.random.default_rng([seed, _POLICY, cfg.policies.index(policy_name)])
    policy = make_policy(policy_name, policy_rng, lib=lib, bip_spec=bip_spec,
                         fresh_perturbation=cfg.fresh_perturbation)
    oracle = parse_oracle(cfg.oracle)
    n_pred = cfg.n_files * n_users if mode == "bip" else cfg.n_files
    hits, _ = simulate(policy, files, users if mode == "bip" else None, oracle,
                       np.random.default_rng([seed, _ORACLE]), n_pred,
                       n_users if mode == "bip" else None)
    bench_hits = _benchmark_for(mode, files, users, cfg,
                                sizes if mode == "uneq" else np.ones(cfg.n_files),
                                bip_spec)
    cum_hits = np.cumsum(hits)
    cum_opt = np.cumsum(bench_hits)
    rows = []
    for t in range(cfg.horizon):
        regret = alpha * cum_opt[t] - cum_hits[t]
        rows.append(f"{t + 1},{policy_name},{seed},{int(hits[t])},"
                    f"{int(cum_hits[t])},{int(cum_opt[t])},{regret:.12g},{alpha:.12g}")
    final = alpha * cum_opt[-1] - cum_hits[-1]
    rows.append(f"summary,{policy_name},{seed},,{int(cum_hits[-1])},"
                f"{int(cum_opt[-1])},{final / cfg.horizon:.12g},{alpha:.12g}")
    return rows


def run_experiment(cfg: ExperimentConfig) -> None:
    cfg.validate()
    jobs = [(name, seed) for name in cfg.policies for seed in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one_star, [(cfg, n, s) for n, s in jobs]))
    else:
        results = [_run_one(cfg, name, seed) for name, seed in jobs]
    with open(cfg.out, "w", encoding="utf-8") as out:
        out.write("slot,policy,seed,hit,cum_hits,cum_opt,regret,alpha\n")
        for rows in results:
            out.write("\n".join(rows))
            out.write("\n")


def _run_one_star(args):
    return _run_one(*args)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="opticache", description="trace-driven caching experiments")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--trace", help="zipf:<alpha> | uniform_lb | csv:<path>")
    p.add_argument("--oracle",
                   help="perfect | adversarial | null | rho:<f> | zeta:<f> | "
                        "rho-sin:<lo>,<hi>,<period> | dirichlet")
    p.add_argument("--policy", action="append",
                   help=f"repeatable; one of {sorted(POLICY_MODES)}")
    p.add_argument("--capacity", type=float)
    p.add_argument("--n-files", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--sizes", default=None, help="lo:hi integer file sizes (1:1 = equal)")
    p.add_argument("--seeds", default=None, help="comma list or lo:hi range")
    p.add_argument("--alpha", default=None, help="'auto' or a float")
    p.add_argument("--out", default=None)
    p.add_argument("--fresh-perturbation", action="store_true", default=None)
    p.add_argument("--topology", default=None, help="csv of cache and edge rows")
    p.add_argument("--jobs", type=int, default=None)
    return p


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",") if s]


def _read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected key = value")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return values


def config_from_args(args) -> ExperimentConfig:
    file_vals = _read_config_file(args.config) if args.config else {}

    def pick(flag_val, key, cast, default=None):
        if flag_val is not None:
            return flag_val
        if key in file_vals:
            return cast(file_vals[key])
        return default

    policies = args.policy
    if policies is None and "policy" in file_vals:
        policies = [s.strip() for s in file_vals["policy"].split(",") if s.strip()]
    trace = pick(args.trace, "trace", str)
    oracle = pick(args.oracle, "oracle", str)
    capacity = pick(args.capacity, "capacity", float)
    n_files = pick(args.n_files, "n_files", int)
    horizon = pick(args.horizon, "horizon", int)
    for name, value in (("--trace", trace), ("--oracle", oracle), ("--policy", policies),
                        ("--capacity", capacity), ("--n-files", n_files),
                        ("--horizon", horizon)):
        if value is None:
            raise ConfigError(f"{name} is required")
    sizes = pick(args.sizes, "sizes", str, "1:1")
    try:
        lo, hi = (int(part) for part in sizes.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad --sizes {sizes!r}") from exc
    seeds_text = pick(args.seeds, "seeds", str, "0")
    return ExperimentConfig(
        trace=trace, oracle=oracle, policies=policies, capacity=capacity,
        horizon=horizon, n_files=n_files, seeds=_parse_seeds(seeds_text),
        sizes_lo=lo, sizes_hi=hi,
        alpha=pick(args.alpha, "alpha", str, "auto"),
        out=pick(args.out, "out", str, "results.csv"),
        fresh_perturbation=bool(pick(args.fresh_perturbation, "fresh_perturbation",
                                     lambda s: s.lower() in ("1", "true", "yes"), False)),
        topology=pick(args.topology, "topology", str),
        jobs=pick(args.jobs, "jobs", int, 1),
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ContractViolation, TraceParseError, ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
