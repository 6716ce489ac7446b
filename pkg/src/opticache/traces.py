"""Request-sequence generation and ingestion: synthetic Zipf and uniform
traces, CSV replay, and the adapter that turns timestamped ratings exports
into replayable trace files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import RequestEvent

KINDS = ("zipf", "uniform_lb", "csv")


class TraceParseError(Exception):
    """Malformed trace input; carries the offending line number."""

    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class TraceSpec:
    kind: str
    n_files: int
    horizon: int
    alpha: float = 0.0
    path: str | None = None
    n_users: int = 0  # > 0 draws a uniform user per request (bipartite mode)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if self.alpha < 0:
            raise ValueError("zipf exponent must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.kind == "csv" and not self.path:
            raise ValueError("csv trace needs a path")


def zipf_probabilities(n_files: int, alpha: float) -> np.ndarray:
    weights = np.power(np.arange(1, n_files + 1, dtype=float), -alpha)
    return weights / weights.sum()


def generate_arrays(spec: TraceSpec, rng=None) -> tuple[np.ndarray, np.ndarray | None]:
    """Materialize a trace as (files, users) id arrays; users is None in
    single-cache mode."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind == "csv":
        files, users = load_trace_csv(spec.path)
        if files.shape[0] < spec.horizon:
            raise ValueError(f"csv trace has {files.shape[0]} rows < horizon {spec.horizon}")
        return files[:spec.horizon], users[:spec.horizon] if users is not None else None
    if spec.kind == "zipf":
        probs = zipf_probabilities(spec.n_files, spec.alpha)
        files = rng.choice(spec.n_files, size=spec.horizon, p=probs)
    else:  # uniform_lb
        files = rng.integers(0, spec.n_files, size=spec.horizon)
    users = rng.integers(0, spec.n_users, size=spec.horizon) if spec.n_users > 0 else None
    return files.astype(np.int64), users


def generate(spec: TraceSpec, rng=None):
    """Stream the trace as RequestEvents, slots numbered from 1."""
    files, users = generate_arrays(spec, rng)
    for t in range(files.shape[0]):
        yield RequestEvent(slot=t + 1, file=int(files[t]),
                           user=int(users[t]) if users is not None else None)


def assign_sizes(n_files: int, lo: int, hi: int, rng) -> np.ndarray:
    """Integer file sizes drawn uniformly from {lo, ..., hi}."""
    if not 1 <= lo <= hi:
        raise ValueError("need 1 <= lo <= hi")
    return rng.integers(lo, hi + 1, size=n_files).astype(float)


def load_trace_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a trace file with header slot,file_id[,user_id]; blank lines and
    '#' comments are skipped.  Row order and multiplicity are preserved."""
    files: list[int] = []
    users: list[int] = []
    has_users = False
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if not header_seen:
                if cells[0] != "slot" or cells[1] != "file_id":
                    raise TraceParseError(path, line_no, "expected header slot,file_id[,user_id]")
                has_users = len(cells) >= 3 and cells[2] == "user_id"
                header_seen = True
                continue
            try:
                files.append(int(cells[1]))
                if has_users:
                    users.append(int(cells[2]))
            except (IndexError, ValueError) as exc:
                raise TraceParseError(path, line_no, f"bad row {line!r}") from exc
    if not header_seen:
        raise TraceParseError(path, 0, "empty trace file")
    return (np.array(files, dtype=np.int64),
            np.array(users, dtype=np.int64) if has_users else None)


def convert_ratings(src_path, dst_path) -> int:
    """Turn a timestamped ratings export (header user,item,rating,timestamp)
    into a trace CSV, replaying in timestamp order.

    Item and user ids are densely re-indexed in first-occurrence order after
    the (stable) timestamp sort.  Returns the number of requests written.
    """
    rows = []
    with open(src_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, cells in enumerate(reader, start=1):
            if not cells or cells[0].startswith("#"):
                continue
            if line_no == 1 and cells[0] == "user":
                continue
            try:
                rows.append((float(cells[3]), cells[0], cells[1]))
            except (IndexError, ValueError) as exc:
                raise TraceParseError(src_path, line_no, f"bad row {cells!r}") from exc
    rows.sort(key=lambda r: r[0])
    item_ids: dict[str, int] = {}
    user_ids: dict[str, int] = {}
    with open(dst_path, "w", encoding="utf-8") as out:
        out.write("slot,file_id,user_id\n")
        for slot, (_, user, item) in enumerate(rows, start=1):
            fid = item_ids.setdefault(item, len(item_ids))
            uid = user_ids.setdefault(user, len(user_ids))
            out.write(f"{slot},{fid},{uid}\n")
    return len(rows)


def parse_trace(text: str, n_files: int, horizon: int, n_users: int = 0) -> TraceSpec:
    """Parse the CLI trace grammar: zipf:<alpha> | uniform_lb | csv:<path>."""
    text = text.strip()
    if text.startswith("zipf:"):
        return TraceSpec("zipf", n_files, horizon, alpha=float(text[5:]), n_users=n_users)
    if text == "uniform_lb":
        return TraceSpec("uniform_lb", n_files, horizon, n_users=n_users)
    if text.startswith("csv:"):
        return TraceSpec("csv", n_files, horizon, path=text[4:])
    raise ValueError(f"cannot parse trace spec {text!r}")
