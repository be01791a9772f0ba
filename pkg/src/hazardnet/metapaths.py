"""Meta-path expressions, count-matrix products, and per-pair time series.

A meta-path is a typed walk over the schema graph, written as whitespace
separated steps: ``name>`` follows the link type forward, ``<name``
backward.  Its count matrix at a timestamp is the ordered product of the
per-step adjacency matrices; a prefix cache shares products between paths
with common leading steps, and even-length palindromic paths are folded to
``X @ X.T`` of their half product.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import (
    GraphError,
    Schema,
    SparseCountMatrix,
    TemporalGraph,
    spmm,
    time_aware_adjacency,
    transpose,
)

__all__ = [
    "MetaPath",
    "MetaPathError",
    "SnapshotPlan",
    "PairSeries",
    "parse_metapath",
    "metapath_matrix",
    "dynamic_series",
    "read_metapath_file",
]

FORWARD = "forward"
BACKWARD = "backward"


class MetaPathError(ValueError):
    """Syntax or schema type error in a meta-path expression."""


@dataclass(frozen=True)
class MetaPath:
    """A type-checked sequence of (link type, direction) steps."""

    steps: tuple[tuple[str, str], ...]
    source: str
    target: str
    expr: str

    def __len__(self):
        return len(self.steps)

    def __str__(self):
        return self.expr

    @property
    def is_palindrome(self) -> bool:
        """True when the reversed, direction-flipped step list equals the original."""
        n = len(self.steps)
        if n % 2 != 0:
            return False
        flipped = tuple(
            (name, FORWARD if d == BACKWARD else BACKWARD)
            for name, d in reversed(self.steps)
        )
        return flipped == self.steps


def _step_endpoints(schema: Schema, name: str, direction: str) -> tuple[str, str]:
    lt = schema.link_type(name)
    return (lt.src, lt.dst) if direction == FORWARD else (lt.dst, lt.src)


def _format_steps(steps) -> str:
    return " ".join(f"{n}>" if d == FORWARD else f"<{n}" for n, d in steps)


def parse_metapath(expr: str, schema: Schema) -> MetaPath:
    """Parse and type-check a meta-path expression against the schema."""
    tokens = expr.split()
    if not tokens:
        raise MetaPathError("empty meta-path expression")
    steps = []
    for tok in tokens:
        if tok.endswith(">") and not tok.startswith("<") and len(tok) > 1:
            steps.append((tok[:-1], FORWARD))
        elif tok.startswith("<") and not tok.endswith(">") and len(tok) > 1:
            steps.append((tok[1:], BACKWARD))
        else:
            raise MetaPathError(
                f"bad step {tok!r}: expected 'name>' (forward) or '<name' (backward)"
            )
    try:
        source, cursor = _step_endpoints(schema, steps[0][0], steps[0][1])
    except GraphError as exc:
        raise MetaPathError(str(exc)) from exc
    for name, direction in steps[1:]:
        try:
            start, end = _step_endpoints(schema, name, direction)
        except GraphError as exc:
            raise MetaPathError(str(exc)) from exc
        if start != cursor:
            raise MetaPathError(
                f"type mismatch at step {name!r}: path is at {cursor!r} "
                f"but the step starts at {start!r}"
            )
        cursor = end
    return MetaPath(tuple(steps), source, cursor, _format_steps(steps))


class PrefixCache:
    """Memo of step-prefix products keyed by (steps, tau).

    Entries are immutable once stored; computing a key twice yields the
    shared object, so concurrent readers are safe.
    """

    def __init__(self):
        self._store: dict[tuple, SparseCountMatrix] = {}

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value: SparseCountMatrix):
        return self._store.setdefault(key, value)

    def __len__(self):
        return len(self._store)


def _step_matrix(graph: TemporalGraph, step, tau, binarize) -> SparseCountMatrix:
    name, direction = step
    m = time_aware_adjacency(graph, name, tau, binarize=binarize)
    return m if direction == FORWARD else transpose(m)


def _product_of(graph, steps, tau, cache: PrefixCache | None, binarize) -> SparseCountMatrix:
    acc = None
    for i, step in enumerate(steps):
        key = (steps[: i + 1], tau, binarize)
        if cache is not None:
            hit = cache.get(key)
            if hit is not None:
                acc = hit
                continue
        m = _step_matrix(graph, step, tau, binarize)
        acc = m if acc is None else spmm(acc, m)
        if cache is not None:
            acc = cache.put(key, acc)
    return acc


def metapath_matrix(graph: TemporalGraph, path: MetaPath, tau: float,
                    cache: PrefixCache | None = None,
                    binarize: bool = False) -> SparseCountMatrix:
    """Path-instance count matrix of ``path`` at timestamp ``tau``.

    Palindromic paths are computed as X @ X.T from their half product;
    prefix products are shared through ``cache`` when one is given.
    """
    full_key = (("__path__",) + path.steps, tau, binarize)
    if cache is not None:
        hit = cache.get(full_key)
        if hit is not None:
            return hit
    if path.is_palindrome and len(path.steps) >= 2:
        half_steps = path.steps[: len(path.steps) // 2]
        x = _product_of(graph, half_steps, tau, cache, binarize)
        result = spmm(x, transpose(x))
    else:
        result = _product_of(graph, path.steps, tau, cache, binarize)
    if cache is not None:
        result = cache.put(full_key, result)
    return result


@dataclass(frozen=True)
class SnapshotPlan:
    """Snapshot grid covering the feature extraction window."""

    t0: float
    delta: float
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("snapshot count k must be >= 1")
        if not self.delta > 0:
            raise ValueError("snapshot spacing delta must be positive")

    @property
    def phi(self) -> float:
        return self.k * self.delta

    def boundaries(self) -> np.ndarray:
        """The k+1 evaluation timestamps t0, t0+delta, ..., t0+k*delta."""
        return self.t0 + self.delta * np.arange(self.k + 1)


@dataclass
class PairSeries:
    """Per-snapshot count increments for one node pair.

    ``series`` is k x d: row i holds, for each path, the change in the
    path-instance count over the i-th snapshot interval.  ``base`` holds
    the counts at the window start, so column sums plus ``base`` recover
    the counts at the window end.
    """

    pair: tuple[int, int]
    series: np.ndarray
    base: np.ndarray

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.int64)
        self.base = np.asarray(self.base, dtype=np.int64)
        if self.series.ndim != 2:
            raise ValueError("series must be a k x d matrix")
        if self.base.shape != (self.series.shape[1],):
            raise ValueError("base length must equal the number of paths")


def dynamic_series(graph: TemporalGraph, paths: list[MetaPath], plan: SnapshotPlan,
                   pairs: list[tuple[int, int]],
                   cache: PrefixCache | None = None,
                   binarize: bool = False,
                   threads: int = 1) -> list[PairSeries]:
    """Per-pair snapshot-difference series over the given meta-paths.

    Entry (i, j) of each series is the count of path j instances at
    ``t0 + (i+1)*delta`` minus the count at ``t0 + i*delta``.  With
    ``threads`` > 1 the paths are evaluated concurrently; results are
    identical to the sequential order.
    """
    if not paths:
        raise MetaPathError("at least one meta-path is required")
    src_types = {p.source for p in paths}
    dst_types = {p.target for p in paths}
    if len(src_types) != 1 or len(dst_types) != 1:
        raise MetaPathError("all feature meta-paths must share endpoint node types")
    if cache is None:
        cache = PrefixCache()
    taus = plan.boundaries()
    rows = np.asarray([p[0] for p in pairs], dtype=np.int64)
    cols = np.asarray([p[1] for p in pairs], dtype=np.int64)

    def counts_for(path: MetaPath) -> np.ndarray:
        # (k+1) x n_pairs raw counts at each boundary timestamp
        out = np.empty((plan.k + 1, len(pairs)), dtype=np.int64)
        for i, tau in enumerate(taus):
            m = metapath_matrix(graph, path, float(tau), cache=cache, binarize=binarize)
            out[i] = m.counts_at(rows, cols)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_path = list(pool.map(counts_for, paths))
    else:
        per_path = [counts_for(p) for p in paths]

    # stacked: (k+1) x n_pairs x d
    stacked = np.stack(per_path, axis=-1)
    diffs = np.diff(stacked, axis=0)
    return [
        PairSeries(pair=tuple(pairs[j]), series=diffs[:, j, :], base=stacked[0, j, :])
        for j in range(len(pairs))
    ]


def read_metapath_file(path) -> tuple[str | None, list[str]]:
    """Read a meta-path list file: one expression per line, ``#`` comments.

    A line ``target: <expr>`` names the target relation; returns
    (target expression or None, feature expressions).
    """
    target = None
    exprs = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("target:"):
                target = line[len("target:"):].strip()
            else:
                exprs.append(line)
    return target, exprs
