"""Marked Poisson configurations on the 1-D torus and the hard connection kernel.

A configuration is a set of points (x, u) where x lives on the torus of
circumference ``torus_length`` (canonical coordinates ``[-n/2, n/2)``) and the
mark u lies in (0, 1].  Two points connect exactly when

    dist(x, y) * u_min**gamma * u_max**(1 - gamma) <= beta,

with ``dist`` the toroidal metric and ``u_min <= u_max`` the ordered marks.
Lower marks act as "older" nodes and collect heavy-tailed neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

__all__ = [
    "ParameterError",
    "ModelParams",
    "MarkedPoint",
    "PointConfig",
    "derive_seed",
    "sample_config",
    "torus_dist",
    "wrap_position",
    "connects",
    "up_neighbors",
    "down_neighbors",
    "add_point",
    "config_to_csv",
    "config_from_csv",
]

# Decimal formatting used for every real number we persist (17 significant
# digits round-trips any float64).
REAL_FORMAT = "%.17g"


class ParameterError(ValueError):
    """Model or experiment parameters outside their admissible range."""


@dataclass(frozen=True)
class ModelParams:
    """Full model specification: weight exponent, range, torus circumference.

    The connection profile is the hard indicator and the ambient dimension is
    fixed to one; neither is configurable.
    """

    gamma: float
    beta: float
    torus_length: float

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ParameterError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.beta > 0.0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not self.torus_length > 0.0:
            raise ParameterError(
                f"torus_length must be positive, got {self.torus_length}"
            )


@dataclass(frozen=True)
class MarkedPoint:
    """A single point: torus position x and mark u in (0, 1]."""

    x: float
    u: float

    def __post_init__(self) -> None:
        if not (0.0 < self.u <= 1.0):
            raise ParameterError(f"mark must lie in (0, 1], got {self.u}")


def wrap_position(x: float, torus_length: float) -> float:
    """Reduce a position to the canonical range [-n/2, n/2).

    Already-canonical values pass through bit-identically; the modular
    reduction would otherwise perturb them in the last float digits.
    """
    half = 0.5 * torus_length
    if -half <= x < half:
        return float(x)
    return (x + half) % torus_length - half


def torus_dist(x, y, torus_length: float):
    """Toroidal distance min_k |x - y + k*n|; accepts scalars or arrays."""
    n = torus_length
    if n <= 0.0:
        raise ParameterError(f"torus_length must be positive, got {n}")
    d = np.abs(np.asarray(x) - np.asarray(y)) % n
    out = np.minimum(d, n - d)
    return float(out) if out.ndim == 0 else out


def derive_seed(master_seed: int, *path: int) -> int:
    """Derive a child seed from a master seed and an integer derivation path.

    Children are independent streams for distinct paths, and the derivation is
    order-insensitive with respect to scheduling: replicate i always receives
    the same seed no matter which worker draws it.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based, so per-seed streams never overlap.
    return np.random.Generator(np.random.Philox(key=int(seed)))


class PointConfig:
    """An immutable sampled configuration, sorted by position.

    Points are indexed by their rank in the position-sorted order.  Marks are
    pairwise distinct for sampled configurations; residual ties introduced by
    hand-built inputs are broken by point index so that every pair has a total
    mark order.
    """

    __slots__ = ("params", "seed", "_xs", "_us", "_mark_order", "_min_mark")

    def __init__(self, params: ModelParams, xs: np.ndarray, us: np.ndarray, seed: int):
        xs = np.asarray(xs, dtype=np.float64)
        us = np.asarray(us, dtype=np.float64)
        if xs.shape != us.shape or xs.ndim != 1:
            raise ParameterError("positions and marks must be 1-D arrays of equal length")
        if xs.size and (np.any(us <= 0.0) or np.any(us > 1.0)):
            raise ParameterError("marks must lie in (0, 1]")
        half = 0.5 * params.torus_length
        if xs.size and (np.any(xs < -half) or np.any(xs >= half)):
            raise ParameterError("positions must be canonical, in [-n/2, n/2)")
        if xs.size and np.any(np.diff(xs) < 0.0):
            raise ParameterError("positions must be sorted ascending")
        self.params = params
        self.seed = int(seed)
        self._xs = xs
        self._us = us
        # Total order on marks with index tie-break.
        self._mark_order = np.lexsort((np.arange(xs.size), us))
        self._min_mark = float(us.min()) if us.size else 1.0
        self._xs.setflags(write=False)
        self._us.setflags(write=False)
        self._mark_order.setflags(write=False)

    # -- basic accessors -------------------------------------------------

    @property
    def positions(self) -> np.ndarray:
        return self._xs

    @property
    def marks(self) -> np.ndarray:
        return self._us

    @property
    def mark_order(self) -> np.ndarray:
        """Permutation listing point indices by increasing mark."""
        return self._mark_order

    def __len__(self) -> int:
        return int(self._xs.size)

    def point(self, index: int) -> MarkedPoint:
        return MarkedPoint(float(self._xs[index]), float(self._us[index]))

    def points(self) -> Iterator[MarkedPoint]:
        for i in range(len(self)):
            yield self.point(i)

    def index_of(self, p: MarkedPoint) -> int:
        """Index of an exactly matching point, or -1 if absent."""
        lo = int(np.searchsorted(self._xs, p.x, side="left"))
        hi = int(np.searchsorted(self._xs, p.x, side="right"))
        for i in range(lo, hi):
            if self._us[i] == p.u:
                return i
        return -1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointConfig):
            return NotImplemented
        return (
            self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self._xs, other._xs)
            and np.array_equal(self._us, other._us)
        )

    def __repr__(self) -> str:
        return (
            f"PointConfig(n={self.params.torus_length}, points={len(self)}, "
            f"seed={self.seed})"
        )


def sample_config(params: ModelParams, seed: int) -> PointConfig:
    """Sample a unit-intensity Poisson configuration on the marked torus.

    The point count is Poisson(torus_length), positions are uniform in the
    canonical range, marks are uniform in (0, 1].  All randomness flows from
    the single 64-bit seed through a counter-based generator, so equal
    (params, seed) reproduce the configuration bit for bit.
    """
    rng = _rng(seed)
    n = params.torus_length
    count = int(rng.poisson(n))
    xs = rng.uniform(-0.5 * n, 0.5 * n, size=count)
    us = 1.0 - rng.random(count)  # (0, 1]
    # Exact mark ties have probability zero but would break the direction of
    # an edge; redraw duplicates until all marks are distinct.
    while count > 1:
        _, first = np.unique(us, return_index=True)
        if first.size == count:
            break
        dup = np.setdiff1d(np.arange(count), first)
        us[dup] = 1.0 - rng.random(dup.size)
    order = np.argsort(xs, kind="stable")
    return PointConfig(params, xs[order], us[order], seed)


def connects(p: MarkedPoint, q: MarkedPoint, params: ModelParams) -> bool:
    """Hard-kernel adjacency: dist * u_min^gamma * u_max^(1-gamma) <= beta."""
    d = torus_dist(p.x, q.x, params.torus_length)
    u_min, u_max = (p.u, q.u) if p.u <= q.u else (q.u, p.u)
    return bool(d * u_min**params.gamma * u_max ** (1.0 - params.gamma) <= params.beta)


def _window_candidates(config: PointConfig, center: float, radius: float) -> np.ndarray:
    """Indices of points within toroidal distance <= radius of center."""
    xs = config.positions
    n = config.params.torus_length
    if xs.size == 0:
        return np.empty(0, dtype=np.int64)
    if 2.0 * radius >= n:
        return np.arange(xs.size, dtype=np.int64)
    lo, hi = center - radius, center + radius
    half = 0.5 * n
    pieces = []
    if lo < -half:
        pieces.append((lo + n, half))
        lo = -half
    if hi >= half:
        pieces.append((-half, hi - n))
        hi = half
    pieces.append((lo, hi))
    idx = []
    for a, b in pieces:
        i0 = int(np.searchsorted(xs, a, side="left"))
        i1 = int(np.searchsorted(xs, b, side="right"))
        if i1 > i0:
            idx.append(np.arange(i0, i1, dtype=np.int64))
    if not idx:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(idx))


def _kernel_ok(dist: np.ndarray, lo_marks: np.ndarray, hi_marks: np.ndarray, params: ModelParams) -> np.ndarray:
    return dist * lo_marks**params.gamma * hi_marks ** (1.0 - params.gamma) <= params.beta


def up_neighbors(config: PointConfig, p: MarkedPoint) -> np.ndarray:
    """Indices of configuration points with higher mark connecting to p.

    p may be external to the configuration (Palm usage).  The search queries
    the position-sorted array with the maximal admissible radius beta/u and
    filters by the exact kernel; ties in mark defer to the point index, with
    external query points ranked below every member of equal mark.
    """
    params = config.params
    x = wrap_position(p.x, params.torus_length)
    radius = min(params.beta / p.u, 0.5 * params.torus_length)
    cand = _window_candidates(config, x, radius)
    if cand.size == 0:
        return cand
    us = config.marks[cand]
    p_idx = config.index_of(MarkedPoint(x, p.u))
    if p_idx >= 0:
        higher = (us > p.u) | ((us == p.u) & (cand > p_idx))
    else:
        # External query points rank below members of equal mark.
        higher = us >= p.u
    cand = cand[higher]
    if cand.size == 0:
        return cand
    d = torus_dist(config.positions[cand], x, params.torus_length)
    ok = _kernel_ok(d, np.full(cand.size, p.u), config.marks[cand], params)
    return cand[ok]


def down_neighbors(config: PointConfig, p: MarkedPoint) -> np.ndarray:
    """Indices of configuration points with lower mark that p connects to."""
    params = config.params
    if len(config) == 0:
        return np.empty(0, dtype=np.int64)
    x = wrap_position(p.x, params.torus_length)
    # Radius bound from the smallest mark present in the configuration.
    radius = min(
        params.beta * config._min_mark ** (-params.gamma) * p.u ** (params.gamma - 1.0),
        0.5 * params.torus_length,
    )
    cand = _window_candidates(config, x, radius)
    if cand.size == 0:
        return cand
    us = config.marks[cand]
    p_idx = config.index_of(MarkedPoint(x, p.u))
    if p_idx >= 0:
        lower = (us < p.u) | ((us == p.u) & (cand < p_idx))
    else:
        lower = us < p.u
    cand = cand[lower]
    if cand.size == 0:
        return cand
    d = torus_dist(config.positions[cand], x, params.torus_length)
    ok = _kernel_ok(d, config.marks[cand], np.full(cand.size, p.u), params)
    return cand[ok]


def add_point(config: PointConfig, p: MarkedPoint) -> PointConfig:
    """Return a new configuration with p inserted; the original is unchanged."""
    params = config.params
    x = wrap_position(p.x, params.torus_length)
    if config.index_of(MarkedPoint(x, p.u)) >= 0:
        raise ParameterError(f"duplicate point ({x}, {p.u}); marks must be distinct")
    pos = int(np.searchsorted(config.positions, x, side="right"))
    xs = np.insert(config.positions, pos, x)
    us = np.insert(config.marks, pos, p.u)
    return PointConfig(params, xs, us, config.seed)


def neighborhood_adjacency(config: PointConfig) -> tuple[list[set[int]], list[set[int]]]:
    """Full up/down adjacency of the configuration graph.

    Returns (up_sets, down_sets): up_sets[i] holds the indices of neighbors of
    point i with higher mark, down_sets[i] those with lower mark.  Edges are
    found from their lower-mark endpoint via one vectorized window query per
    configuration, then filtered by the exact kernel.
    """
    params = config.params
    xs, us = config.positions, config.marks
    n = params.torus_length
    size = xs.size
    up_sets: list[set[int]] = [set() for _ in range(size)]
    down_sets: list[set[int]] = [set() for _ in range(size)]
    if size < 2:
        return up_sets, down_sets

    radius = np.minimum(params.beta / us, 0.5 * n)
    capped = 2.0 * radius >= n
    ext = np.concatenate([xs - n, xs, xs + n])
    lo = np.searchsorted(ext, xs - radius, side="left")
    hi = np.searchsorted(ext, xs + radius, side="right")
    # Capped windows cover the whole torus; enumerate those rows directly to
    # avoid double-counting wrapped copies.
    lo = np.where(capped, 0, lo)
    hi = np.where(capped, 0, hi)
    counts = hi - lo
    total = int(counts.sum())
    rows = np.repeat(np.arange(size), counts)
    starts = np.repeat(lo, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = (starts + offsets) % size
    for i in np.nonzero(capped)[0]:
        rows = np.concatenate([rows, np.full(size, i)])
        cols = np.concatenate([cols, np.arange(size)])

    keep = us[cols] > us[rows]
    tie = us[cols] == us[rows]
    if np.any(tie):
        keep |= tie & (cols > rows)
    rows, cols = rows[keep], cols[keep]
    d = torus_dist(xs[rows], xs[cols], n)
    ok = _kernel_ok(d, us[rows], us[cols], params)
    for i, j in zip(rows[ok].tolist(), cols[ok].tolist()):
        up_sets[i].add(j)
        down_sets[j].add(i)
    return up_sets, down_sets


# -- CSV round trip ------------------------------------------------------


def config_to_csv(config: PointConfig, stream: TextIO) -> None:
    """Write the configuration as ``x,u`` rows with 17 significant digits."""
    stream.write("x,u\n")
    for i in range(len(config)):
        stream.write(
            (REAL_FORMAT % config.positions[i]) + "," + (REAL_FORMAT % config.marks[i]) + "\n"
        )


def config_from_csv(stream: TextIO, params: ModelParams, seed: int = 0) -> PointConfig:
    """Read a configuration written by :func:`config_to_csv`.

    Comment lines starting with '#' (metadata preambles) are skipped.
    """
    header = ""
    while True:
        header = stream.readline()
        if not header:
            raise ParameterError("empty configuration stream")
        header = header.strip()
        if header and not header.startswith("#"):
            break
    if header != "x,u":
        raise ParameterError(f"expected header 'x,u', got {header!r}")
    xs: list[float] = []
    us: list[float] = []
    for line_no, line in enumerate(stream, start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParameterError(f"line {line_no}: expected two comma-separated fields")
        xs.append(float(parts[0]))
        us.append(float(parts[1]))
    xs_arr = np.asarray(xs, dtype=np.float64)
    us_arr = np.asarray(us, dtype=np.float64)
    order = np.argsort(xs_arr, kind="stable")
    return PointConfig(params, xs_arr[order], us_arr[order], seed)
