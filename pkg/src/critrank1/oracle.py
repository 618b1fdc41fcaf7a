"""Ground-truth machinery at small n.

Everything here works on explicitly materialized graphs or exhaustive
enumeration, so it is slow but beyond suspicion. The bucketed walk
engine is validated against these implementations: union-find censuses,
a vertex-level run of the same marking algorithm on a sampled graph,
and the exact census distribution summed over all edge subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence, Union

import numpy as np

from .walk import ComponentCensus, edge_probability

MAX_EXACT_N = 6


class OracleError(ValueError):
    pass


@dataclass
class ExplicitGraph:
    """Materialized graph; vertices are 1-based, edges unordered pairs."""

    n: int
    types: tuple[int, ...]
    edges: list[tuple[int, int]]

    def __post_init__(self):
        if len(self.types) != self.n:
            raise OracleError("types length must equal n")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise OracleError("self-loop")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise OracleError("vertex index out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise OracleError("duplicate edge")
            seen.add(key)


def sample_graph(types: Sequence[int], a: float, rng: np.random.Generator) -> ExplicitGraph:
    """Independent pair coin flips at the clamped rank-1 probabilities."""
    n = len(types)
    if n < 1:
        raise OracleError("need at least one vertex")
    eps = a / float(np.cbrt(n))
    t = np.asarray(types, dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    raw = (t[iu] * t[ju]) * (1.0 + eps) / float(n)
    p = np.clip(raw, 0.0, 1.0)
    mask = rng.random(len(p)) < p
    edges = [(int(i) + 1, int(j) + 1) for i, j in zip(iu[mask], ju[mask])]
    return ExplicitGraph(n=n, types=tuple(int(x) for x in types), edges=edges)


class _UnionFind:
    """Union by size with path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, u: int, v: int):
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        self.size[ru] += self.size[rv]


def components_union_find(graph: ExplicitGraph) -> ComponentCensus:
    """Exact component sizes, descending."""
    uf = _UnionFind(graph.n)
    for i, j in graph.edges:
        uf.union(i - 1, j - 1)
    sizes: dict[int, int] = {}
    for v in range(graph.n):
        r = uf.find(v)
        sizes[r] = sizes.get(r, 0) + 1
    ordered = np.sort(np.array(list(sizes.values()), dtype=np.int64))[::-1].copy()
    zero_singles = sum(1 for x in graph.types if x == 0)
    return ComponentCensus(sizes=ordered, n=graph.n, zero_type_singletons=zero_singles, complete=True)


def walk_on_graph(graph: ExplicitGraph, rng: np.random.Generator) -> ComponentCensus:
    """Vertex-level run of the exploration algorithm on a real graph.

    Roots are drawn size-biased by type among unrevealed vertices, the
    next mark is uniform among revealed-unmarked vertices, neighbours
    are read off the materialized adjacency. The resulting census must
    equal the union-find census as a multiset for every realization and
    seed; tests assert exactly that.
    """
    n = graph.n
    adj: list[list[int]] = [[] for _ in range(n + 1)]
    for i, j in graph.edges:
        adj[i].append(j)
        adj[j].append(i)

    unrevealed = set(range(1, n + 1))
    weights = {v: graph.types[v - 1] for v in unrevealed}
    sizes = []
    zero_singles = 0

    def draw_root() -> Optional[int]:
        candidates = [v for v in unrevealed if weights[v] > 0]
        if not candidates:
            return None
        w = np.array([weights[v] for v in candidates], dtype=np.float64)
        idx = rng.choice(len(candidates), p=w / w.sum())
        return candidates[int(idx)]

    while True:
        root = draw_root()
        if root is None:
            break
        unrevealed.discard(root)
        active: list[int] = []
        comp_size = 0
        v = root
        while True:
            comp_size += 1
            for u in adj[v]:
                if u in unrevealed:
                    unrevealed.discard(u)
                    active.append(u)
            if not active:
                break
            pick = int(rng.integers(len(active)))
            active[pick], active[-1] = active[-1], active[pick]
            v = active.pop()
        sizes.append(comp_size)

    zero_singles = len(unrevealed)
    sizes.extend([1] * zero_singles)
    ordered = np.sort(np.array(sizes, dtype=np.int64))[::-1].copy()
    return ComponentCensus(sizes=ordered, n=n, zero_type_singletons=zero_singles, complete=True)


def enumerate_small_exact(types: Sequence[int], a: float) -> dict[tuple[int, ...], Union[Fraction, float]]:
    """Exact census distribution by summing over all edge subsets.

    With a == 0 every pair probability is rational, the arithmetic runs
    in Fractions and the result is exact. Otherwise probabilities are
    floats and class weights are accumulated with math.fsum; the
    rounding error is far below anything the comparisons resolve.
    """
    n = len(types)
    if n > MAX_EXACT_N:
        raise OracleError(f"n={n} too large for exhaustive enumeration (max {MAX_EXACT_N})")
    pairs = list(combinations(range(n), 2))
    exact = a == 0
    if exact:
        probs = [min(Fraction(types[i] * types[j], n), Fraction(1)) for i, j in pairs]
    else:
        eps = a / float(np.cbrt(n))
        probs = [edge_probability(types[i], types[j], eps, n)[0] for i, j in pairs]

    acc: dict[tuple[int, ...], list] = {}
    for mask in range(1 << len(pairs)):
        uf = _UnionFind(n)
        weight = Fraction(1) if exact else 1.0
        for e, (i, j) in enumerate(pairs):
            if mask >> e & 1:
                weight *= probs[e]
                uf.union(i, j)
            else:
                weight *= 1 - probs[e]
        if weight == 0:
            continue
        sizes: dict[int, int] = {}
        for v in range(n):
            r = uf.find(v)
            sizes[r] = sizes.get(r, 0) + 1
        census = tuple(sorted(sizes.values(), reverse=True))
        acc.setdefault(census, []).append(weight)

    if exact:
        return {c: sum(ws, Fraction(0)) for c, ws in acc.items()}
    return {c: math.fsum(ws) for c, ws in acc.items()}


@dataclass
class RatioSpotCheck:
    """Monte Carlo comparison of the revealed-type share with its size-biased weight.

    lhs estimates E[N_x / sum(N) ; sum(N) > 0] for the per-type binomial
    reveals out of the given unrevealed pool; rhs is the size-biased
    weight of the type times P{sum(N) > 0}. Their ratio tends to 1.
    """

    lhs: float
    rhs: float
    ratio: float
    ci_low: float
    ci_high: float
    samples: int
    weight: float
    positive_rate: float


def poisson_ratio_spot_check(
    counts,
    marked_type: int,
    a: float,
    samples: int = 10**6,
    rng: Optional[np.random.Generator] = None,
) -> RatioSpotCheck:
    """Paired Monte Carlo estimate of the ratio, with a delta-method CI.

    ``counts`` is the unrevealed pool at the step (the marked vertex
    already removed); its n is used in the pair probabilities. Both
    sides are estimated from the same binomial draws, so the ratio CI
    is tight.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    items = sorted((int(x), int(c)) for x, c in counts.counts.items() if x > 0 and c > 0)
    if not items:
        raise OracleError("pool has no positive types")
    if marked_type <= 0:
        raise OracleError("marked type must be positive")
    n = counts.n
    eps = a / float(np.cbrt(n))
    support = np.array([x for x, _ in items], dtype=np.int64)
    pools = np.array([c for _, c in items], dtype=np.int64)
    pvec = np.array([edge_probability(marked_type, int(x), eps, n)[0] for x in support])

    total_weight = float((support * pools).sum())
    if marked_type not in set(support.tolist()):
        raise OracleError("marked type not present in the pool")
    x_idx = int(np.flatnonzero(support == marked_type)[0])
    weight = float(support[x_idx] * pools[x_idx]) / total_weight

    draws = rng.binomial(pools[None, :].repeat(samples, axis=0), pvec[None, :])
    totals = draws.sum(axis=1)
    positive = totals > 0
    share = np.zeros(samples, dtype=np.float64)
    share[positive] = draws[positive, x_idx] / totals[positive]

    mean_share = float(share.mean())
    pos_rate = float(positive.mean())
    lhs = mean_share
    rhs = weight * pos_rate
    if rhs == 0.0:
        raise OracleError("degenerate pool: reveals are impossible")
    ratio = lhs / rhs

    # delta method for mean(A)/(w * mean(B)) with paired samples
    cov = np.cov(share, positive.astype(np.float64), ddof=1)
    ga = 1.0 / (weight * pos_rate)
    gb = -mean_share / (weight * pos_rate * pos_rate)
    var = (ga * ga * cov[0, 0] + 2 * ga * gb * cov[0, 1] + gb * gb * cov[1, 1]) / samples
    half = 1.96 * math.sqrt(max(var, 0.0))
    return RatioSpotCheck(
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        ci_low=ratio - half,
        ci_high=ratio + half,
        samples=samples,
        weight=weight,
        positive_rate=pos_rate,
    )


def dump_graph(graph: ExplicitGraph) -> str:
    """Test fixture format: n, the n types, then one edge per line."""
    lines = [str(graph.n), " ".join(str(x) for x in graph.types)]
    lines.extend(f"{i} {j}" for i, j in graph.edges)
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> ExplicitGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n = int(lines[0])
    types = tuple(int(x) for x in lines[1].split())
    edges = []
    for ln in lines[2:]:
        i, j = ln.split()
        edges.append((int(i), int(j)))
    return ExplicitGraph(n=n, types=types, edges=edges)
