"""Bucketed breadth-first exploration walk, one vertex marked per step.

The chain tracks, per positive type, how many vertices are unrevealed
and how many are revealed but unmarked (active). The number of new
neighbours of each type revealed by a step is binomial over the
unrevealed bucket, so one step costs O(#positive types): no edge list
is ever materialized, which is what makes n = 10^6 walks cheap.

Conventions, fixed here because integer identities in the tests depend
on them:

* ``unrevealed`` and ``active`` never contain the currently marked
  vertex; it leaves its pool the moment it is drawn. Hence at every
  step ``unrevealed_total + active_total + step == n``.
* ``fresh`` is True when the marked vertex started a new component,
  i.e. it was drawn size-biased from the unrevealed pool because no
  active vertex existed.
* The walk value z starts at 0 and changes by (newly revealed - 1) per
  step. Component k closes at the first step index where z == -k, so
  component sizes are gaps between those hitting times.
* Type-0 vertices carry no edges and are never selectable; they are
  appended to the census as singletons once the walk has exhausted all
  positive-type vertices.

Edge probabilities are clamped to [0, 1]; a clamp can only fire when
some realized type exceeds the n^(1/3) scale, and every clamp is
counted and reported rather than treated as fatal.

This is the readable reference engine. `fastwalk` holds a compiled
twin that consumes the identical random stream; traces from the two
must match exactly, and the test suite enforces that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dist import TypeCounts
from .rng import Stream


class WalkError(RuntimeError):
    """Exploration cannot start or an internal invariant broke."""


def edge_probability(x: int, y: int, eps: float, n: int) -> tuple[float, bool]:
    """Clamped pair probability x*y*(1+eps)/n and whether clamping fired.

    The expression order matters: the compiled engine evaluates the
    same formula and the results must agree bit for bit.
    """
    raw = float(x * y) * (1.0 + eps) / float(n)
    if raw > 1.0:
        return 1.0, True
    if raw < 0.0:
        return 0.0, True
    return raw, False


@dataclass
class WalkState:
    """Chain state while one exploration is running.

    ``support`` lists the positive types in ascending order;
    ``unrevealed`` and ``active`` are aligned with it.
    """

    support: np.ndarray
    unrevealed: np.ndarray
    active: np.ndarray
    step: int
    marked_type: int
    fresh: bool
    z: int
    eps: float
    n: int
    zero_types: int
    clamp_events: int = 0
    stopped: bool = False

    @property
    def active_total(self) -> int:
        return int(self.active.sum())

    @property
    def unrevealed_total(self) -> int:
        return int(self.unrevealed.sum())

    @property
    def size_bias_weight(self) -> int:
        """Sum of x * U^x over unrevealed vertices (marked one excluded)."""
        return int((self.support * self.unrevealed).sum())

    def unrevealed_by_type(self) -> dict[int, int]:
        return {int(x): int(u) for x, u in zip(self.support, self.unrevealed)}

    def active_by_type(self) -> dict[int, int]:
        return {int(x): int(c) for x, c in zip(self.support, self.active)}

    def check_conservation(self):
        if self.unrevealed_total + self.active_total + self.step != self.n - self.zero_types:
            raise WalkError("conservation identity violated")
        if (self.unrevealed < 0).any() or (self.active < 0).any():
            raise WalkError("negative bucket count")


@dataclass
class StepRecord:
    """Per-step output of one transition."""

    step: int
    marked_type: int
    fresh: bool
    active_count: int  # revealed-unmarked count including the marked vertex if it was active
    size_bias_weight: int  # sum over x of x * U^x with the marked vertex restored to its pool
    cond_mean: float
    cond_var: float
    revealed: int
    clamped: int


@dataclass
class WalkTrace:
    """Arrays over the steps of one exploration.

    ``z`` has one more entry than the per-step arrays: z[0] is the
    initial value 0 and z[i] the value after step i. ``active_counts``
    follows the convention of StepRecord.active_count; the compiled
    engine leaves it None and it is reconstructed only where needed.
    """

    n: int
    eps: float
    z: np.ndarray
    marked_types: np.ndarray
    fresh: np.ndarray
    cond_mean: np.ndarray
    cond_var: np.ndarray
    size_bias_weights: np.ndarray
    steps: int
    zero_types: int
    clamp_events: int
    stopped_early: bool
    active_counts: Optional[np.ndarray] = None

    def drift(self) -> np.ndarray:
        """Cumulative conditional means D(k) for k = 1..steps+1, D(1) = 0."""
        out = np.zeros(self.steps + 1, dtype=np.float64)
        np.cumsum(self.cond_mean, out=out[1:])
        return out

    def quadratic_variation(self) -> np.ndarray:
        """Cumulative conditional variances, same indexing as drift()."""
        out = np.zeros(self.steps + 1, dtype=np.float64)
        np.cumsum(self.cond_var, out=out[1:])
        return out

    def martingale(self) -> np.ndarray:
        """z minus its compensator, on the same 0..steps index grid."""
        return self.z.astype(np.float64) - self.drift()


@dataclass
class ComponentCensus:
    """Descending component sizes of one realization."""

    sizes: np.ndarray
    n: int
    zero_type_singletons: int
    complete: bool

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        if len(self.sizes) > 1 and (np.diff(self.sizes) > 0).any():
            raise WalkError("census sizes must be descending")
        if len(self.sizes) and self.sizes[-1] < 1:
            raise WalkError("census sizes must be at least 1")
        if self.complete and int(self.sizes.sum()) != self.n:
            raise WalkError("complete census does not sum to n")

    def top_k(self, k: int) -> np.ndarray:
        out = np.zeros(k, dtype=np.int64)
        m = min(k, len(self.sizes))
        out[:m] = self.sizes[:m]
        return out


def _positive_arrays(counts: TypeCounts) -> tuple[np.ndarray, np.ndarray]:
    items = counts.positive_items()
    support = np.array([x for x, _ in items], dtype=np.int64)
    u = np.array([c for _, c in items], dtype=np.int64)
    return support, u


def init_walk(counts: TypeCounts, a: float, rng: Stream) -> WalkState:
    """Start a walk: size-biased root among the unrevealed vertices."""
    support, u = _positive_arrays(counts)
    if len(support) == 0 or int((support * u).sum()) == 0:
        raise WalkError("no explorable vertices")
    n = counts.n
    eps = a / float(np.cbrt(n))
    weights = (support * u).astype(np.float64)
    j = rng.pick(weights)
    u[j] -= 1
    return WalkState(
        support=support,
        unrevealed=u,
        active=np.zeros_like(u),
        step=1,
        marked_type=int(support[j]),
        fresh=True,
        z=0,
        eps=eps,
        n=n,
        zero_types=counts.zero_count,
    )


def step_walk(state: WalkState, rng: Stream) -> StepRecord:
    """Reveal neighbours of the marked vertex, then mark the next one.

    Mutates the state in place and returns the step record. Raises
    WalkError on an internal invariant breach (negative bucket).
    """
    if state.stopped:
        raise WalkError("walk already stopped")
    support = state.support
    u = state.unrevealed
    act = state.active
    xval = state.marked_type
    fresh = state.fresh
    i = state.step

    active_count = int(act.sum()) + (0 if fresh else 1)
    sbw = int((support * u).sum()) + (xval if fresh else 0)

    cond_mean = -1.0
    cond_var = 0.0
    revealed = 0
    clamped = 0
    for j in range(len(support)):
        p, was_clamped = edge_probability(xval, int(support[j]), state.eps, state.n)
        if was_clamped:
            clamped += 1
        pool = int(u[j])
        if pool > 0 and p > 0.0:
            nj = rng.binomial(pool, p)
        else:
            nj = 0
        u[j] -= nj
        act[j] += nj
        revealed += nj
        cond_mean += pool * p
        cond_var += pool * p * (1.0 - p)
    if (u < 0).any():
        raise WalkError("negative bucket count")
    state.clamp_events += clamped
    state.z += revealed - 1
    state.step = i + 1

    record = StepRecord(
        step=i,
        marked_type=xval,
        fresh=fresh,
        active_count=active_count,
        size_bias_weight=sbw,
        cond_mean=cond_mean,
        cond_var=cond_var,
        revealed=revealed,
        clamped=clamped,
    )

    act_total = int(act.sum())
    if act_total > 0:
        j = rng.pick(act.astype(np.float64))
        act[j] -= 1
        state.marked_type = int(support[j])
        state.fresh = False
    else:
        weights = (support * u).astype(np.float64)
        total = int((support * u).sum())
        if total == 0:
            state.stopped = True
        else:
            j = rng.pick(weights)
            u[j] -= 1
            state.marked_type = int(support[j])
            state.fresh = True
    return record


def run_walk(
    counts: TypeCounts,
    a: float,
    rng: Stream,
    horizon_steps: Optional[int] = None,
    check_invariants: bool = False,
) -> WalkTrace:
    """Run until every positive-type vertex is marked or the horizon hits.

    The default horizon is full exhaustion, which census extraction
    needs; path experiments pass an explicit s0 * n^(2/3) horizon.
    """
    if horizon_steps is not None and horizon_steps < 1:
        raise WalkError("horizon_steps must be at least 1")
    state = init_walk(counts, a, rng)
    horizon = horizon_steps if horizon_steps is not None else counts.n

    z = [0]
    marked, fresh_flags, means, variances, sbw, act_counts = [], [], [], [], [], []
    steps = 0
    while not state.stopped and steps < horizon:
        if check_invariants:
            state.check_conservation()
        rec = step_walk(state, rng)
        z.append(state.z)
        marked.append(rec.marked_type)
        fresh_flags.append(rec.fresh)
        means.append(rec.cond_mean)
        variances.append(rec.cond_var)
        sbw.append(rec.size_bias_weight)
        act_counts.append(rec.active_count)
        steps += 1

    return WalkTrace(
        n=counts.n,
        eps=state.eps,
        z=np.array(z, dtype=np.int64),
        marked_types=np.array(marked, dtype=np.int64),
        fresh=np.array(fresh_flags, dtype=np.bool_),
        cond_mean=np.array(means, dtype=np.float64),
        cond_var=np.array(variances, dtype=np.float64),
        size_bias_weights=np.array(sbw, dtype=np.int64),
        steps=steps,
        zero_types=state.zero_types,
        clamp_events=state.clamp_events,
        stopped_early=not state.stopped,
        active_counts=np.array(act_counts, dtype=np.int64),
    )


def hitting_times(z: np.ndarray) -> np.ndarray:
    """First indices where z reaches -1, -2, ... (0-based into z)."""
    taus = []
    target = -1
    for idx in range(len(z)):
        if z[idx] == target:
            taus.append(idx)
            target -= 1
    return np.array(taus, dtype=np.int64)


def census_from_trace(trace: WalkTrace, counts: Optional[TypeCounts] = None) -> ComponentCensus:
    """Component sizes as gaps between hitting times of z at -1, -2, ...

    A complete trace (walk exhausted every positive-type vertex) yields
    a complete census with one singleton appended per type-0 vertex.
    An incomplete trace lists only the fully closed components.
    """
    zero_types = counts.zero_count if counts is not None else trace.zero_types
    taus = hitting_times(trace.z)
    sizes = np.diff(np.concatenate(([0], taus))).astype(np.int64)
    complete = not trace.stopped_early
    if complete:
        sizes = np.concatenate((sizes, np.ones(zero_types, dtype=np.int64)))
    sizes = np.sort(sizes)[::-1].copy()
    return ComponentCensus(
        sizes=sizes,
        n=trace.n,
        zero_type_singletons=zero_types if complete else 0,
        complete=complete,
    )


def rescaled_path(trace: WalkTrace, n: Optional[int] = None, s0: Optional[float] = None):
    """Grid (s_j, Z_n(s_j)) with s_j = j n^(-2/3) and values n^(-1/3) z(j+1)."""
    if trace.steps < 1:
        raise WalkError("trace is empty")
    if n is None:
        n = trace.n
    last = len(trace.z) - 1
    if s0 is not None:
        last = min(last, int(s0 * n ** (2.0 / 3.0)))
    j = np.arange(last + 1)
    s = j * n ** (-2.0 / 3.0)
    values = trace.z[: last + 1] * n ** (-1.0 / 3.0)
    return s, values


@dataclass
class DriftQvCurves:
    """Rescaled compensator and cumulative-conditional-variance curves.

    In the critical window the drift curve approaches a*s - (beta/2) s^2.
    The variance curve approaches E X * E X^3 * s when the positive part
    of the type law is a single atom (true for the standard test laws);
    with several positive atoms the state-conditional variance used here
    drains the marked-type fluctuation out of the curve and the slope is
    E X^2 instead.
    """

    s: np.ndarray
    drift: np.ndarray
    qv: np.ndarray


def drift_qv_curves(trace: WalkTrace, n: Optional[int] = None) -> DriftQvCurves:
    if n is None:
        n = trace.n
    s = np.arange(trace.steps + 1) * n ** (-2.0 / 3.0)
    drift = trace.drift() * n ** (-1.0 / 3.0)
    qv = trace.quadratic_variation() * n ** (-2.0 / 3.0)
    return DriftQvCurves(s=s, drift=drift, qv=qv)


def verify_trace_identities(trace: WalkTrace) -> None:
    """Exact structural identities of a recorded trace.

    Checks that z moves by at least -1 per step, that within every
    component the walk value equals the active count minus one (shifted
    by the number of already-closed components), and that hitting times
    are strictly increasing with z exactly -k at the k-th.
    """
    z = trace.z
    if z[0] != 0:
        raise WalkError("z(1) must be 0")
    if (np.diff(z) < -1).any():
        raise WalkError("z dropped by more than 1 in a step")
    if trace.active_counts is not None:
        completed = np.cumsum(trace.fresh.astype(np.int64)) - 1
        lhs = z[: trace.steps]
        rhs = trace.active_counts - (~trace.fresh).astype(np.int64) - completed
        if (lhs != rhs).any():
            raise WalkError("walk/active-count identity violated")
    taus = hitting_times(z)
    if (np.diff(taus) <= 0).any():
        raise WalkError("hitting times not strictly increasing")
    for k, tau in enumerate(taus, start=1):
        if z[tau] != -k:
            raise WalkError("z at k-th hitting time is not -k")
