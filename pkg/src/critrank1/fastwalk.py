"""Compiled batch engine for the exploration walk.

numba twin of the pure-Python engine in `walk`. Both consume the same
xoshiro256++ stream (see `rng`) in the same order, so a walk run here
with some seed produces bit-identical output to the reference engine
with a Stream built from the same seed; tests enforce that equality.
Keep every formula and draw order in this file in lockstep with
`rng.Stream` and `walk.step_walk`.

Batch entry points take one 64-bit seed per replica, which keeps
replicas independent of how work is chunked across processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numba import njit

from .dist import TypeCounts, TypePmf
from .walk import ComponentCensus, WalkError, WalkTrace

_MEAN_LIMIT = 30.0  # matches rng._BINOMIAL_INVERSION_MEAN


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _init_state(seed):
    st = np.empty(4, dtype=np.uint64)
    s = np.uint64(seed)
    for i in range(4):
        s, z = _splitmix64(s)
        st[i] = z
    return st


@njit(cache=True, inline="always")
def _next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    x = s0 + s3
    result = ((x << np.uint64(23)) | (x >> np.uint64(41))) + s0
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return result


@njit(cache=True, inline="always")
def _uniform(st):
    return (_next_u64(st) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _binomial_inversion(st, n, q):
    u = _uniform(st)
    f = (1.0 - q) ** n
    cdf = f
    ratio = q / (1.0 - q)
    k = 0
    while u > cdf and k < n:
        k += 1
        f *= ratio * (n - k + 1) / k
        cdf += f
    return k


@njit(cache=True)
def _binomial(st, n, p):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    q = 1.0 - p if flip else p
    total = 0
    remaining = n
    while remaining > 0:
        if remaining * q <= _MEAN_LIMIT:
            chunk = remaining
        else:
            chunk = int(_MEAN_LIMIT / q)
        total += _binomial_inversion(st, chunk, q)
        remaining -= chunk
    return (n - total) if flip else total


@njit(cache=True)
def _pick(st, weights):
    total = 0.0
    for i in range(weights.shape[0]):
        total += weights[i]
    u = _uniform(st) * total
    acc = 0.0
    last = weights.shape[0] - 1
    for i in range(last):
        acc += weights[i]
        if u < acc:
            return i
    return last


@njit(cache=True)
def _multinomial(st, n, probs, out):
    k = probs.shape[0]
    for i in range(k):
        out[i] = 0
    remaining = n
    rest = 1.0
    for i in range(k - 1):
        if remaining == 0 or rest <= 0.0:
            break
        p = probs[i] / rest
        if p > 1.0:
            p = 1.0
        elif p < 0.0:
            p = 0.0
        c = _binomial(st, remaining, p)
        out[i] = c
        remaining -= c
        rest -= probs[i]
    out[k - 1] = remaining


@njit(cache=True)
def _stream_probe(seed, count):
    """Raw uint64 outputs, used to cross-check the Python stream."""
    st = _init_state(seed)
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = _next_u64(st)
    return out


@njit(cache=True)
def _trace_batch(
    support,
    base_counts,
    probs,
    resample,
    n,
    eps,
    horizon,
    seeds,
    z_out,
    m_out,
    v_out,
    x_out,
    fresh_out,
    sbw_out,
    steps_out,
    clamp_out,
    exhausted_out,
    zero_out,
):
    """Per-replica walk with full per-step recording.

    support/base_counts cover every atom of the type law (type 0
    included) so that the resampling multinomial consumes the stream
    exactly as Stream.multinomial does; type-0 buckets simply never
    produce reveals or selections because their weight is zero.
    """
    n_rep = seeds.shape[0]
    n_types = support.shape[0]
    u = np.empty(n_types, dtype=np.int64)
    act = np.empty(n_types, dtype=np.int64)
    weights = np.empty(n_types, dtype=np.float64)

    for r in range(n_rep):
        st = _init_state(seeds[r])
        if resample:
            _multinomial(st, n, probs, u)
        else:
            for j in range(n_types):
                u[j] = base_counts[j]
        zero_singles = 0
        for j in range(n_types):
            act[j] = 0
            if support[j] == 0:
                zero_singles += u[j]
                u[j] = 0  # inert; kept out of the walk buckets
        zero_out[r] = zero_singles

        total_w = 0.0
        for j in range(n_types):
            weights[j] = float(support[j] * u[j])
            total_w += weights[j]
        steps = 0
        clamps = 0
        exhausted = False
        z = 0
        z_out[r, 0] = 0
        if total_w > 0.0:
            jm = _pick(st, weights)
            u[jm] -= 1
            xval = support[jm]
            fresh = True
            while steps < horizon:
                sbw = 0
                for j in range(n_types):
                    sbw += support[j] * u[j]
                if fresh:
                    sbw += xval
                cond_mean = -1.0
                cond_var = 0.0
                revealed = 0
                for j in range(n_types):
                    raw = float(xval * support[j]) * (1.0 + eps) / float(n)
                    if raw > 1.0:
                        p = 1.0
                        clamps += 1
                    elif raw < 0.0:
                        p = 0.0
                        clamps += 1
                    else:
                        p = raw
                    pool = u[j]
                    if pool > 0 and p > 0.0:
                        nj = _binomial(st, pool, p)
                    else:
                        nj = 0
                    u[j] -= nj
                    act[j] += nj
                    revealed += nj
                    cond_mean += pool * p
                    cond_var += pool * p * (1.0 - p)
                z += revealed - 1
                z_out[r, steps + 1] = z
                m_out[r, steps] = cond_mean
                v_out[r, steps] = cond_var
                x_out[r, steps] = xval
                fresh_out[r, steps] = fresh
                sbw_out[r, steps] = sbw
                steps += 1

                act_total = 0
                for j in range(n_types):
                    act_total += act[j]
                if act_total > 0:
                    for j in range(n_types):
                        weights[j] = float(act[j])
                    jm = _pick(st, weights)
                    act[jm] -= 1
                    xval = support[jm]
                    fresh = False
                else:
                    total_w = 0.0
                    for j in range(n_types):
                        weights[j] = float(support[j] * u[j])
                        total_w += weights[j]
                    if total_w == 0.0:
                        exhausted = True
                        break
                    jm = _pick(st, weights)
                    u[jm] -= 1
                    xval = support[jm]
                    fresh = True
        else:
            exhausted = True

        steps_out[r] = steps
        clamp_out[r] = clamps
        exhausted_out[r] = exhausted


@njit(cache=True)
def _census_batch(
    support,
    base_counts,
    probs,
    resample,
    n,
    eps,
    seeds,
    topk_out,
    ncomp_out,
    zero_out,
    clamp_out,
    ok_out,
):
    """Full-exhaustion walks reduced to top-K component sizes.

    Stream consumption is identical to _trace_batch with horizon = n,
    only the recording differs: component sizes are read off as the
    walk closes them (the active set empties), so no per-step arrays
    are kept. Type-0 vertices enter as singletons.
    """
    n_rep = seeds.shape[0]
    n_types = support.shape[0]
    top_k = topk_out.shape[1]
    u = np.empty(n_types, dtype=np.int64)
    act = np.empty(n_types, dtype=np.int64)
    weights = np.empty(n_types, dtype=np.float64)

    for r in range(n_rep):
        st = _init_state(seeds[r])
        if resample:
            _multinomial(st, n, probs, u)
        else:
            for j in range(n_types):
                u[j] = base_counts[j]
        zero_singles = 0
        for j in range(n_types):
            act[j] = 0
            if support[j] == 0:
                zero_singles += u[j]
                u[j] = 0
        positive_total = 0
        for j in range(n_types):
            positive_total += u[j]

        for c in range(top_k):
            topk_out[r, c] = 0
        ncomp = 0
        clamps = 0
        sizes_sum = 0

        total_w = 0.0
        for j in range(n_types):
            weights[j] = float(support[j] * u[j])
            total_w += weights[j]
        if total_w > 0.0:
            jm = _pick(st, weights)
            u[jm] -= 1
            xval = support[jm]
            steps = 0
            comp_start = 1
            while True:
                revealed = 0
                for j in range(n_types):
                    raw = float(xval * support[j]) * (1.0 + eps) / float(n)
                    if raw > 1.0:
                        p = 1.0
                        clamps += 1
                    elif raw < 0.0:
                        p = 0.0
                        clamps += 1
                    else:
                        p = raw
                    pool = u[j]
                    if pool > 0 and p > 0.0:
                        nj = _binomial(st, pool, p)
                    else:
                        nj = 0
                    u[j] -= nj
                    act[j] += nj
                    revealed += nj
                steps += 1

                act_total = 0
                for j in range(n_types):
                    act_total += act[j]
                if act_total > 0:
                    for j in range(n_types):
                        weights[j] = float(act[j])
                    jm = _pick(st, weights)
                    act[jm] -= 1
                    xval = support[jm]
                else:
                    size = steps - comp_start + 1
                    sizes_sum += size
                    ncomp += 1
                    if size > topk_out[r, top_k - 1]:
                        pos = top_k - 1
                        while pos > 0 and topk_out[r, pos - 1] < size:
                            topk_out[r, pos] = topk_out[r, pos - 1]
                            pos -= 1
                        topk_out[r, pos] = size
                    comp_start = steps + 1
                    total_w = 0.0
                    for j in range(n_types):
                        weights[j] = float(support[j] * u[j])
                        total_w += weights[j]
                    if total_w == 0.0:
                        break
                    jm = _pick(st, weights)
                    u[jm] -= 1
                    xval = support[jm]

        # append type-0 singletons: they fill empty slots with 1s
        filled = ncomp if ncomp < top_k else top_k
        slot = filled
        remaining_singles = zero_singles
        while slot < top_k and remaining_singles > 0:
            topk_out[r, slot] = 1
            slot += 1
            remaining_singles -= 1

        ncomp_out[r] = ncomp + zero_singles
        zero_out[r] = zero_singles
        clamp_out[r] = clamps
        ok_out[r] = sizes_sum == positive_total


Source = Union[TypePmf, TypeCounts]


def _prepare(source: Source, n: Optional[int]):
    """Atom arrays plus resampling flag for the kernels."""
    if isinstance(source, TypePmf):
        if n is None:
            raise WalkError("n is required when sampling types from a pmf")
        support = np.array(source.support, dtype=np.int64)
        probs = source.probs_float()
        base = np.zeros_like(support)
        return support, base, probs, True, int(n)
    counts = source
    items = sorted((int(x), int(c)) for x, c in counts.counts.items())
    support = np.array([x for x, _ in items], dtype=np.int64)
    base = np.array([c for _, c in items], dtype=np.int64)
    probs = np.zeros(len(support), dtype=np.float64)
    return support, base, probs, False, counts.n


@dataclass
class TraceBatch:
    """Per-replica traces on a common horizon."""

    n: int
    eps: float
    horizon: int
    z: np.ndarray
    cond_mean: np.ndarray
    cond_var: np.ndarray
    marked_types: np.ndarray
    fresh: np.ndarray
    size_bias_weights: np.ndarray
    steps: np.ndarray
    clamp_events: np.ndarray
    exhausted: np.ndarray
    zero_singletons: np.ndarray

    @property
    def replicas(self) -> int:
        return len(self.steps)

    def trace(self, r: int) -> WalkTrace:
        k = int(self.steps[r])
        return WalkTrace(
            n=self.n,
            eps=self.eps,
            z=self.z[r, : k + 1].copy(),
            marked_types=self.marked_types[r, :k].astype(np.int64),
            fresh=self.fresh[r, :k].copy(),
            cond_mean=self.cond_mean[r, :k].copy(),
            cond_var=self.cond_var[r, :k].copy(),
            size_bias_weights=self.size_bias_weights[r, :k].copy(),
            steps=k,
            zero_types=int(self.zero_singletons[r]),
            clamp_events=int(self.clamp_events[r]),
            stopped_early=not bool(self.exhausted[r]),
        )


def trace_batch(source: Source, a: float, horizon: int, seeds, n: Optional[int] = None) -> TraceBatch:
    """Run one walk per seed, recording per-step arrays up to horizon."""
    support, base, probs, resample, n_eff = _prepare(source, n)
    seeds = np.asarray(seeds, dtype=np.uint64)
    n_rep = len(seeds)
    horizon = int(horizon)
    eps = a / float(np.cbrt(n_eff))
    z = np.zeros((n_rep, horizon + 1), dtype=np.int64)
    m = np.zeros((n_rep, horizon), dtype=np.float64)
    v = np.zeros((n_rep, horizon), dtype=np.float64)
    x = np.zeros((n_rep, horizon), dtype=np.int32)
    fresh = np.zeros((n_rep, horizon), dtype=np.bool_)
    sbw = np.zeros((n_rep, horizon), dtype=np.int64)
    steps = np.zeros(n_rep, dtype=np.int64)
    clamps = np.zeros(n_rep, dtype=np.int64)
    exhausted = np.zeros(n_rep, dtype=np.bool_)
    zeros = np.zeros(n_rep, dtype=np.int64)
    _trace_batch(
        support, base, probs, resample, n_eff, eps, horizon, seeds,
        z, m, v, x, fresh, sbw, steps, clamps, exhausted, zeros,
    )
    return TraceBatch(
        n=n_eff, eps=eps, horizon=horizon, z=z, cond_mean=m, cond_var=v,
        marked_types=x, fresh=fresh, size_bias_weights=sbw, steps=steps,
        clamp_events=clamps, exhausted=exhausted, zero_singletons=zeros,
    )


def run_walk_fast(
    source: Source,
    a: float,
    seed: int,
    horizon_steps: Optional[int] = None,
    n: Optional[int] = None,
) -> WalkTrace:
    """Single compiled walk; same contract as walk.run_walk.

    Raises WalkError when the population has no positive-type vertex
    (fixed counts only; resampled populations may legitimately come up
    all-zero and then yield an empty trace).
    """
    support, base, probs, resample, n_eff = _prepare(source, n)
    if not resample and int((support * base).sum()) == 0:
        raise WalkError("no explorable vertices")
    horizon = int(horizon_steps) if horizon_steps is not None else n_eff
    batch = trace_batch(source, a, horizon, np.array([seed], dtype=np.uint64), n=n)
    return batch.trace(0)


@dataclass
class CensusBatch:
    """Top-K component sizes of full-exhaustion walks, one row per replica."""

    n: int
    top_k: np.ndarray
    n_components: np.ndarray
    zero_singletons: np.ndarray
    clamp_events: np.ndarray
    sums_ok: np.ndarray

    @property
    def replicas(self) -> int:
        return len(self.n_components)

    def rescaled(self) -> np.ndarray:
        return self.top_k * float(self.n) ** (-2.0 / 3.0)


def census_batch(source: Source, a: float, seeds, top_k: int = 10, n: Optional[int] = None) -> CensusBatch:
    """Full census per seed, reduced to the top_k largest components."""
    support, base, probs, resample, n_eff = _prepare(source, n)
    seeds = np.asarray(seeds, dtype=np.uint64)
    n_rep = len(seeds)
    eps = a / float(np.cbrt(n_eff))
    topk = np.zeros((n_rep, int(top_k)), dtype=np.int64)
    ncomp = np.zeros(n_rep, dtype=np.int64)
    zeros = np.zeros(n_rep, dtype=np.int64)
    clamps = np.zeros(n_rep, dtype=np.int64)
    ok = np.zeros(n_rep, dtype=np.bool_)
    _census_batch(support, base, probs, resample, n_eff, eps, seeds, topk, ncomp, zeros, clamps, ok)
    if not ok.all():
        raise WalkError("component sizes failed to sum to the positive-type count")
    return CensusBatch(
        n=n_eff, top_k=topk, n_components=ncomp, zero_singletons=zeros,
        clamp_events=clamps, sums_ok=ok,
    )


def census_from_batch_row(batch: CensusBatch, r: int) -> ComponentCensus:
    """Census object for one replica; only valid when top_k covered all components."""
    row = batch.top_k[r]
    sizes = row[row > 0]
    if int(batch.n_components[r]) > len(sizes):
        raise WalkError("top_k too small to reconstruct the full census")
    return ComponentCensus(
        sizes=sizes.copy(),
        n=batch.n,
        zero_type_singletons=int(batch.zero_singletons[r]),
        complete=True,
    )
