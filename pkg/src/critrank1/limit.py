"""The limiting diffusion, its reflection, and excursion lengths.

The process is sigma * W(s) + a*s - (beta/2) s^2 for a standard
Brownian motion W. Its drift is deterministic, so increments over grid
cells are exactly Gaussian: the grid marginals carry no integration
error and the only approximation anywhere is the resolution of the
zero set of the reflected path.

Zeros are detected as new running minima of the unreflected path, not
by an |B| < eps threshold; on the grid that predicate is exact. The
final segment after the last zero is cut by the horizon and therefore
not a complete excursion; it is flagged and excluded by default, and
its rate is reported so the truncation bias stays visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LimitError(ValueError):
    pass


@dataclass(frozen=True)
class LimitParams:
    """Coefficients and grid of one simulation.

    sigma and beta are normally the moment combinations sqrt(EX * EX^3)
    and EX^3 / EX of a critical type law; zero values are accepted so
    that pure-drift and pure-Brownian sanity checks can run.
    """

    a: float
    sigma: float
    beta: float
    s0: float = 8.0
    dt: float = 1e-4

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise LimitError("sigma must be finite and non-negative")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise LimitError("beta must be finite and non-negative")
        if self.s0 <= 0 or self.dt <= 0:
            raise LimitError("s0 and dt must be positive")
        if self.dt > self.s0 / 100.0:
            raise LimitError("dt must be at most s0/100")

    @property
    def grid_points(self) -> int:
        return int(round(self.s0 / self.dt)) + 1


@dataclass
class LimitPath:
    params: LimitParams
    s: np.ndarray
    values: np.ndarray
    reflected: np.ndarray
    zero_indices: np.ndarray


@dataclass
class ExcursionList:
    """Descending lengths of the complete excursions of one path."""

    lengths: np.ndarray
    truncated_tail: bool
    tail_length: float = 0.0

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        if len(self.lengths) > 1 and (np.diff(self.lengths) > 0).any():
            raise LimitError("lengths must be descending")
        if (self.lengths <= 0).any():
            raise LimitError("lengths must be positive")


def reflect_path(values: np.ndarray) -> np.ndarray:
    """B_k = W_k - min_{j<=k} W_j; requires W_0 = 0."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0 or values[0] != 0.0:
        raise LimitError("path must start at 0")
    return values - np.minimum.accumulate(values)


def simulate_limit_path(params: LimitParams, rng: np.random.Generator) -> LimitPath:
    """Exact Gaussian grid increments, then reflection at the running minimum."""
    m = params.grid_points - 1
    s = np.arange(m + 1) * params.dt
    drift = params.a * params.dt - 0.5 * params.beta * (s[1:] ** 2 - s[:-1] ** 2)
    noise = params.sigma * np.sqrt(params.dt) * rng.standard_normal(m)
    values = np.empty(m + 1, dtype=np.float64)
    values[0] = 0.0
    np.cumsum(drift + noise, out=values[1:])
    reflected = values - np.minimum.accumulate(values)
    zero_indices = np.flatnonzero(reflected == 0.0)
    return LimitPath(params=params, s=s, values=values, reflected=reflected, zero_indices=zero_indices)


def excursions_from_reflected(reflected: np.ndarray, dt: float, include_truncated: bool = False) -> ExcursionList:
    """Excursion lengths from a reflected path sampled at spacing dt.

    Gaps of one grid step between consecutive zeros are dwell, not
    excursions; longer gaps contribute gap*dt. The segment after the
    last zero, if any, is the truncated tail.
    """
    reflected = np.asarray(reflected, dtype=np.float64)
    zeros = np.flatnonzero(reflected == 0.0)
    if len(zeros) == 0 or zeros[0] != 0:
        raise LimitError("reflected path must be zero at the origin")
    gaps = np.diff(zeros)
    lengths = gaps[gaps >= 2].astype(np.float64) * dt
    last = int(zeros[-1])
    tail = (len(reflected) - 1 - last) * dt
    truncated = tail > 0.0
    if include_truncated and truncated:
        lengths = np.append(lengths, tail)
    lengths = np.sort(lengths)[::-1].copy()
    return ExcursionList(lengths=lengths, truncated_tail=truncated, tail_length=tail)


def extract_excursions(path: LimitPath, include_truncated: bool = False) -> ExcursionList:
    return excursions_from_reflected(path.reflected, path.params.dt, include_truncated)


@dataclass
class GammaSample:
    """Top-K excursion lengths per replica, zero-padded."""

    lengths: np.ndarray  # (replicas, k)
    truncation_rate: float
    params: LimitParams

    @property
    def replicas(self) -> int:
        return self.lengths.shape[0]


def sample_gamma(params: LimitParams, replicas: int, rng: np.random.Generator, top_k: int = 10) -> GammaSample:
    """Simulate paths and collect their ordered excursion lengths."""
    if replicas < 1 or top_k < 1:
        raise LimitError("replicas and top_k must be at least 1")
    out = np.zeros((replicas, top_k), dtype=np.float64)
    truncated = 0
    for r in range(replicas):
        path = simulate_limit_path(params, rng)
        exc = extract_excursions(path)
        k = min(top_k, len(exc.lengths))
        out[r, :k] = exc.lengths[:k]
        truncated += int(exc.truncated_tail)
    return GammaSample(lengths=out, truncation_rate=truncated / replicas, params=params)
