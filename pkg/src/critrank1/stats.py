"""Distribution comparisons and curve summaries for the experiments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps


class StatsError(ValueError):
    pass


@dataclass
class EmpiricalSample:
    values: np.ndarray
    label: str = ""
    n_source: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size == 0:
            raise StatsError("empty sample")


def _values(x) -> np.ndarray:
    if isinstance(x, EmpiricalSample):
        return x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise StatsError("empty sample")
    return arr


def l2_distance(x: Sequence[float], y: Sequence[float]) -> float:
    """Euclidean distance between descending, zero-padded sequences.

    Inputs are sorted descending and padded to a common length before
    comparison, so (1,) and (0, 1) are at distance 0.
    """
    xa = np.sort(np.asarray(x, dtype=np.float64))[::-1]
    ya = np.sort(np.asarray(y, dtype=np.float64))[::-1]
    m = max(len(xa), len(ya))
    xp = np.zeros(m)
    yp = np.zeros(m)
    xp[: len(xa)] = xa
    yp[: len(ya)] = ya
    return float(np.sqrt(np.sum((xp - yp) ** 2)))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float


def two_sample_ks(x, y) -> KsResult:
    """Two-sided KS statistic with the asymptotic Kolmogorov p-value."""
    res = sps.ks_2samp(_values(x), _values(y), method="asymp")
    return KsResult(statistic=float(res.statistic), p_value=float(res.pvalue))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    dof: int
    bins: int
    merged: bool


def chi_square_gof(observed: Sequence[int], expected_probs: Sequence[float]) -> ChiSquareResult:
    """Pearson goodness of fit with dof = bins - 1.

    Bins whose expected count falls below 5 are merged, smallest
    expected first, which keeps the statistic independent of bin
    labelling. A single surviving bin is degenerate and raises.
    """
    obs = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(expected_probs, dtype=np.float64)
    if obs.shape != probs.shape:
        raise StatsError("observed and expected shapes differ")
    if (obs < 0).any() or (probs < 0).any():
        raise StatsError("negative entries")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise StatsError("expected probabilities must sum to 1")
    total = obs.sum()
    if total <= 0:
        raise StatsError("no observations")

    pairs = sorted(zip(probs, obs), key=lambda t: (t[0], t[1]))
    merged = False
    while len(pairs) > 1 and pairs[0][0] * total < 5.0:
        p0, o0 = pairs.pop(0)
        p1, o1 = pairs.pop(0)
        merged = True
        pairs.append((p0 + p1, o0 + o1))
        pairs.sort(key=lambda t: (t[0], t[1]))
    if len(pairs) < 2:
        raise StatsError("degenerate test: a single bin remains")

    e = np.array([p * total for p, _ in pairs])
    o = np.array([obs_i for _, obs_i in pairs])
    stat = float(np.sum((o - e) ** 2 / e))
    dof = len(pairs) - 1
    return ChiSquareResult(
        statistic=stat,
        p_value=float(sps.chi2.sf(stat, dof)),
        dof=dof,
        bins=len(pairs),
        merged=merged,
    )


@dataclass
class CurveSummary:
    grid: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    stderr: np.ndarray
    replicas: int


def mean_curve(curves: Sequence[tuple[np.ndarray, np.ndarray]]) -> CurveSummary:
    """Pointwise mean, sd and stderr of replica curves on one shared grid."""
    if len(curves) < 2:
        raise StatsError("need at least 2 replicas")
    grid0 = np.asarray(curves[0][0], dtype=np.float64)
    rows = []
    for grid, values in curves:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.shape != grid0.shape or not np.array_equal(grid, grid0):
            raise StatsError("grid mismatch between replicas")
        rows.append(np.asarray(values, dtype=np.float64))
    mat = np.vstack(rows)
    mean = mat.mean(axis=0)
    sd = mat.std(axis=0, ddof=1)
    return CurveSummary(grid=grid0, mean=mean, sd=sd, stderr=sd / np.sqrt(len(rows)), replicas=len(rows))


def mean_curve_matrix(grid: np.ndarray, matrix: np.ndarray) -> CurveSummary:
    """mean_curve for curves already stacked as rows of a matrix."""
    if matrix.shape[0] < 2:
        raise StatsError("need at least 2 replicas")
    mean = matrix.mean(axis=0)
    sd = matrix.std(axis=0, ddof=1)
    return CurveSummary(
        grid=np.asarray(grid, dtype=np.float64),
        mean=mean,
        sd=sd,
        stderr=sd / np.sqrt(matrix.shape[0]),
        replicas=matrix.shape[0],
    )
