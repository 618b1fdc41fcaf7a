"""Vertex-type distributions: validation, exact moments, size-biasing.

Type values are non-negative integers with finite support. Probabilities
are kept as exact rationals so that moment arithmetic and the
criticality check (second moment equal to one) carry no rounding error;
distributions meant to sit exactly at the critical point should be
specified with rational atoms such as "3/4". Laws with unbounded
support must be truncated by the caller before use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

PROB_SUM_TOL = 1e-12
CRITICAL_TOL = 1e-9

AtomValue = Union[int, float, str, Fraction]


class DistributionError(ValueError):
    """Invalid type distribution or type counts."""


def _as_fraction(value: AtomValue) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise DistributionError(f"cannot interpret probability {value!r}")


@dataclass(frozen=True)
class TypePmf:
    """Law of the vertex type: distinct ascending values with rational masses."""

    support: tuple[int, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise DistributionError("support and probs must have equal length")
        if len(self.support) == 0:
            raise DistributionError("empty support")
        for x in self.support:
            if not isinstance(x, int) or x < 0:
                raise DistributionError(f"support value {x!r} is not a non-negative integer")
        if list(self.support) != sorted(set(self.support)):
            raise DistributionError("support values must be distinct and ascending")
        for p in self.probs:
            if p < 0:
                raise DistributionError(f"negative probability {p}")
        total = sum(self.probs, Fraction(0))
        if abs(total - 1) > PROB_SUM_TOL:
            raise DistributionError(f"probabilities sum to {float(total)!r}, not 1")
        if max(self.support) == 0:
            raise DistributionError("support must contain a positive type")

    @classmethod
    def from_atoms(cls, atoms: Union[Mapping[int, AtomValue], Iterable[tuple[int, AtomValue]]]) -> "TypePmf":
        items = atoms.items() if isinstance(atoms, Mapping) else list(atoms)
        pairs = sorted((int(x), _as_fraction(p)) for x, p in items)
        return cls(tuple(x for x, _ in pairs), tuple(p for _, p in pairs))

    def prob_of(self, x: int) -> Fraction:
        for value, p in zip(self.support, self.probs):
            if value == x:
                return p
        return Fraction(0)

    def probs_float(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs], dtype=np.float64)

    def atoms(self) -> dict[int, Fraction]:
        return dict(zip(self.support, self.probs))


@dataclass(frozen=True)
class MomentSummary:
    """First three moments plus the limit-process coefficients they fix.

    sigma is the diffusion coefficient sqrt(E X * E X^3) and beta the
    drift curvature E X^3 / E X of the limiting parabolic-drift motion.
    """

    ex: Fraction
    ex2: Fraction
    ex3: Fraction
    sigma: float
    beta: float
    critical: bool

    def __post_init__(self):
        if self.ex <= 0:
            raise DistributionError("E X must be positive")
        if not (self.ex3 >= self.ex2 >= self.ex * self.ex > 0):
            raise DistributionError("moment ordering violated")

    @property
    def beta_exact(self) -> Fraction:
        return self.ex3 / self.ex


@dataclass(frozen=True)
class TypeCounts:
    """Realized type tallies of one vertex population."""

    counts: Mapping[int, int]
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise DistributionError("n must be non-negative")
        for x, c in self.counts.items():
            if not isinstance(x, (int, np.integer)) or x < 0:
                raise DistributionError(f"type {x!r} is not a non-negative integer")
            if c < 0:
                raise DistributionError(f"negative count for type {x}")
        if sum(self.counts.values()) != self.n:
            raise DistributionError("counts do not sum to n")

    def positive_items(self) -> list[tuple[int, int]]:
        return sorted((int(x), int(c)) for x, c in self.counts.items() if x > 0 and c > 0)

    @property
    def zero_count(self) -> int:
        return int(sum(c for x, c in self.counts.items() if x == 0))

    @property
    def max_type(self) -> int:
        present = [int(x) for x, c in self.counts.items() if c > 0]
        if not present:
            raise DistributionError("empty counts")
        return max(present)


@dataclass(frozen=True)
class MaxTypeDiagnostic:
    max_type: int
    n_cuberoot: float
    ratio: float
    flagged: bool


def compute_moments(pmf: TypePmf, tol: float = CRITICAL_TOL) -> MomentSummary:
    """Exact finite-sum moments and the derived limit coefficients."""
    ex = sum((Fraction(x) * p for x, p in zip(pmf.support, pmf.probs)), Fraction(0))
    ex2 = sum((Fraction(x * x) * p for x, p in zip(pmf.support, pmf.probs)), Fraction(0))
    ex3 = sum((Fraction(x * x * x) * p for x, p in zip(pmf.support, pmf.probs)), Fraction(0))
    if ex == 0:
        raise DistributionError("no positive types")
    sigma = math.sqrt(float(ex * ex3))
    beta = float(ex3 / ex)
    critical = abs(ex2 - 1) <= tol
    return MomentSummary(ex=ex, ex2=ex2, ex3=ex3, sigma=sigma, beta=beta, critical=critical)


def size_biased_pmf(pmf: TypePmf) -> TypePmf:
    """Law reweighted by the value: P{y} = y P{X=y} / E X. Drops type 0."""
    ex = sum((Fraction(x) * p for x, p in zip(pmf.support, pmf.probs)), Fraction(0))
    if ex == 0:
        raise DistributionError("no positive types")
    support = tuple(x for x in pmf.support if x > 0)
    probs = tuple(Fraction(x) * p / ex for x, p in zip(pmf.support, pmf.probs) if x > 0)
    return TypePmf(support, probs)


def sample_types(pmf: TypePmf, n: int, rng: np.random.Generator) -> TypeCounts:
    """Multinomial type tallies for n i.i.d. vertices."""
    if n < 1:
        raise DistributionError("n must be at least 1")
    draws = rng.multinomial(n, pmf.probs_float())
    counts = {x: int(c) for x, c in zip(pmf.support, draws)}
    return TypeCounts(counts=counts, n=n)


def validate_max_type(counts: TypeCounts) -> MaxTypeDiagnostic:
    """Compare the largest realized type with the n^(1/3) scale.

    Realizations with ratio >= 1 are flagged but not rejected: large
    types make clamped edge probabilities possible, which downstream
    code counts as a diagnostic.
    """
    if counts.n == 0:
        raise DistributionError("empty counts")
    mx = counts.max_type
    cuberoot = counts.n ** (1.0 / 3.0)
    ratio = mx / cuberoot
    return MaxTypeDiagnostic(max_type=mx, n_cuberoot=cuberoot, ratio=ratio, flagged=ratio >= 1.0)
