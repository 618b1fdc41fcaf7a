"""Experiment configuration: file format, defaults, validation.

The file format is line oriented:

    # comment
    mode = compare
    a = 0
    n_list = 10000, 100000
    replicas = 200
    seed = 42

    [pmf]
    0: 3/4
    2: 1/4

Keys before the [pmf] section are scalars; the [pmf] section lists
type:probability atoms with rational or decimal probabilities. Unknown
keys, bad values and structural problems are reported with their line
number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from .dist import DistributionError, TypePmf, compute_moments

DEFAULT_S0 = 8.0
DEFAULT_DT = 1e-4
DEFAULT_TOP_K = 10
DEFAULT_N_LIST = (10_000, 30_000, 100_000)
DEFAULT_REPLICAS = 200
DEFAULT_SEED = 0

MODES = ("census", "path", "limit", "compare", "invariants")

_SCALAR_KEYS = {
    "mode", "a", "n_list", "replicas", "s0", "dt", "k", "seed",
    "workers", "out", "allow_noncritical",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    pmf: TypePmf
    a: float
    n_list: tuple[int, ...]
    replicas: int
    s0: float
    dt: float
    top_k: int
    seed: int
    mode: str
    out_dir: Optional[Path] = None
    workers: int = 1
    allow_noncritical: bool = False

    def validated(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.n_list:
            raise ConfigError("n_list must be non-empty")
        if list(self.n_list) != sorted(self.n_list):
            raise ConfigError("n_list must be ascending")
        if min(self.n_list) < 1:
            raise ConfigError("n values must be at least 1")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if self.top_k < 1:
            raise ConfigError("k must be at least 1")
        if self.s0 <= 0 or self.dt <= 0 or self.dt > self.s0 / 100.0:
            raise ConfigError("need s0 > 0 and 0 < dt <= s0/100")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        moments = compute_moments(self.pmf)
        if self.mode == "compare" and not moments.critical and not self.allow_noncritical:
            raise ConfigError(
                "compare mode needs a critical type law (E X^2 = 1); "
                f"got E X^2 = {float(moments.ex2)!r}. "
                "Pass --allow-noncritical to override."
            )
        return self

    @property
    def moments(self):
        return compute_moments(self.pmf)

    def echo(self) -> dict:
        return {
            "mode": self.mode,
            "pmf": {str(x): str(p) for x, p in zip(self.pmf.support, self.pmf.probs)},
            "a": self.a,
            "n_list": list(self.n_list),
            "replicas": self.replicas,
            "s0": self.s0,
            "dt": self.dt,
            "k": self.top_k,
            "seed": self.seed,
            "workers": self.workers,
            "allow_noncritical": self.allow_noncritical,
        }


def _fail(path, lineno: int, message: str):
    raise ConfigError(f"{path}:{lineno}: {message}")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def load_config(path: Union[str, Path], **overrides) -> ExperimentConfig:
    """Parse and validate a config file.

    Keyword overrides (seed, out_dir, workers, mode, allow_noncritical,
    replicas) take precedence over file values; the command line uses
    them. Defaults are materialized here so reports can echo the full
    effective configuration.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    scalars: dict[str, str] = {}
    atoms: list[tuple[int, str]] = []
    section = None
    for lineno, rawline in enumerate(path.read_text().splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[pmf]":
                _fail(path, lineno, f"unknown section {line!r}")
            section = "pmf"
            continue
        if section == "pmf":
            if ":" not in line:
                _fail(path, lineno, "expected 'type: probability'")
            left, right = line.split(":", 1)
            try:
                value = int(left.strip())
            except ValueError:
                _fail(path, lineno, f"type {left.strip()!r} is not an integer")
            atoms.append((value, right.strip()))
        else:
            if "=" not in line:
                _fail(path, lineno, "expected 'key = value'")
            key, _, raw = line.partition("=")
            key = key.strip().lower()
            if key not in _SCALAR_KEYS:
                _fail(path, lineno, f"unknown key {key!r}")
            if key in scalars:
                _fail(path, lineno, f"duplicate key {key!r}")
            scalars[key] = raw.strip()

    if not atoms:
        raise ConfigError(f"{path}: missing [pmf] section")
    try:
        pmf = TypePmf.from_atoms(atoms)
    except (DistributionError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{path}: invalid pmf: {exc}") from exc

    def scalar(key, default, conv):
        if key not in scalars:
            return default
        try:
            return conv(scalars[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc

    def parse_n_list(raw: str) -> tuple[int, ...]:
        return tuple(int(tok.strip()) for tok in raw.split(",") if tok.strip())

    config = ExperimentConfig(
        pmf=pmf,
        a=scalar("a", 0.0, lambda r: float(Fraction(r))),
        n_list=scalar("n_list", DEFAULT_N_LIST, parse_n_list),
        replicas=scalar("replicas", DEFAULT_REPLICAS, int),
        s0=scalar("s0", DEFAULT_S0, float),
        dt=scalar("dt", DEFAULT_DT, float),
        top_k=scalar("k", DEFAULT_TOP_K, int),
        seed=scalar("seed", DEFAULT_SEED, int),
        mode=scalar("mode", "census", str).lower(),
        out_dir=Path(scalars["out"]) if "out" in scalars else None,
        workers=scalar("workers", 1, int),
        allow_noncritical=scalar("allow_noncritical", False, _parse_bool),
    )

    clean = {k: v for k, v in overrides.items() if v is not None}
    if "out_dir" in clean:
        clean["out_dir"] = Path(clean["out_dir"])
    if clean:
        config = replace(config, **clean)
    return config.validated()
