"""Declarative run configuration: a flat `key = value` text file.

Hyperparameter sets live in archivable files rather than command lines.
Lines starting with # (or inline trailing comments) are ignored.  List
values are comma separated.  Per-feature scaling is set with
`scale.<feature> = standardize|std_divide`, optionally on top of a global
`scale = ...` default for all features.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .data import ColumnSpec, DataError, SCALINGS
from .duals import ARITY, KernelSet
from .genotype import CgpParams
from .evolution import EvolutionConfig


class ConfigError(ValueError):
    """Unusable run configuration."""


_SCALAR_KEYS = {
    "train": str,
    "test": str,
    "target": str,
    "lower_bound": str,
    "upper_bound": str,
    "scale": str,
    "rows": int,
    "columns": int,
    "levels_back": int,
    "n_constants": int,
    "max_mutations": int,
    "generations": int,
    "population_size": int,
    "n_starts": int,
    "seed": int,
    "parallelism": int,
    "output_dir": str,
}
_LIST_KEYS = {"features", "kernels"}
_REQUIRED = ("train", "target", "features", "kernels", "generations")
_POSITIVE = (
    "rows",
    "columns",
    "levels_back",
    "max_mutations",
    "generations",
    "population_size",
    "n_starts",
    "parallelism",
)


@dataclass(frozen=True)
class RunConfig:
    train: Path
    target: str
    features: tuple[str, ...]
    kernels: tuple[str, ...]
    generations: int
    test: Optional[Path] = None
    lower_bound: Optional[str] = None
    upper_bound: Optional[str] = None
    scale_default: str = "none"
    scale_overrides: dict[str, str] = field(default_factory=dict)
    rows: int = 2
    columns: int = 16
    levels_back: Optional[int] = None
    n_constants: int = 5
    max_mutations: int = 4
    population_size: int = 40
    n_starts: int = 1
    seed: int = 0
    parallelism: int = 1
    output_dir: Path = Path("runs")

    def scaling_of(self, feature: str) -> str:
        return self.scale_overrides.get(feature, self.scale_default)

    def column_specs(self) -> list[ColumnSpec]:
        specs = [ColumnSpec(f, "feature", self.scaling_of(f)) for f in self.features]
        specs.append(ColumnSpec(self.target, "target"))
        if self.lower_bound:
            specs.append(ColumnSpec(self.lower_bound, "lower_bound"))
        if self.upper_bound:
            specs.append(ColumnSpec(self.upper_bound, "upper_bound"))
        return specs

    def cgp_params(self) -> CgpParams:
        return CgpParams(
            n_features=len(self.features),
            n_constants=self.n_constants,
            rows=self.rows,
            columns=self.columns,
            levels_back=self.levels_back or self.columns,
            kernels=KernelSet(self.kernels),
        )

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            cgp=self.cgp_params(),
            population_size=self.population_size,
            generations=self.generations,
            max_mutations=self.max_mutations,
            seed=self.seed,
        )

    def digest(self) -> str:
        """Stable fingerprint of every result-affecting setting.

        parallelism and output_dir are execution details that cannot change
        the result, so they are excluded and the digest (hence the front
        files) stays identical across them.
        """
        parts = []
        for key in sorted(self.__dataclass_fields__):
            if key in ("parallelism", "output_dir"):
                continue
            value = getattr(self, key)
            if isinstance(value, dict):
                value = sorted(value.items())
            elif isinstance(value, Path):
                value = str(value)
            parts.append(f"{key}={value!r}")
        return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()[:16]


def _parse_lines(text: str, source: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def parse_config(path) -> RunConfig:
    """Read and check a config file; raises ConfigError on any defect."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = _parse_lines(text, str(path))

    kwargs: dict = {}
    scale_overrides: dict[str, str] = {}
    for key, value in raw.items():
        if key.startswith("scale."):
            feature = key[len("scale.") :]
            if value not in SCALINGS:
                raise ConfigError(f"{key}: unknown scaling {value!r}")
            scale_overrides[feature] = value
        elif key in _LIST_KEYS:
            kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _SCALAR_KEYS:
            caster = _SCALAR_KEYS[key]
            try:
                kwargs[key] = caster(value)
            except ValueError:
                raise ConfigError(f"{key}: expected {caster.__name__}, got {value!r}") from None
        else:
            raise ConfigError(f"unknown config key {key!r}")

    for key in _REQUIRED:
        if key not in kwargs:
            raise ConfigError(f"missing required key {key!r}")
    scale_default = kwargs.pop("scale", "none")
    if scale_default not in SCALINGS:
        raise ConfigError(f"scale: unknown scaling {scale_default!r}")
    for feature in scale_overrides:
        if feature not in kwargs["features"]:
            raise ConfigError(f"scale.{feature}: {feature!r} is not a feature")
    for name in kwargs["kernels"]:
        if name not in ARITY:
            raise ConfigError(f"unknown kernel {name!r}; supported: {sorted(ARITY)}")
    if len(set(kwargs["features"])) != len(kwargs["features"]):
        raise ConfigError("duplicate feature names")
    for key in _POSITIVE:
        if key in kwargs and kwargs[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if "n_constants" in kwargs and kwargs["n_constants"] < 0:
        raise ConfigError("n_constants must be >= 0")
    if "seed" in kwargs and kwargs["seed"] < 0:
        raise ConfigError("seed must be >= 0")
    if ("lower_bound" in kwargs) != ("upper_bound" in kwargs):
        raise ConfigError("lower_bound and upper_bound must be given together")

    for path_key in ("train", "test", "output_dir"):
        if path_key in kwargs:
            kwargs[path_key] = Path(kwargs[path_key])

    cfg = RunConfig(scale_default=scale_default, scale_overrides=scale_overrides, **kwargs)
    try:
        cfg.cgp_params()
        cfg.evolution_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def check_files_exist(cfg: RunConfig) -> None:
    """Referenced datasets must exist at launch."""
    if not cfg.train.is_file():
        raise DataError(f"training dataset not found: {cfg.train}")
    if cfg.test is not None and not cfg.test.is_file():
        raise DataError(f"test dataset not found: {cfg.test}")
