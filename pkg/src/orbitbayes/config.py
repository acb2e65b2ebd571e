"""Experiment configuration: one YAML file, overridden by command-line flags.

Precedence, highest first: command-line flags, the config file, the
``ORBITBAYES_OUT`` environment variable (output directory only), built-in
defaults.  The top-level sections of ``DEFAULT_EXPERIMENT`` fill in whatever
the file leaves out (a section given in the file replaces the default one as a
whole); remaining fields take the dataclass defaults.  The seed has no default.
"""
from __future__ import annotations

import copy
import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .analysis import config_hash
from .errors import ConfigError

OUT_ENV = "ORBITBAYES_OUT"
DEFAULT_OUT = "orbitbayes-out"
MODEL_KINDS = ("vspherical", "affine-shape", "pca")
SEED_MAX = 2 ** 64 - 1

# Built-in defaults below the config file: the two-dimensional elliptical model.
DEFAULT_EXPERIMENT = {
    "model": {"kind": "vspherical", "n": 2, "v": "elliptical", "Sigma0": [[4.0, 0.0], [0.0, 1.0]]},
    "generators": ["gaussian", "exp-power-4"],
    "statistic": "direction",
}


@dataclass
class ModelConfig:
    kind: str = "vspherical"
    n: int = 3
    k: int = 2
    v: str = "euclidean"
    q: float = 2.0
    Sigma0: Optional[list] = None
    Lambda0: Optional[list] = None
    location: Optional[list] = None
    scale: Any = 1.0


@dataclass
class SamplingConfig:
    count: int = 10_000
    permutations: int = 500
    directions: int = 32
    mc_draws: int = 1_000_000


@dataclass
class QuadratureConfig:
    rtol: float = 1e-8


@dataclass
class EquivalenceConfig:
    grid_points: int = 25
    box: float = 3.0
    multiplier: float = 0.0
    tolerance: float = 1e-4


@dataclass
class DensityConfig:
    points: int = 41
    box: float = 3.0


@dataclass
class ExperimentConfig:
    seed: int
    model: ModelConfig = field(default_factory=ModelConfig)
    generators: list = field(default_factory=lambda: ["gaussian", "exp-power-4"])
    statistic: str = "direction"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    equivalence: EquivalenceConfig = field(default_factory=EquivalenceConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    landmarks: list = field(default_factory=list)
    design: Optional[list] = None
    out: Optional[str] = None
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        _check_int("seed", self.seed, 0, SEED_MAX)
        m = self.model
        if m.kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {m.kind!r}")
        _check_int("model.n", m.n, 1, 1000)
        _check_int("model.k", m.k, 1, 50)
        if m.kind in ("affine-shape", "pca") and m.k > m.n:
            raise ConfigError("model.k must not exceed model.n")
        if not self.generators or len(self.generators) > 2:
            raise ConfigError("generators must list one or two generator labels")
        s = self.sampling
        _check_int("sampling.count", s.count, 1, 10_000_000)
        _check_int("sampling.permutations", s.permutations, 19, 100_000)
        _check_int("sampling.directions", s.directions, 1, 4096)
        _check_int("sampling.mc_draws", s.mc_draws, 1000, 100_000_000)
        _check_float("quadrature.rtol", self.quadrature.rtol, 1e-14, 1e-2)
        e = self.equivalence
        _check_int("equivalence.grid_points", e.grid_points, 1, 10_000)
        _check_float("equivalence.box", e.box, 1e-6, 1e6)
        _check_float("equivalence.tolerance", e.tolerance, 1e-15, 1.0)
        _check_int("density.points", self.density.points, 2, 10_000)
        _check_float("density.box", self.density.box, 1e-6, 1e6)
        _check_int("threads", self.threads, 1, 256)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Hash of everything that affects results (the output path and thread count do not)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return config_hash(d)

    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _check_int(name: str, value, lo: int, hi: int):
    if isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
        raise ConfigError(f"{name} must be an integer in [{lo}, {hi}], got {value!r}")


def _check_float(name: str, value, lo: float, hi: float):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not lo <= value <= hi:
        raise ConfigError(f"{name} must be a number in [{lo:g}, {hi:g}], got {value!r}")


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config field {prefix + key!r}")
        sub = {"model": ModelConfig, "sampling": SamplingConfig, "quadrature": QuadratureConfig,
               "equivalence": EquivalenceConfig, "density": DensityConfig}.get(key)
        if cls is ExperimentConfig and sub is not None:
            value = _build(sub, value or {}, key + ".")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    if data.get("seed") is None:
        raise ConfigError("missing required field 'seed' (give it in the config or with --seed)")
    return _build(ExperimentConfig, data, "").validate()


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"""),
    list("-+0123456789"),
)


def load(path: Optional[str], overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a YAML config (or start from defaults) and apply flag overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.load(text, Loader=_Loader) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("the config file must hold a mapping")
        # landmark paths are relative to the config file
        base = Path(path).parent
        data["landmarks"] = [str(base / p) for p in data.get("landmarks") or []]
    for key, value in DEFAULT_EXPERIMENT.items():
        data.setdefault(key, copy.deepcopy(value))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "tolerance":
            data.setdefault("quadrature", {})
            data["quadrature"] = {**(data["quadrature"] or {}), "rtol": value}
        else:
            data[key] = value
    return from_dict(data)
