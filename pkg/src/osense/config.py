"""Run configuration: nested dataclasses, YAML files and dotted overrides.

Every field has a default, so an empty file is a valid config.  Example::

    mode: sweep
    n_vertices: 10
    sweep_edges: [12, 16, 20, 24, 28]
    coupling_modes: [AFM, RandomSign]
    n_instances: 20
    sparse:
      stage2:
        max_iters: 20000

Overrides use dotted keys, ``--set sparse.stage2.max_iters=5000``; the
value is parsed as YAML, so ``[12, 16]`` and ``true`` work.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .graphs import CouplingMode, LatticeKind
from .sparse import SparseConfig

MODES = ("single", "sweep", "verify", "lattice", "crossover", "extract")


class ConfigError(ValueError):
    pass


@dataclass
class ExtractConfig:
    enabled: bool = False
    r_probes: int = 16
    independence_tol: float = 1e-8
    zero_tol: float = 1e-6
    basis_cap: int = 512


@dataclass
class RunConfig:
    mode: str = "single"
    n_vertices: int = 10
    n_edges: int = 12
    sweep_edges: list[int] = field(default_factory=list)
    coupling_mode: str = "AFM"
    coupling_modes: list[str] = field(default_factory=lambda: ["AFM", "RandomSign"])
    lattices: list[str] = field(default_factory=lambda: ["Chain", "SquareLadder"])
    require_asymmetric: bool = False
    n_states: int = 5
    n_instances: int = 1
    master_seed: int = 0
    workers: int = 1
    blas_threads: int = 1
    force_krylov: bool = False
    save_kernel: bool = False
    degeneracy_tol: float = 1e-8
    kernel_tol: float = 1e-10
    cluster_tol: float = 1e-6
    geo_eps: float = 0.05
    variance_tol: float = 1e-10
    sparse: SparseConfig = field(default_factory=SparseConfig)
    extract: ExtractConfig = field(default_factory=ExtractConfig)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        n = self.n_vertices
        if not 2 <= n <= 24:
            raise ConfigError(f"n_vertices must be in [2, 24], got {n}")
        max_edges = math.comb(n, 2)
        if self.mode in ("single", "verify") and not n - 1 <= self.n_edges <= max_edges:
            raise ConfigError(f"n_edges must be in [{n - 1}, {max_edges}] for {n} vertices, got {self.n_edges}")
        for e in self.sweep_edges:
            if not n - 1 <= e <= max_edges:
                raise ConfigError(f"sweep point {e} outside [{n - 1}, {max_edges}]")
        for m in [self.coupling_mode, *self.coupling_modes]:
            try:
                CouplingMode(m)
            except ValueError as exc:
                raise ConfigError(f"unknown coupling mode {m!r}") from exc
        for k in self.lattices:
            try:
                LatticeKind(k)
            except ValueError as exc:
                raise ConfigError(f"unknown lattice {k!r}") from exc
        for name in ("n_states", "workers", "blas_threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.n_instances < 0:
            raise ConfigError("n_instances must be non-negative")
        _check_positive(self, "")
        return self

    @property
    def sweep_points(self) -> list[tuple[int, str]]:
        edges = self.sweep_edges or [self.n_edges]
        modes = self.coupling_modes if self.mode == "sweep" else [self.coupling_mode]
        return [(e, m) for m in modes for e in edges]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_POSITIVE = ("tol", "eps", "step", "iters", "window", "cap", "probes")


def _check_positive(obj, prefix: str) -> None:
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(value):
            _check_positive(value, key + ".")
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            if any(s in f.name for s in _POSITIVE) and not value > 0:
                raise ConfigError(f"{key} must be positive, got {value}")


def _build(cls, data: dict, prefix: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix or '<root>'} must be a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, prefix + name + ".")
        else:
            kwargs[name] = _coerce(hint, value, prefix + name)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(hint, value, key: str):
    origin = typing.get_origin(hint)
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            value = [value]
        (inner, *_) = typing.get_args(hint) or (object,)
        items = [_coerce(inner, v, key) for v in value]
        return tuple(items) if origin is tuple else items
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false, got {value!r}")
        return value
    if hint in (int, float):
        if isinstance(value, str):
            # YAML 1.1 reads 1e-3 (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}")
        if hint is int and float(value) != int(value):
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        return hint(value)
    if hint is str:
        return str(value)
    return value


def _set_dotted(doc: dict, key: str, value) -> None:
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override inside non-mapping key {p!r}")
    node[parts[-1]] = value


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value of {key}: {exc}") from exc
    return key.strip(), value


def load_config(path=None, overrides=(), base: dict | None = None) -> RunConfig:
    doc: dict = dict(base or {})
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        doc.update(loaded or {})
    for item in overrides:
        _set_dotted(doc, *parse_override(item))
    return _build(RunConfig, doc).validate()


def config_from_dict(doc: dict) -> RunConfig:
    return _build(RunConfig, doc).validate()
