"""Experiment configuration documents (YAML or JSON)."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .domain import Catalog, DemandModel, Policy, zipf_catalog
from .network import NetworkSpec


DEFAULT_N = 12
DEFAULT_ALPHA = 0.75


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CatalogConfig(_Strict):
    n: Optional[int] = None
    alpha: Optional[float] = None
    rates: Optional[list[float]] = None
    lengths: Optional[list[int]] = None

    @model_validator(mode="after")
    def _one_source(self):
        zipf = self.n is not None or self.alpha is not None
        if zipf and self.rates is not None:
            raise ValueError("give either n/alpha or explicit rates, not both")
        if self.rates is None:
            # unset Zipf parameters fall back to the reference catalog
            self.n = DEFAULT_N if self.n is None else self.n
            self.alpha = DEFAULT_ALPHA if self.alpha is None else self.alpha
        return self

    def build(self) -> Catalog:
        cat = Catalog(tuple(self.rates)) if self.rates is not None else zipf_catalog(self.n, self.alpha)
        return cat.with_lengths(self.lengths) if self.lengths is not None else cat


class PolicyConfig(_Strict):
    kind: Literal["lru", "mru", "kru", "irp", "krp", "re"] = "lru"
    k: Optional[int] = None

    def build(self) -> Policy:
        return Policy(self.kind, self.k)


class CacheConfig(_Strict):
    capacity: int = 6
    policy: PolicyConfig = Field(default_factory=PolicyConfig)


class DemandConfig(_Strict):
    model: Literal["irm", "delayed"] = "irm"
    d: Optional[float] = None

    @model_validator(mode="after")
    def _delay(self):
        if self.model == "delayed" and self.d is None:
            raise ValueError("delayed demand needs d")
        if self.model == "irm" and self.d not in (None, 0, 0.0):
            raise ValueError("irm demand takes no d")
        return self

    def build(self) -> DemandModel:
        return DemandModel.delayed(self.d) if self.model == "delayed" else DemandModel.irm()


class SimSection(_Strict):
    seed: int = Field(default=0, ge=0, lt=2**64)
    warmup: Optional[int] = Field(default=None, ge=0)
    queries: int = Field(default=1_000_000, ge=1)
    replications: int = Field(default=10, ge=1)


class LocalCacheConfig(_Strict):
    capacity: int
    rates: list[float]


class NetworkConfig(_Strict):
    caches: list[LocalCacheConfig]
    internet_capacity: int = 1

    def build(self) -> NetworkSpec:
        return NetworkSpec(tuple(tuple(c.rates) for c in self.caches),
                           tuple(c.capacity for c in self.caches), self.internet_capacity)


class OutputConfig(_Strict):
    format: Literal["csv", "json"] = "csv"
    path: str = "out"


class ExperimentConfig(_Strict):
    catalog: CatalogConfig = Field(default_factory=CatalogConfig)
    cache: CacheConfig = Field(default_factory=CacheConfig)
    demand: DemandConfig = Field(default_factory=DemandConfig)
    sim: SimSection = Field(default_factory=SimSection)
    network: Optional[NetworkConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    def resolved(self) -> dict:
        """Every setting that affects results; the output location is left out."""
        return self.model_dump(mode="json", exclude={"output": {"path"}})


def _set_path(doc: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot set {dotted!r}: {key!r} is not a section")
    node[keys[-1]] = value


def load_config(path: str | Path | None = None, overrides: list[str] = (), **flags) -> ExperimentConfig:
    """Read a config document, apply ``key.path=value`` overrides, then validate.

    Keyword ``flags`` are dotted paths too; ``None`` values are ignored.
    """
    doc: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        doc = loaded or {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        _set_path(doc, key.strip(), yaml.safe_load(raw))
    for key, value in flags.items():
        if value is not None:
            _set_path(doc, key, value)
    return ExperimentConfig.model_validate(doc)
