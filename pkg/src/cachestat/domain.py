"""Object catalogs, demand models and eviction-policy descriptors.

Objects are numbered 1..N and the number doubles as popularity rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Catalog:
    """Per-object demand rates, with optional byte lengths."""

    rates: tuple[float, ...]
    lengths: Optional[tuple[int, ...]] = None
    total_rate: float = field(init=False, repr=False)

    def __post_init__(self):
        rates = tuple(float(x) for x in self.rates)
        if len(rates) < 2:
            raise ValueError(f"catalog needs at least 2 objects, got {len(rates)}")
        if not all(math.isfinite(x) and x > 0 for x in rates):
            raise ValueError("all rates must be finite and strictly positive")
        object.__setattr__(self, "rates", rates)
        if self.lengths is not None:
            lengths = tuple(int(x) for x in self.lengths)
            if len(lengths) != len(rates):
                raise ValueError(
                    f"lengths has {len(lengths)} entries, expected {len(rates)}"
                )
            if any(x <= 0 for x in lengths):
                raise ValueError("all lengths must be strictly positive")
            object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "total_rate", math.fsum(rates))

    @property
    def N(self) -> int:
        return len(self.rates)

    def rate(self, n: int) -> float:
        """Rate of object ``n`` (1-indexed)."""
        return self.rates[n - 1]

    @property
    def rate_array(self) -> np.ndarray:
        """Rates as a float array; entry ``n - 1`` belongs to object ``n``."""
        return np.asarray(self.rates, dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        """Query probabilities ``p_n = rate_n / total_rate``."""
        return self.rate_array / self.total_rate

    def with_lengths(self, lengths: Sequence[int]) -> "Catalog":
        return Catalog(self.rates, tuple(lengths))


def zipf_catalog(N: int, alpha: float) -> Catalog:
    """Zipf popularity: object ``n`` has rate ``n**-alpha`` (so object 1 has rate 1)."""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    return Catalog(tuple(float(n) ** -alpha for n in range(1, N + 1)))


@dataclass(frozen=True)
class DemandModel:
    """Per-object renewal demand: inter-query times are ``delay + Exp(rate)``.

    ``delay == 0`` is the independent reference model (independent Poisson
    streams). The exponential part uses the object's own rate unchanged, so
    with a positive delay the long-run query rate of object n drops to
    ``1 / (delay + 1 / rate_n)``.
    """

    delay: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise ValueError(f"delay must be finite and >= 0, got {self.delay}")

    @property
    def is_irm(self) -> bool:
        return self.delay == 0.0

    @classmethod
    def irm(cls) -> "DemandModel":
        return cls(0.0)

    @classmethod
    def delayed(cls, delay: float) -> "DemandModel":
        return cls(float(delay))


IRM = DemandModel()


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for replication ``stream`` of a seeded experiment."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def sample_interquery(model: DemandModel, rate: float, rng: np.random.Generator) -> float:
    """Draw one inter-query time: ``model.delay`` plus an inverse-transform exponential."""
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    u = rng.random()
    return model.delay - math.log1p(-u) / rate


POLICY_KINDS = ("lru", "mru", "kru", "irp", "krp", "re")


@dataclass(frozen=True)
class Policy:
    """Eviction policy descriptor.

    ``lru`` and ``mru`` are aliases for ``kru`` with ``k = B`` and ``k = 1``;
    ``irp`` is ``krp`` with ``k = 1``.
    """

    kind: str
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind in ("kru", "krp"):
            if self.k is None or self.k < 1:
                raise ValueError(f"{self.kind} needs an integer k >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.kind} takes no k")

    @property
    def ranked(self) -> bool:
        return self.kind != "re"

    @property
    def is_kru_family(self) -> bool:
        return self.kind in ("lru", "mru", "kru")

    @property
    def has_closed_form(self) -> bool:
        return self.kind != "krp"

    def eviction_rank(self, B: int) -> int:
        """Rank evicted on a miss by a kRU-family policy with capacity ``B``."""
        if not self.is_kru_family:
            raise ValueError(f"{self.kind} has no fixed eviction rank")
        k = {"lru": B, "mru": 1}.get(self.kind, self.k)
        if not 1 <= k <= B:
            raise ValueError(f"kRU rank k={k} outside 1..{B}")
        return k

    def promotion_step(self) -> int:
        if self.kind == "irp":
            return 1
        if self.kind == "krp":
            return self.k
        raise ValueError(f"{self.kind} has no promotion step")

    @property
    def label(self) -> str:
        return f"{self.k}{self.kind[1:]}" if self.k is not None else self.kind

    def __str__(self) -> str:
        return self.label


LRU = Policy("lru")
MRU = Policy("mru")
IRP = Policy("irp")
RE = Policy("re")


def kru(k: int) -> Policy:
    return Policy("kru", k)


def krp(k: int) -> Policy:
    return Policy("krp", k)
