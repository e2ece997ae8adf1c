"""Domain types shared by the analytic model, the simulator and the optimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from numbers import Real
from typing import Iterator, Sequence

import numpy as np

HEADER_TOA_S = 0.233472
FRAGMENT_TOA_S = 0.1024
# Physical channels per hopping grid.
DEFAULT_CHANNELS = 35
# 280 physical channels of 488 Hz split into grids of 35.
DEFAULT_GRIDS = 8

PROBABILITY_SUM_TOL = 1e-9


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    if not math.isfinite(p_dbm):
        raise ValueError(f"power must be finite, got {p_dbm!r}")
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Setup:
    """A (header replicas, payload code rate) pair a device may use for one packet."""

    header_replicas: int
    code_rate: Fraction

    def __post_init__(self) -> None:
        if isinstance(self.header_replicas, bool) or int(self.header_replicas) != self.header_replicas:
            raise TypeError("header_replicas must be an integer")
        if self.header_replicas < 1:
            raise ValueError(f"header_replicas must be >= 1, got {self.header_replicas}")
        cr = self.code_rate
        if isinstance(cr, float):
            raise TypeError("code_rate must be an exact rational (Fraction, int or 'a/b' string)")
        cr = Fraction(cr)
        if not 0 < cr <= 1:
            raise ValueError(f"code_rate must lie in (0, 1], got {cr}")
        object.__setattr__(self, "header_replicas", int(self.header_replicas))
        object.__setattr__(self, "code_rate", cr)

    def __str__(self) -> str:
        return f"(h={self.header_replicas}, CR={self.code_rate})"


DR8 = Setup(3, Fraction(1, 3))
DR9 = Setup(2, Fraction(2, 3))


@dataclass(frozen=True)
class SetupCatalog:
    """Ordered setups S1..SK. Index ``k`` in the public API is 1-based."""

    setups: tuple[Setup, ...]

    def __post_init__(self) -> None:
        setups = tuple(self.setups)
        if not setups:
            raise ValueError("catalog needs at least one setup")
        if len(set(setups)) != len(setups):
            raise ValueError("catalog contains duplicate setups")
        object.__setattr__(self, "setups", setups)

    def __len__(self) -> int:
        return len(self.setups)

    def __iter__(self) -> Iterator[Setup]:
        return iter(self.setups)

    def __getitem__(self, k: int) -> Setup:
        """Return setup ``S_k`` (1-based)."""
        if not 1 <= k <= len(self.setups):
            raise IndexError(f"setup index {k} outside 1..{len(self.setups)}")
        return self.setups[k - 1]

    def index_of(self, setup: Setup) -> int:
        """1-based index of ``setup``; raises KeyError when absent."""
        try:
            return self.setups.index(setup) + 1
        except ValueError:
            raise KeyError(f"setup {setup} not in catalog") from None

    def resolve(self, name: str) -> int:
        """Map ``"S3"``, ``"DR8"`` or ``"DR9"`` to a 1-based index."""
        key = name.strip().upper()
        if key == "DR8":
            return self.index_of(DR8)
        if key == "DR9":
            return self.index_of(DR9)
        if key.startswith("S") and key[1:].isdigit():
            k = int(key[1:])
            self[k]
            return k
        raise KeyError(f"unknown setup name {name!r}")

    @property
    def header_replicas(self) -> np.ndarray:
        return np.array([s.header_replicas for s in self.setups], dtype=np.int64)


def default_catalog() -> SetupCatalog:
    return SetupCatalog(
        (
            Setup(1, Fraction(5, 6)),
            Setup(1, Fraction(2, 3)),
            Setup(2, Fraction(2, 3)),
            Setup(2, Fraction(1, 2)),
            Setup(3, Fraction(1, 2)),
            Setup(3, Fraction(1, 3)),
        )
    )


@dataclass(frozen=True)
class AllocationDistribution:
    """Probabilities with which devices pick each catalog setup.

    Weights may be floats or exact ``Fraction`` values; they are stored as
    given so grid points keep an exact sum.
    """

    weights: tuple[Real, ...]

    def __post_init__(self) -> None:
        weights = tuple(self.weights)
        if not weights:
            raise ValueError("distribution needs at least one weight")
        for k, w in enumerate(weights, start=1):
            if isinstance(w, bool) or not isinstance(w, Real):
                raise TypeError(f"weight {k} is not a real number: {w!r}")
            if not (0 <= w <= 1):
                raise ValueError(f"weight {k} = {w} outside [0, 1]")
        total = sum(weights)
        if abs(total - 1) > PROBABILITY_SUM_TOL:
            raise ValueError(f"weights sum to {float(total)!r}, expected 1")
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.weights)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AllocationDistribution):
            return NotImplemented
        return len(self) == len(other) and all(
            abs(a - b) <= PROBABILITY_SUM_TOL for a, b in zip(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash(tuple(round(float(w), 9) for w in self.weights))

    def as_array(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights], dtype=float)

    def check_catalog(self, catalog: SetupCatalog) -> None:
        if len(self) != len(catalog):
            raise ValueError(
                f"distribution has {len(self)} weights but catalog has {len(catalog)} setups"
            )

    @classmethod
    def point(cls, size: int, k: int) -> "AllocationDistribution":
        """All mass on setup ``k`` (1-based)."""
        if not 1 <= k <= size:
            raise IndexError(f"setup index {k} outside 1..{size}")
        return cls(tuple(Fraction(int(i == k - 1)) for i in range(size)))

    @classmethod
    def dr8(cls, catalog: SetupCatalog) -> "AllocationDistribution":
        return cls.point(len(catalog), catalog.index_of(DR8))

    @classmethod
    def dr9(cls, catalog: SetupCatalog) -> "AllocationDistribution":
        return cls.point(len(catalog), catalog.index_of(DR9))

    @classmethod
    def from_mapping(cls, size: int, mapping: dict[int, Real]) -> "AllocationDistribution":
        """Build from ``{k: weight}`` with 1-based keys; missing setups get 0."""
        weights: list[Real] = [Fraction(0)] * size
        for k, w in mapping.items():
            if not 1 <= k <= size:
                raise IndexError(f"setup index {k} outside 1..{size}")
            weights[k - 1] = w
        return cls(tuple(weights))

    def support(self) -> list[int]:
        return [k for k, w in enumerate(self.weights, start=1) if w > 0]

    def format(self) -> str:
        """Encode as ``"k:weight"`` pairs over the support, joined by ``+``."""
        return "+".join(f"{k}:{float(self.weights[k - 1]):.12g}" for k in self.support())

    @classmethod
    def parse(cls, text: str, size: int) -> "AllocationDistribution":
        """Inverse of :meth:`format`."""
        mapping: dict[int, Real] = {}
        for part in text.strip().split("+"):
            k_str, sep, w_str = part.partition(":")
            if not sep:
                raise ValueError(f"malformed distribution term {part!r}, expected 'k:weight'")
            k = int(k_str)
            if k in mapping:
                raise ValueError(f"setup {k} listed twice in {text!r}")
            mapping[k] = float(w_str)
        return cls.from_mapping(size, mapping)


@dataclass(frozen=True)
class NetworkConfig:
    """Scenario parameters. Defaults follow the evaluated LR-FHSS setting."""

    devices: int = 20000
    tx_rate: float = 1 / 900
    payload_bytes: int = 10
    channels: int = DEFAULT_CHANNELS
    tx_power_dbm: float = 20.0
    header_toa_s: float = HEADER_TOA_S
    fragment_toa_s: float = FRAGMENT_TOA_S
    sim_duration_s: float = 3600.0
    grids: int = DEFAULT_GRIDS

    def __post_init__(self) -> None:
        for name in ("devices", "payload_bytes", "channels", "grids"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, int(value))
        for name in ("tx_rate", "header_toa_s", "fragment_toa_s", "sim_duration_s"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
            object.__setattr__(self, name, value)
        # dBm may legitimately be <= 0; "positive" applies to the linear power.
        dbm_to_watts(self.tx_power_dbm)

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    def replace(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TxPowerWatts:
    watts: float

    @classmethod
    def from_dbm(cls, p_dbm: float) -> "TxPowerWatts":
        return cls(dbm_to_watts(p_dbm))


def catalog_from_pairs(pairs: Sequence[tuple[int, Fraction | int | str]]) -> SetupCatalog:
    return SetupCatalog(tuple(Setup(h, Fraction(cr)) for h, cr in pairs))
