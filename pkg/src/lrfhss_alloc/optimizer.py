"""Exhaustive search for the setup distribution that maximizes goodput or energy efficiency."""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .analytic import evaluate, evaluate_batch
from .core import AllocationDistribution, NetworkConfig, Setup, SetupCatalog

DEFAULT_STEP = Fraction(1, 20)

S1 = Setup(1, Fraction(5, 6))
S6 = Setup(3, Fraction(1, 3))


class Objective(str, enum.Enum):
    GOODPUT = "goodput"
    ENERGY_EFFICIENCY = "energy_efficiency"

    @classmethod
    def parse(cls, value: "Objective | str") -> "Objective":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"g": "goodput", "e": "energy_efficiency", "ee": "energy_efficiency", "energy": "energy_efficiency"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown objective {value!r}") from None


def grid_divisions(step: Fraction | float | str) -> int:
    """Return ``L`` for a grid step ``1/L``; rejects steps that are not unit fractions."""
    frac = Fraction(step).limit_denominator(10**6) if isinstance(step, float) else Fraction(step)
    if frac <= 0 or frac > 1 or frac.numerator != 1:
        raise ValueError(f"grid step must be 1/L for integer L >= 1, got {step!r}")
    return frac.denominator


@dataclass(frozen=True)
class SimplexGrid:
    divisions: int
    dimension: int

    def __post_init__(self) -> None:
        if self.divisions < 1 or self.dimension < 1:
            raise ValueError("grid needs divisions >= 1 and dimension >= 1")

    @classmethod
    def from_step(cls, dimension: int, step) -> "SimplexGrid":
        return cls(grid_divisions(step), dimension)

    @property
    def step(self) -> Fraction:
        return Fraction(1, self.divisions)

    def size(self) -> int:
        return math.comb(self.divisions + self.dimension - 1, self.dimension - 1)

    def compositions(self) -> np.ndarray:
        """All integer K-tuples summing to L, in ascending lexicographic order."""
        return _compositions(self.divisions, self.dimension)


@functools.lru_cache(maxsize=256)
def _compositions(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        blocks = []
        for first in range(total + 1):
            rest = _compositions(total - first, parts - 1)
            blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
        out = np.vstack(blocks)
    out.flags.writeable = False
    return out


def enumerate_simplex(dimension: int, step) -> Iterator[AllocationDistribution]:
    """Yield every grid distribution with exact ``Fraction`` weights."""
    grid = SimplexGrid.from_step(dimension, step)
    for row in grid.compositions():
        yield AllocationDistribution(tuple(Fraction(int(n), grid.divisions) for n in row))


@dataclass(frozen=True)
class OptimizationResult:
    best_delta: AllocationDistribution
    best_value: float
    evaluations: int
    objective: Objective


def _argmax_first(values: np.ndarray) -> int:
    # np.argmax returns the first maximum; rows are lexicographically sorted,
    # so ties resolve to the smallest distribution.
    if np.all(np.isnan(values)):
        return 0
    return int(np.nanargmax(values))


def optimize(
    cfg: NetworkConfig,
    cat: SetupCatalog,
    objective: Objective | str = Objective.GOODPUT,
    step=DEFAULT_STEP,
) -> OptimizationResult:
    objective = Objective.parse(objective)
    grid = SimplexGrid.from_step(len(cat), step)
    comps = grid.compositions()
    scores = evaluate_batch(cfg, cat, comps / grid.divisions)[objective.value]
    i = _argmax_first(scores)
    best = AllocationDistribution(tuple(Fraction(int(n), grid.divisions) for n in comps[i]))
    # report the scalar-path value so it matches evaluate() exactly
    value = evaluate(cfg, cat, best).metric(objective.value)
    return OptimizationResult(best, value, len(comps), objective)


def rank_grid(
    cfg: NetworkConfig, cat: SetupCatalog, objective: Objective | str, step=DEFAULT_STEP, top: int = 5
) -> list[tuple[AllocationDistribution, float]]:
    """Best ``top`` grid points by analytic metric, best first (stable tie-break)."""
    objective = Objective.parse(objective)
    grid = SimplexGrid.from_step(len(cat), step)
    comps = grid.compositions()
    scores = evaluate_batch(cfg, cat, comps / grid.divisions)[objective.value]
    order = np.argsort(-scores, kind="stable")[:top]
    return [
        (AllocationDistribution(tuple(Fraction(int(n), grid.divisions) for n in comps[i])), float(scores[i]))
        for i in order
    ]


def verify_by_simulation(
    cfg: NetworkConfig,
    cat: SetupCatalog,
    objective: Objective | str = Objective.GOODPUT,
    step=DEFAULT_STEP,
    top: int = 5,
    seeds: Sequence[int] = tuple(range(1, 11)),
    allow_repeats: bool = False,
) -> list[dict]:
    """Re-score the best ``top`` analytic grid points with the simulator.

    Returns one dict per candidate with the analytic value and the seed-mean
    simulated value, ordered as the analytic ranking.
    """
    from .simulator import simulate

    objective = Objective.parse(objective)
    out = []
    for delta, analytic_value in rank_grid(cfg, cat, objective, step, top):
        sims = [simulate(cfg, cat, delta, s, allow_repeats=allow_repeats) for s in seeds]
        key = "empirical_goodput_Bps" if objective is Objective.GOODPUT else "empirical_energy_eff_BpJ"
        vals = [getattr(r, key) for r in sims]
        out.append({"delta": delta, "analytic": analytic_value, "simulated": float(np.mean(vals))})
    return out


@dataclass(frozen=True)
class QuantizedAlpha:
    """``alpha = code / (2**bits - 1)`` is the S1 weight; S6 takes the rest."""

    bits: int
    code: int

    def __post_init__(self) -> None:
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if not 0 <= self.code <= 2**self.bits - 1:
            raise ValueError(f"code {self.code} does not fit in {self.bits} bits")

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.code, 2**self.bits - 1)

    def distribution(self, cat: SetupCatalog) -> AllocationDistribution:
        return two_setup_distribution(cat, self.alpha)


def two_setup_distribution(cat: SetupCatalog, alpha) -> AllocationDistribution:
    try:
        k1, k6 = cat.index_of(S1), cat.index_of(S6)
    except KeyError:
        raise ValueError("catalog must contain S1 (1, 5/6) and S6 (3, 1/3)") from None
    return AllocationDistribution.from_mapping(len(cat), {k1: alpha, k6: 1 - alpha})


def _two_setup_scores(cfg, cat, alphas: np.ndarray, objective: Objective) -> np.ndarray:
    try:
        k1, k6 = cat.index_of(S1), cat.index_of(S6)
    except KeyError:
        raise ValueError("catalog must contain S1 (1, 5/6) and S6 (3, 1/3)") from None
    weights = np.zeros((len(alphas), len(cat)))
    weights[:, k1 - 1] = alphas
    weights[:, k6 - 1] = 1.0 - alphas
    return evaluate_batch(cfg, cat, weights)[objective.value]


def optimize_quantized(
    cfg: NetworkConfig, cat: SetupCatalog, objective: Objective | str, bits: int
) -> QuantizedAlpha:
    """Best S1/S6 mix whose S1 weight is representable with ``bits`` bits."""
    objective = Objective.parse(objective)
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    levels = 2**bits - 1
    scores = _two_setup_scores(cfg, cat, np.arange(levels + 1) / levels, objective)
    return QuantizedAlpha(bits, _argmax_first(scores))


def optimize_two_setup(
    cfg: NetworkConfig, cat: SetupCatalog, objective: Objective | str, step=Fraction(1, 100)
) -> tuple[Fraction, float]:
    """Unquantized S1/S6 search on a ``step`` grid; returns ``(alpha, value)``."""
    objective = Objective.parse(objective)
    n = grid_divisions(step)
    scores = _two_setup_scores(cfg, cat, np.arange(n + 1) / n, objective)
    i = _argmax_first(scores)
    return Fraction(i, n), float(scores[i])


def quantized_value(cfg: NetworkConfig, cat: SetupCatalog, objective: Objective | str, q: QuantizedAlpha) -> float:
    objective = Objective.parse(objective)
    return evaluate(cfg, cat, q.distribution(cat)).metric(objective.value)


def encode_downlink(q: QuantizedAlpha) -> bytes:
    """Pack the alpha code into one octet: code in the low ``bits`` bits, upper bits zero."""
    if q.bits > 8:
        raise ValueError(f"a {q.bits}-bit code does not fit one octet")
    return bytes([q.code])


def decode_downlink(payload: bytes, bits: int) -> QuantizedAlpha:
    if not 1 <= bits <= 8:
        raise ValueError(f"bits must be in 1..8, got {bits}")
    if len(payload) != 1:
        raise ValueError(f"expected a single octet, got {len(payload)} bytes")
    octet = payload[0]
    if octet >> bits:
        raise ValueError(f"octet 0x{octet:02x} has bits set above the {bits}-bit field")
    return QuantizedAlpha(bits, octet)
