"""Seeded discrete-event simulation of an LR-FHSS uplink.

Every packet picks a hopping grid, then hops over the grid's channels one
element at a time: ``h_k`` headers back to back, then ``f_k`` payload
fragments. Two elements are destroyed when they overlap in time on the same
channel of the same grid; there is no capture effect.

Randomness comes from a single ``numpy.random.Generator`` seeded with the
root seed. Draws happen in a fixed order, each as one vectorised block:

1. inter-arrival gaps, an ``(M, n)`` matrix with row ``d`` belonging to device ``d``;
2. one uniform per packet (in device, then time order) for the setup;
3. one integer per packet for the grid;
4. one integer per element for the hop offset, then one per packet for the
   first channel (or, with ``allow_repeats``, one channel per element).

Because no step iterates over devices, the traffic does not depend on any
device iteration order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .analytic import setup_arrays
from .core import AllocationDistribution, NetworkConfig, SetupCatalog


class ElementKind(str, enum.Enum):
    HEADER = "header"
    FRAGMENT = "fragment"


@dataclass(frozen=True)
class PacketElement:
    kind: ElementKind
    start_s: float
    duration_s: float
    channel: int
    grid: int = 0

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class Transmission:
    device_id: int
    start_time_s: float
    setup_index: int
    grid: int
    elements: tuple[PacketElement, ...]


@dataclass
class Traffic:
    """Columnar traffic for one run.

    Packet columns have one entry per transmission; element columns one entry
    per header or fragment. Indexing or iterating yields :class:`Transmission`
    objects built on demand.
    """

    device: np.ndarray
    start: np.ndarray
    setup: np.ndarray  # 0-based catalog index
    grid: np.ndarray
    elem_tx: np.ndarray
    elem_is_header: np.ndarray
    elem_start: np.ndarray
    elem_end: np.ndarray
    elem_channel: np.ndarray
    tx_first_elem: np.ndarray

    def __len__(self) -> int:
        return len(self.start)

    def __getitem__(self, i: int) -> Transmission:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        lo = self.tx_first_elem[i]
        hi = self.tx_first_elem[i + 1] if i + 1 < len(self) else len(self.elem_start)
        g = int(self.grid[i])
        elements = tuple(
            PacketElement(
                ElementKind.HEADER if self.elem_is_header[j] else ElementKind.FRAGMENT,
                float(self.elem_start[j]),
                float(self.elem_end[j] - self.elem_start[j]),
                int(self.elem_channel[j]),
                g,
            )
            for j in range(lo, hi)
        )
        return Transmission(int(self.device[i]), float(self.start[i]), int(self.setup[i]) + 1, g, elements)

    def __iter__(self) -> Iterator[Transmission]:
        for i in range(len(self)):
            yield self[i]


def _arrival_times(rng: np.random.Generator, devices: int, rate: float, horizon: float):
    """Exponential inter-arrival renewal process per device over ``[0, horizon)``."""
    mean_count = rate * horizon
    width = max(4, math.ceil(mean_count + 6 * math.sqrt(mean_count) + 6))
    times = np.cumsum(rng.exponential(1.0 / rate, size=(devices, width)), axis=1)
    # extend rows whose last arrival is still inside the horizon
    while True:
        short = times[:, -1] < horizon
        if not short.any():
            break
        extra = rng.exponential(1.0 / rate, size=(devices, width))
        extra[~short] = np.inf
        times = np.hstack([times, times[:, -1:] + np.cumsum(extra, axis=1)])
    inside = times < horizon
    device = np.nonzero(inside)[0].astype(np.int32)
    return device, times[inside]


def _sample_setups(rng: np.random.Generator, weights: np.ndarray, n: int) -> np.ndarray:
    u = rng.random(n)
    cum = np.cumsum(weights) / weights.sum()
    last = np.nonzero(weights > 0)[0][-1]
    cum[last:] = 1.0
    return np.searchsorted(cum, u, side="right").astype(np.int32)


def _segment_cumsum(values: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Cumulative sum restarted at each segment start index in ``first``."""
    total = np.cumsum(values)
    seg_len = np.diff(np.append(first, len(values)))
    before = np.repeat(total[first] - values[first], seg_len)
    return total - before


def generate_traffic(
    cfg: NetworkConfig,
    delta: AllocationDistribution,
    cat: SetupCatalog,
    rng_seed: int,
    allow_repeats: bool = False,
) -> Traffic:
    delta.check_catalog(cat)
    if cfg.channels < 2 and not allow_repeats:
        raise ValueError("hopping without channel repeats needs at least 2 channels")
    rng = np.random.default_rng(rng_seed)
    h, f, _ = setup_arrays(cfg, cat)

    device, start = _arrival_times(rng, cfg.devices, cfg.tx_rate, cfg.sim_duration_s)
    n_tx = len(start)
    setup = _sample_setups(rng, delta.as_array(), n_tx)
    grid = rng.integers(0, cfg.grids, size=n_tx, dtype=np.int32)

    h_tx = h[setup]
    n_elem = h_tx + f[setup]
    first = np.zeros(n_tx, dtype=np.int64)
    if n_tx:
        first[1:] = np.cumsum(n_elem)[:-1]
    total = int(n_elem.sum())
    elem_tx = np.repeat(np.arange(n_tx, dtype=np.int32), n_elem)
    pos = np.arange(total, dtype=np.int64) - np.repeat(first, n_elem)
    is_header = pos < np.repeat(h_tx, n_elem)

    # per-setup table of element offsets within a packet; element j spans
    # table[j] .. table[j + 1], so consecutive elements share the boundary value
    th, tf = cfg.header_toa_s, cfg.fragment_toa_s
    tables = [
        [min(j, int(hk)) * th + max(j - int(hk), 0) * tf for j in range(int(hk + fk) + 1)]
        for hk, fk in zip(h, f)
    ]
    base = np.cumsum([0] + [len(t) for t in tables[:-1]])
    table = np.array([x for t in tables for x in t])
    slot = np.repeat(base[setup], n_elem) + pos
    tx_start = start[elem_tx]
    elem_start = tx_start + table[slot]
    elem_end = tx_start + table[slot + 1]
    del tx_start, pos, slot

    c = cfg.channels
    if allow_repeats:
        channel = rng.integers(0, c, size=total, dtype=np.int64)
    else:
        hops = rng.integers(1, c, size=total, dtype=np.int64)
        if n_tx:
            hops[first] = rng.integers(0, c, size=n_tx, dtype=np.int64)
        channel = _segment_cumsum(hops, first) % c if n_tx else hops
        del hops
    return Traffic(
        device=device,
        start=start,
        setup=setup,
        grid=grid,
        elem_tx=elem_tx,
        elem_is_header=is_header,
        elem_start=elem_start,
        elem_end=elem_end,
        elem_channel=channel.astype(np.int32),
        tx_first_elem=first,
    )


def collision_mask(start: np.ndarray, end: np.ndarray, key: np.ndarray) -> np.ndarray:
    """Return a survived flag per interval.

    An interval survives iff no other interval with the same ``key`` overlaps
    it by a positive amount. Intervals that only touch (``end == start``) do
    not collide. Runs a sort-and-scan per key instead of a pairwise check.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    key = np.asarray(key)
    n = len(start)
    survived = np.ones(n, dtype=bool)
    if n < 2:
        return survived
    if key.size and 0 <= key.min() and key.max() < 2**15:
        # radix sort on a 16-bit key
        key = key.astype(np.int16)
    by_key = np.argsort(key, kind="stable")
    k = key[by_key]
    bounds = np.flatnonzero(k[1:] != k[:-1]) + 1
    lo_list = np.concatenate([[0], bounds])
    hi_list = np.concatenate([bounds, [n]])
    hit = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    for lo, hi in zip(lo_list, hi_list):
        idx = by_key[lo:hi]
        idx = idx[np.argsort(start[idx])]
        order[lo:hi] = idx
        if hi - lo < 2:
            continue
        gs, ge = start[idx], end[idx]
        reach = np.maximum.accumulate(ge)
        # overlapping something that started earlier
        hit[lo + 1 : hi] |= reach[:-1] > gs[1:]
        # overlapping something that starts later (the next one in order is enough)
        hit[lo : hi - 1] |= gs[1:] < ge[:-1]
    survived[order] = ~hit
    return survived


def detect_collisions(elements: Sequence[PacketElement]) -> list[bool]:
    """Survived flag for each element, same order as the input."""
    if not elements:
        return []
    start = np.array([el.start_s for el in elements])
    end = np.array([el.end_s for el in elements])
    key = np.array([(el.grid, el.channel) for el in elements], dtype=np.int64)
    flat_key = np.unique(key, axis=0, return_inverse=True)[1].reshape(-1)
    return collision_mask(start, end, flat_key).tolist()


@dataclass(frozen=True)
class SetupStats:
    attempts: int
    successes: int
    header_losses: int
    fragment_shortfalls: int


@dataclass(frozen=True)
class ElementStats:
    headers: int
    headers_collided: int
    fragments: int
    fragments_collided: int


@dataclass(frozen=True)
class SimReport:
    attempted: int
    delivered: int
    empirical_Ps: float  # nan when nothing was attempted
    empirical_goodput_Bps: float
    empirical_energy_eff_BpJ: float  # nan when nothing was attempted
    per_setup_stats: tuple[SetupStats, ...]
    element_stats: ElementStats
    seed: int
    duration_s: float
    allow_repeats: bool = field(default=False)

    @property
    def ps_defined(self) -> bool:
        return self.attempted > 0

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("empirical_Ps", "empirical_energy_eff_BpJ"):
            if math.isnan(out[name]):
                out[name] = None
        return out


def simulate(
    cfg: NetworkConfig,
    cat: SetupCatalog,
    delta: AllocationDistribution,
    rng_seed: int,
    allow_repeats: bool = False,
) -> SimReport:
    """Run one seeded simulation and tally deliveries.

    A packet is delivered iff at least one header and at least ``mu_k``
    fragments survive.
    """
    traffic = generate_traffic(cfg, delta, cat, rng_seed, allow_repeats)
    h, f, mu = setup_arrays(cfg, cat)
    n_tx = len(traffic)

    key = traffic.grid[traffic.elem_tx].astype(np.int64) * cfg.channels + traffic.elem_channel
    ok = collision_mask(traffic.elem_start, traffic.elem_end, key)
    del key
    hdr = traffic.elem_is_header
    hdr_ok = np.bincount(traffic.elem_tx[hdr & ok], minlength=n_tx)
    frag_ok = np.bincount(traffic.elem_tx[~hdr & ok], minlength=n_tx)

    setup = traffic.setup
    header_lost = hdr_ok == 0
    frag_short = frag_ok < mu[setup]
    delivered_mask = ~header_lost & ~frag_short

    K = len(cat)
    attempts = np.bincount(setup, minlength=K)
    successes = np.bincount(setup[delivered_mask], minlength=K)
    h_losses = np.bincount(setup[header_lost], minlength=K)
    f_short = np.bincount(setup[frag_short], minlength=K)
    per_setup = tuple(
        SetupStats(int(a), int(s), int(hl), int(fs))
        for a, s, hl, fs in zip(attempts, successes, h_losses, f_short)
    )
    n_hdr = int(hdr.sum())
    elem_stats = ElementStats(
        headers=n_hdr,
        headers_collided=int((hdr & ~ok).sum()),
        fragments=len(hdr) - n_hdr,
        fragments_collided=int((~hdr & ~ok).sum()),
    )

    delivered = int(delivered_mask.sum())
    payload = delivered * cfg.payload_bytes
    airtime = float(h[setup].sum() * cfg.header_toa_s + f[setup].sum() * cfg.fragment_toa_s)
    energy = cfg.tx_power_w * airtime
    return SimReport(
        attempted=n_tx,
        delivered=delivered,
        empirical_Ps=delivered / n_tx if n_tx else math.nan,
        empirical_goodput_Bps=payload / cfg.sim_duration_s,
        empirical_energy_eff_BpJ=payload / energy if n_tx else math.nan,
        per_setup_stats=per_setup,
        element_stats=elem_stats,
        seed=rng_seed,
        duration_s=cfg.sim_duration_s,
        allow_repeats=allow_repeats,
    )
