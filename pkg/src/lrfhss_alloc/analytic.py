"""Closed-form success probability, goodput and energy efficiency.

Scalar helpers accept numpy arrays as well, which is how the optimizer scores
thousands of candidate distributions in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import AllocationDistribution, NetworkConfig, SetupCatalog


def fragments_for(payload_bytes: int, code_rate: Fraction | int) -> int:
    """Number of coded payload fragments, ``ceil((l + 3) / (6 * CR))``."""
    if isinstance(code_rate, float):
        raise TypeError("code_rate must be exact (Fraction or int)")
    cr = Fraction(code_rate)
    if payload_bytes < 1:
        raise ValueError(f"payload must be at least 1 byte, got {payload_bytes}")
    if cr <= 0 or cr > 1:
        raise ValueError(f"code rate must lie in (0, 1], got {cr}")
    return math.ceil(Fraction(payload_bytes + 3) / (6 * cr))


def decode_threshold(fragments: int, code_rate: Fraction | int) -> int:
    """Minimum fragments needed to decode, ``ceil(f * CR)``."""
    if fragments < 1:
        raise ValueError(f"fragment count must be >= 1, got {fragments}")
    cr = Fraction(code_rate)
    if cr <= 0 or cr > 1:
        raise ValueError(f"code rate must lie in (0, 1], got {cr}")
    return math.ceil(fragments * cr)


def _check_channels(channels: int) -> None:
    if channels < 2:
        raise ValueError(f"need at least 2 channels, got {channels}")


def header_success(vulnerable_count, channels: int, replicas):
    """Probability that at least one of ``replicas`` header copies survives."""
    _check_channels(channels)
    single = fragment_success(vulnerable_count, channels)
    return 1.0 - (1.0 - single) ** np.asarray(replicas)


def fragment_success(vulnerable_count, channels: int):
    """Probability that one element survives ``A - 1`` competitors spread over ``channels``."""
    _check_channels(channels)
    a = np.asarray(vulnerable_count, dtype=float)
    if np.any(a < 1):
        raise ValueError("vulnerable element count must be >= 1")
    # exp/log keeps fractional exponents well defined
    out = np.exp((a - 1.0) * math.log1p(-1.0 / channels))
    return float(out) if out.ndim == 0 else out


def payload_success(p_fragment, fragments: int, threshold: int):
    """P(at least ``threshold`` of ``fragments`` i.i.d. fragments survive).

    Summed over the upper tail directly so tiny probabilities keep their
    relative precision.
    """
    if not 1 <= threshold <= fragments:
        raise ValueError(f"need 1 <= threshold <= fragments, got {threshold}, {fragments}")
    p = np.asarray(p_fragment, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("fragment success probability must be in [0, 1]")
    q = 1.0 - p
    total = np.zeros_like(p)
    for i in range(threshold, fragments + 1):
        total = total + math.comb(fragments, i) * p**i * q ** (fragments - i)
    total = np.clip(total, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class LoadSummary:
    mean_headers: float
    mean_fragments: float
    header_rate: float
    fragment_rate: float
    header_vulnerable_count: float
    fragment_vulnerable_count: float


@dataclass(frozen=True)
class SetupTerms:
    fragments: int
    threshold: int
    header_success: float
    payload_success: float


@dataclass(frozen=True)
class AnalyticReport:
    per_setup: tuple[SetupTerms, ...]
    fragment_success: float
    packet_success: float
    goodput_Bps: float
    avg_power_W: float
    energy_eff_BpJ: float
    loads: LoadSummary

    def metric(self, name: str) -> float:
        if name == "goodput":
            return self.goodput_Bps
        if name == "energy_efficiency":
            return self.energy_eff_BpJ
        raise ValueError(f"unknown metric {name!r}")


def setup_arrays(cfg: NetworkConfig, cat: SetupCatalog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-setup (header replicas, fragments, decode threshold) as int arrays."""
    frags = [fragments_for(cfg.payload_bytes, s.code_rate) for s in cat]
    mus = [decode_threshold(f, s.code_rate) for f, s in zip(frags, cat)]
    return cat.header_replicas, np.array(frags, dtype=np.int64), np.array(mus, dtype=np.int64)


def _vulnerable_counts(cfg: NetworkConfig, header_rate, fragment_rate):
    # Each packet picks one of `grids` hopping grids uniformly, so only
    # 1/grids of the network traffic competes within a grid.
    th, tf = cfg.header_toa_s, cfg.fragment_toa_s
    a_h = (header_rate * 2 * th + fragment_rate * (th + tf)) / cfg.grids
    a_f = (fragment_rate * 2 * tf + header_rate * (th + tf)) / cfg.grids
    return np.maximum(1.0, a_h), np.maximum(1.0, a_f)


def load_summary(
    cfg: NetworkConfig, cat: SetupCatalog, delta: AllocationDistribution
) -> LoadSummary:
    delta.check_catalog(cat)
    h, f, _ = setup_arrays(cfg, cat)
    w = delta.as_array()
    h_bar = float(w @ h)
    f_bar = float(w @ f)
    lam_h = h_bar * cfg.tx_rate * cfg.devices
    lam_f = f_bar * cfg.tx_rate * cfg.devices
    a_h, a_f = _vulnerable_counts(cfg, lam_h, lam_f)
    return LoadSummary(h_bar, f_bar, lam_h, lam_f, float(a_h), float(a_f))


def evaluate(
    cfg: NetworkConfig, cat: SetupCatalog, delta: AllocationDistribution
) -> AnalyticReport:
    """Score one distribution. Per-setup terms are reported even where the weight is 0."""
    loads = load_summary(cfg, cat, delta)
    _, f, mu = setup_arrays(cfg, cat)
    p_f = fragment_success(loads.fragment_vulnerable_count, cfg.channels)
    terms = []
    p_s = 0.0
    for s, w, fk, mk in zip(cat, delta.weights, f, mu):
        p_h = float(header_success(loads.header_vulnerable_count, cfg.channels, s.header_replicas))
        p_mu = payload_success(p_f, int(fk), int(mk))
        terms.append(SetupTerms(int(fk), int(mk), p_h, p_mu))
        p_s += float(w) * p_h * p_mu
    p_s = min(max(p_s, 0.0), 1.0)
    offered = cfg.devices * cfg.tx_rate
    goodput = p_s * offered * cfg.payload_bytes
    airtime = loads.mean_headers * cfg.header_toa_s + loads.mean_fragments * cfg.fragment_toa_s
    power = cfg.tx_power_w * offered * airtime
    return AnalyticReport(
        per_setup=tuple(terms),
        fragment_success=p_f,
        packet_success=p_s,
        goodput_Bps=goodput,
        avg_power_W=power,
        energy_eff_BpJ=goodput / power,
        loads=loads,
    )


def evaluate_batch(cfg: NetworkConfig, cat: SetupCatalog, weights: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised :func:`evaluate` over the rows of an ``(n, K)`` weight matrix.

    Returns arrays keyed ``packet_success``, ``goodput``, ``avg_power`` and
    ``energy_efficiency``.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    if weights.shape[1] != len(cat):
        raise ValueError(f"weight rows have {weights.shape[1]} entries, catalog has {len(cat)}")
    h, f, mu = setup_arrays(cfg, cat)
    h_bar = weights @ h
    f_bar = weights @ f
    offered = cfg.devices * cfg.tx_rate
    a_h, a_f = _vulnerable_counts(cfg, h_bar * offered, f_bar * offered)
    p_f = np.atleast_1d(fragment_success(a_f, cfg.channels))
    p_single_h = np.atleast_1d(fragment_success(a_h, cfg.channels))
    p_s = np.zeros(weights.shape[0])
    for k in range(len(cat)):
        col = weights[:, k]
        if not np.any(col):
            continue
        p_h = 1.0 - (1.0 - p_single_h) ** h[k]
        p_s += col * p_h * payload_success(p_f, int(f[k]), int(mu[k]))
    p_s = np.clip(p_s, 0.0, 1.0)
    goodput = p_s * offered * cfg.payload_bytes
    power = cfg.tx_power_w * offered * (h_bar * cfg.header_toa_s + f_bar * cfg.fragment_toa_s)
    return {
        "packet_success": p_s,
        "goodput": goodput,
        "avg_power": power,
        "energy_efficiency": goodput / power,
    }
