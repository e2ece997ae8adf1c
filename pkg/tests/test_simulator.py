import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrfhss_alloc import (
    AllocationDistribution,
    NetworkConfig,
    default_catalog,
    detect_collisions,
    evaluate,
    generate_traffic,
    simulate,
)
from lrfhss_alloc.simulator import ElementKind, PacketElement, collision_mask

CATALOG = default_catalog()
DR8 = AllocationDistribution.dr8(CATALOG)
DR9 = AllocationDistribution.dr9(CATALOG)
MIX = AllocationDistribution((0.3, 0.1, 0.1, 0.1, 0.1, 0.3))


def pairwise_survivors(start, end, key):
    n = len(start)
    out = [True] * n
    for i in range(n):
        for j in range(n):
            if i != j and key[i] == key[j] and start[i] < end[j] and start[j] < end[i]:
                out[i] = False
    return out


intervals = st.lists(
    st.tuples(
        st.integers(0, 60),  # start in tenths, coarse so touching edges are common
        st.integers(1, 15),
        st.integers(0, 3),
    ),
    max_size=40,
)


@settings(max_examples=300, deadline=None)
@given(items=intervals)
def test_collision_mask_matches_pairwise_oracle(items):
    start = np.array([s / 10 for s, _, _ in items], dtype=float)
    end = np.array([(s + d) / 10 for s, d, _ in items], dtype=float)
    key = np.array([k for _, _, k in items], dtype=np.int64)
    assert collision_mask(start, end, key).tolist() == pairwise_survivors(start, end, key)


@settings(max_examples=100, deadline=None)
@given(items=intervals)
def test_collision_relation_is_symmetric(items):
    start = np.array([s for s, _, _ in items], dtype=float)
    end = np.array([s + d for s, d, _ in items], dtype=float)
    key = np.array([k for _, _, k in items])
    ok = collision_mask(start, end, key)
    for i in range(len(items)):
        for j in range(len(items)):
            if i != j and key[i] == key[j] and start[i] < end[j] and start[j] < end[i]:
                assert not ok[i] and not ok[j]


def test_detect_collisions_examples():
    a = PacketElement(ElementKind.HEADER, 0.0, 1.0, channel=3)
    b = PacketElement(ElementKind.FRAGMENT, 0.5, 1.0, channel=3)
    c = PacketElement(ElementKind.FRAGMENT, 0.5, 1.0, channel=4)
    d = PacketElement(ElementKind.FRAGMENT, 1.5, 1.0, channel=3)  # touches b only
    e = PacketElement(ElementKind.FRAGMENT, 0.0, 1.0, channel=3, grid=1)
    assert detect_collisions([a, b, c, d, e]) == [False, False, True, True, True]
    assert detect_collisions([]) == []


def test_traffic_structure():
    cfg = NetworkConfig(devices=300)
    tr = generate_traffic(cfg, MIX, CATALOG, rng_seed=7)
    assert len(tr) > 0
    for tx in tr:
        setup = CATALOG[tx.setup_index]
        kinds = [el.kind for el in tx.elements]
        assert kinds.count(ElementKind.HEADER) == setup.header_replicas
        assert kinds[: setup.header_replicas] == [ElementKind.HEADER] * setup.header_replicas
        assert 0 <= tx.start_time_s < cfg.sim_duration_s
        assert tx.elements[0].start_s == tx.start_time_s
        for prev, nxt in zip(tx.elements, tx.elements[1:]):
            assert nxt.start_s == prev.end_s  # back to back, exact
            assert nxt.channel != prev.channel  # no immediate channel repeat
        for el in tx.elements:
            assert 0 <= el.channel < cfg.channels
            assert el.grid == tx.grid
            want = cfg.header_toa_s if el.kind is ElementKind.HEADER else cfg.fragment_toa_s
            assert el.duration_s == pytest.approx(want, abs=1e-9)
        if tx.setup_index == 6:
            assert len(tx.elements) == 3 + 7
    assert set(np.unique(tr.grid)) <= set(range(cfg.grids))


def test_single_device_never_collides():
    cfg = NetworkConfig(devices=1)
    for seed in range(1, 51):
        for delta in (DR8, DR9, MIX):
            rep = simulate(cfg, CATALOG, delta, seed)
            if rep.attempted:
                assert rep.empirical_Ps == 1.0
                assert rep.element_stats.headers_collided == 0
                assert rep.element_stats.fragments_collided == 0


def test_single_device_attempt_rate():
    cfg = NetworkConfig(devices=1)
    counts = np.array([simulate(cfg, CATALOG, DR8, s).attempted for s in range(1000)])
    expect = cfg.tx_rate * cfg.sim_duration_s  # 4 packets per hour
    se = math.sqrt(expect / len(counts))
    assert abs(counts.mean() - expect) <= 3 * se


def test_empty_traffic_is_flagged():
    cfg = NetworkConfig(devices=5, sim_duration_s=1e-6)
    rep = simulate(cfg, CATALOG, DR8, 1)
    assert rep.attempted == 0 and rep.delivered == 0
    assert math.isnan(rep.empirical_Ps) and not rep.ps_defined
    assert rep.empirical_goodput_Bps == 0
    assert rep.to_dict()["empirical_Ps"] is None


def test_determinism_and_seed_sensitivity():
    cfg = NetworkConfig(devices=20000)
    a = simulate(cfg, CATALOG, MIX, 11)
    b = simulate(cfg, CATALOG, MIX, 11)
    assert a == b
    c = simulate(cfg, CATALOG, MIX, 12)
    assert c != a
    ta = generate_traffic(cfg, MIX, CATALOG, 11)
    tb = generate_traffic(cfg, MIX, CATALOG, 11)
    assert np.array_equal(ta.elem_start, tb.elem_start)
    assert np.array_equal(ta.elem_channel, tb.elem_channel)


@pytest.mark.parametrize("allow_repeats", [False, True])
def test_conservation(allow_repeats):
    cfg = NetworkConfig(devices=60000)
    rep = simulate(cfg, CATALOG, MIX, 3, allow_repeats=allow_repeats)
    assert rep.attempted == sum(s.attempts for s in rep.per_setup_stats)
    assert rep.delivered == sum(s.successes for s in rep.per_setup_stats)
    assert 0 <= rep.delivered <= rep.attempted
    for s in rep.per_setup_stats:
        assert s.successes <= s.attempts
        assert s.successes + max(s.header_losses, s.fragment_shortfalls) <= s.attempts
    es = rep.element_stats
    assert es.headers == sum(s.attempts * c.header_replicas for s, c in zip(rep.per_setup_stats, CATALOG))
    assert es.headers_collided <= es.headers and es.fragments_collided <= es.fragments
    assert rep.empirical_goodput_Bps == rep.delivered * cfg.payload_bytes / cfg.sim_duration_s


def test_allow_repeats_produces_repeats():
    tr = generate_traffic(NetworkConfig(devices=2000, channels=2), DR8, CATALOG, 5, allow_repeats=True)
    same = tr.elem_channel[1:] == tr.elem_channel[:-1]
    same &= tr.elem_tx[1:] == tr.elem_tx[:-1]
    assert same.any()


def test_setup_sampling_fidelity():
    cfg = NetworkConfig(devices=120000)  # about 480k transmissions
    delta = AllocationDistribution((0.05, 0.15, 0.2, 0.25, 0.3, 0.05))
    tr = generate_traffic(cfg, delta, CATALOG, 2)
    n = len(tr)
    assert n >= 100_000
    freq = np.bincount(tr.setup, minlength=6) / n
    for k, d in enumerate(delta.as_array()):
        assert abs(freq[k] - d) <= 3 * math.sqrt(d * (1 - d) / n)


def test_zero_weight_setups_never_drawn():
    delta = AllocationDistribution((0.5, 0, 0, 0, 0, 0.5))
    tr = generate_traffic(NetworkConfig(devices=50000), delta, CATALOG, 9)
    assert set(np.unique(tr.setup).tolist()) == {0, 5}


def test_channel_and_grid_uniformity():
    tr = generate_traffic(NetworkConfig(devices=50000), DR8, CATALOG, 4)
    n = len(tr.elem_channel)
    counts = np.bincount(tr.elem_channel, minlength=35)
    expected = n / 35
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 80  # 34 dof; p < 1e-5 beyond this
    g = np.bincount(tr.grid, minlength=8)
    assert float(((g - len(tr) / 8) ** 2 / (len(tr) / 8)).sum()) < 40


@pytest.mark.parametrize("delta", [DR8, DR9], ids=["DR8", "DR9"])
def test_congestion_lowers_success(delta):
    seeds = range(1, 11)
    ps = []
    for M in (30000, 60000):
        cfg = NetworkConfig(devices=M)
        ps.append(np.mean([simulate(cfg, CATALOG, delta, s).empirical_Ps for s in seeds]))
    assert ps[1] <= ps[0]


LOW_LOAD_CASES = [(f"S{k}", AllocationDistribution.point(6, k)) for k in range(1, 7)] + [("mix", MIX)]


@pytest.mark.parametrize("delta", [d for _, d in LOW_LOAD_CASES], ids=[n for n, _ in LOW_LOAD_CASES])
def test_low_load_matches_closed_form(delta):
    M = 2500
    cfg = NetworkConfig(devices=M)
    rep = evaluate(cfg, CATALOG, delta)
    assert rep.loads.header_vulnerable_count <= 2
    emp = np.mean([simulate(cfg, CATALOG, delta, s).empirical_Ps for s in range(1, 11)])
    assert abs(emp - rep.packet_success) <= 0.02


def test_invalid_inputs():
    with pytest.raises(ValueError):
        generate_traffic(NetworkConfig(devices=10), AllocationDistribution((1.0,)), CATALOG, 1)
