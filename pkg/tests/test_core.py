from fractions import Fraction

import pytest

from lrfhss_alloc import (
    DR8,
    DR9,
    AllocationDistribution,
    NetworkConfig,
    Setup,
    SetupCatalog,
    dbm_to_watts,
    default_catalog,
)


def test_default_catalog_matches_setup_table():
    cat = default_catalog()
    assert len(cat) == 6
    assert [(s.header_replicas, s.code_rate) for s in cat] == [
        (1, Fraction(5, 6)),
        (1, Fraction(2, 3)),
        (2, Fraction(2, 3)),
        (2, Fraction(1, 2)),
        (3, Fraction(1, 2)),
        (3, Fraction(1, 3)),
    ]
    assert cat[6] == Setup(3, Fraction(1, 3))
    assert cat[3] == Setup(2, Fraction(2, 3))


def test_named_data_rates(catalog):
    assert catalog.index_of(DR8) == 6
    assert catalog.index_of(DR9) == 3
    assert catalog.resolve("dr8") == 6
    assert catalog.resolve("S2") == 2
    with pytest.raises(KeyError):
        catalog.resolve("DR10")


def test_dr_helpers_equal_hand_built(catalog):
    assert AllocationDistribution.dr8(catalog) == AllocationDistribution((0, 0, 0, 0, 0, 1.0))
    assert AllocationDistribution.dr9(catalog) == AllocationDistribution((0, 0, 1.0, 0, 0, 0))


@pytest.mark.parametrize("dbm,watts", [(20, 0.1), (30, 1.0), (0, 0.001)])
def test_dbm_to_watts(dbm, watts):
    assert dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-15)


def test_setup_rejects_bad_values():
    with pytest.raises(ValueError):
        Setup(0, Fraction(1, 2))
    with pytest.raises(ValueError):
        Setup(1, Fraction(3, 2))
    with pytest.raises(ValueError):
        Setup(1, 0)
    with pytest.raises(TypeError):
        Setup(1, 0.5)
    # custom rationals are fine
    assert Setup(4, "3/4").code_rate == Fraction(3, 4)


def test_catalog_rejects_duplicates_and_empty():
    with pytest.raises(ValueError):
        SetupCatalog((DR8, DR8))
    with pytest.raises(ValueError):
        SetupCatalog(())


@pytest.mark.parametrize(
    "weights",
    [(0.5, 0.4), (1.1, -0.1), (0.5, 0.5 + 2e-9), (-0.0001, 1.0001)],
)
def test_distribution_rejects_invalid(weights):
    with pytest.raises(ValueError):
        AllocationDistribution(weights)


def test_distribution_accepts_sum_within_tolerance():
    AllocationDistribution((0.3, 0.7 + 5e-10))


def test_distribution_must_match_catalog(catalog):
    with pytest.raises(ValueError):
        AllocationDistribution((0.5, 0.5)).check_catalog(catalog)


def test_distribution_format_and_parse(catalog):
    d = AllocationDistribution.from_mapping(6, {1: Fraction(35, 100), 6: Fraction(65, 100)})
    assert d.format() == "1:0.35+6:0.65"
    assert AllocationDistribution.parse("1:0.35+6:0.65", 6) == d
    with pytest.raises(ValueError):
        AllocationDistribution.parse("1-0.35", 6)


def test_network_config_defaults():
    cfg = NetworkConfig()
    assert cfg.tx_power_dbm == 20
    assert cfg.tx_rate == pytest.approx(1 / 900)
    assert cfg.sim_duration_s == 3600
    assert cfg.channels == 35
    assert cfg.payload_bytes == 10
    assert cfg.header_toa_s == 0.233472
    assert cfg.fragment_toa_s == 0.1024
    assert cfg.tx_power_w == pytest.approx(0.1)


@pytest.mark.parametrize(
    "field,value",
    [("devices", 0), ("channels", -1), ("tx_rate", 0.0), ("sim_duration_s", -5.0), ("payload_bytes", 0)],
)
def test_network_config_rejects_nonpositive(field, value):
    with pytest.raises(ValueError):
        NetworkConfig(**{field: value})
