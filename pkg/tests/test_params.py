import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ng_mining_lab import (
    ChainParams,
    ConfigError,
    PoolSet,
    PrevLeader,
    StrategyProfile,
    enforce_difficulty,
    load_config,
    default_config_path,
    parse_config,
    validate_config,
)
from ng_mining_lab.params import bundled_config_path


def two_pools(la=0.25):
    return PoolSet.from_lambdas([la, 0.5 - la])


def test_default_constants_validate():
    params = ChainParams()
    assert (params.T, params.T_m, params.T_b, params.L, params.r, params.R) == (10, 2, 8, 10, 1, 10)
    assert params.alpha == pytest.approx(3 / 11)
    assert validate_config(params, two_pools(0.1)).ok


def test_nonpositive_mining_window_is_rejected():
    report = validate_config(ChainParams(T_m=0.0, T_b=10.0), two_pools())
    assert not report.ok
    assert any("T_m must be positive" in e for e in report.errors)


def test_inconsistent_micro_block_window_is_rejected():
    report = validate_config(ChainParams(T_b=7.0), two_pools())
    assert any("T_b ≠ T − T_m" in e for e in report.errors)
    with pytest.raises(ConfigError):
        report.raise_if_failed()


def test_micro_block_window_follows_interval_changes():
    assert ChainParams().replace(T=12.0).T_b == 10.0
    assert ChainParams().replace(R=1.0).T_b == 8.0


@pytest.mark.parametrize(
    "params, needle",
    [
        (ChainParams(alpha=0.0), "alpha"),
        (ChainParams(alpha=1.0), "alpha"),
        (ChainParams(L=0.5), "L must"),
        (ChainParams(r=-1.0), "r must"),
        (ChainParams(R=-1.0), "R must"),
        (ChainParams(T=2.0, T_m=2.0, T_b=0.0), "smaller than T"),
    ],
)
def test_parameter_bounds(params, needle):
    report = validate_config(params, two_pools())
    assert any(needle in e for e in report.errors)


def test_identity_and_pool_checks():
    assert not validate_config(ChainParams(), PoolSet.from_lambdas([0.2, 0.2])).ok
    assert not validate_config(ChainParams(), PoolSet.from_lambdas([0.5])).ok
    assert not validate_config(ChainParams(), PoolSet.from_lambdas([0.25, 0.25], ["A", "A"])).ok
    assert not validate_config(ChainParams(), two_pools(), prev=PrevLeader("Z")).ok


def test_strategy_bounds():
    bad = StrategyProfile((1.0, 2.0))
    assert not validate_config(ChainParams(), two_pools(), strategy=bad).ok
    assert validate_config(ChainParams(), two_pools(), strategy=StrategyProfile((10.0, 2.0))).ok


def test_desk_scale_difficulty():
    pools = enforce_difficulty([1] * 2**10, 2.0)
    assert pools.d == 11
    assert pools.total_rate == pytest.approx(0.5, abs=1e-15)


def test_single_unit_pool():
    pools = enforce_difficulty([1.0], 1.0)
    assert pools.d == 0
    assert pools[0].lam == 1.0


def test_uneven_pools():
    # 2^d = 2 * (3 + 7) = 20, so rates are 3/20 and 7/20.
    pools = enforce_difficulty([3, 7], 2.0)
    assert pools.lambdas == pytest.approx((0.15, 0.35), abs=1e-15)
    assert math.log2(20) == pytest.approx(pools.d)


@given(st.lists(st.floats(min_value=1e-6, max_value=1e9), min_size=2, max_size=12),
       st.floats(min_value=0.01, max_value=100))
def test_difficulty_identity_holds(rates, T_m):
    pools = enforce_difficulty(rates, T_m)
    assert abs(T_m * pools.total_rate - 1.0) <= 1e-9
    params = ChainParams(T=T_m * 5, T_m=T_m)
    assert validate_config(params, pools).ok


@pytest.mark.parametrize("rates, T_m", [([], 2.0), ([1.0, 0.0], 2.0), ([1.0, 2.0], 0.0)])
def test_difficulty_rejects_bad_input(rates, T_m):
    with pytest.raises(ConfigError):
        enforce_difficulty(rates, T_m)


def test_bundled_configs_load():
    cfg = load_config(default_config_path())
    assert cfg.params == ChainParams(d=11.0)
    assert cfg.pools.ids == ("A", "B")
    assert cfg.pools.d == 11
    assert cfg.pools.lambdas == (0.25, 0.25)
    assert cfg.strategy == StrategyProfile.honest(cfg.params, 2)
    three = load_config(bundled_config_path("three-pool"))
    assert three.pools.lambdas == (0.25, 0.1, 0.15)


def test_config_strategy_forms():
    base = {"pools": [{"lambda": 0.2}, {"lambda": 0.3}]}
    assert parse_config({**base, "strategy": [4, "honest"]}).strategy.taus == (4.0, 2.0)
    assert parse_config({**base, "strategy": {"B": 9}}).strategy.taus == (2.0, 9.0)
    assert parse_config(base).pools.ids == ("A", "B")


@pytest.mark.parametrize(
    "doc",
    [
        {"pools": []},
        {"pools": [{"w": 1}, {"lambda": 0.2}]},
        {"chain": {"bogus": 1}, "pools": [{"w": 1}, {"w": 1}]},
        {"chain": {"T_m": 0}, "pools": [{"w": 1}, {"w": 1}]},
        {"pools": [{"w": 1}, {"w": 1}], "strategy": [1, 2]},
    ],
)
def test_bad_config_documents(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_unreadable_config_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigError):
        load_config(arr)
