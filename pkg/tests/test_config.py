import pytest
from hypothesis import given
from hypothesis import strategies as st

from vndnsim.config import Config, ConfigError, apply_overrides, load_config, parse_config
from vndnsim.mac import MacParams


def test_defaults():
    c = Config()
    assert c.horizon_s == 300 and c.ndn.cs_capacity == 10_000 and c.ndn.interest_lifetime_s == 4
    assert (c.traffic.rate_min, c.traffic.rate_max, c.traffic.ref_hz) == (50, 100, 100)
    assert c.wired.rate_mbps == 1000 and c.wired.delay_ms == 30
    assert c.mac == MacParams()


def test_overrides():
    c = apply_overrides(Config(), {"mac.full_rate_mbps": "286.8", "horizon_s": "20", "ndn.cs_capacity": "5"})
    assert c.mac.full_rate_mbps == 286.8 and c.horizon_s == 20.0 and c.ndn.cs_capacity == 5
    assert c.mac.retry_limit == 7


@pytest.mark.parametrize("overrides, match", [
    ({"mac.bogus": "1"}, "unknown"),
    ({"mac.retry_limit": "seven"}, "cannot parse"),
    ({"mac.cw_min": "2000"}, "cw_min"),
    ({"traffic.rate_min": "120"}, "rate_min"),
    ({"ndn.interest_lifetime_s": "0"}, "lifetime"),
    ({"channel": "fiber"}, "channel"),
    ({"horizon_s": "-1"}, "horizon"),
])
def test_invalid_overrides(overrides, match):
    with pytest.raises(ConfigError, match=match):
        apply_overrides(Config(), overrides)


def test_text_round_trip(tmp_path):
    c = apply_overrides(Config(), {"mac.basic_rate_mbps": "6", "mac.preamble_basic_us": "20"})
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\n" + c.dumps())
    assert load_config(path) == c
    assert parse_config(c.dumps()).digest() == c.digest()


def test_bad_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("horizon_s=10\nnonsense\n")


@given(st.floats(0.5, 1000, allow_nan=False), st.integers(1, 20))
def test_digest_tracks_content(horizon, retry):
    c = apply_overrides(Config(), {"horizon_s": repr(horizon), "mac.retry_limit": str(retry)})
    assert parse_config(c.dumps()) == c
    assert (c.digest() == Config().digest()) == (c == Config())
