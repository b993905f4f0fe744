import random

import pytest
from hypothesis import given, settings, strategies as st

from fakeview.entropy import entropy
from fakeview.errors import ConfigError, WindowError
from fakeview.matrix import AccessMatrix
from fakeview.online import OnlineConfig, OnlineDetector, Rule, ShardedDetector, configure, shard_of
from fakeview.records import ViewRecord

T0 = 1_378_252_800  # 2013-09-04 00:00 UTC


def _recs(ip, videos, start=T0, step=1):
    return [ViewRecord(start + i * step, v, ip) for i, v in enumerate(videos)]


def test_alert_on_view_301_over_two_videos():
    det = OnlineDetector(configure(k=300, l=10))
    alerts = [(i, a) for i, r in enumerate(_recs("1.2.3.4", ["a", "b"] * 200)) if (a := det.process(r))]
    assert len(alerts) == 1
    i, alert = alerts[0]
    assert i == 300
    assert (alert.views, alert.videos, alert.rule) == (301, 2, Rule.THRESHOLD_RULE)
    assert alert.to_json() == {"ip": "1.2.3.4", "views": 301, "videos": 2, "rule": "THRESHOLD_RULE", "ts": T0 + 300}


def test_diverse_ip_never_alerts():
    det = OnlineDetector()
    vids = [f"v{i % 50}" for i in range(500)]
    assert not [a for r in _recs("1.2.3.4", vids) if (a := det.process(r))]


def test_nat_safety():
    # once L distinct videos are seen the threshold rule is off for good
    det = OnlineDetector(configure(k=20, l=5))
    vids = [f"v{i}" for i in range(5)] + ["v0"] * 1000
    assert not [a for r in _recs("9.9.9.9", vids) if (a := det.process(r))]


def test_alert_latches_per_window():
    det = OnlineDetector(configure(k=5, l=2))
    first = [det.process(r) for r in _recs("1.1.1.1", ["a"] * 50)]
    assert sum(a is not None for a in first) == 1
    det.rotate()
    again = [det.process(r) for r in _recs("1.1.1.1", ["a"] * 50, start=T0 + 86400)]
    assert sum(a is not None for a in again) == 1


@pytest.mark.parametrize("bad", [
    dict(k=0), dict(l=0), dict(window_hours=0), dict(eps_lo=-0.1), dict(w=0), dict(l=10, distinct_cap=5),
])
def test_configure_rejects(bad):
    with pytest.raises(ConfigError):
        configure(**bad)


def test_config_from_json():
    assert OnlineConfig.from_json({"k": 50, "window_hours": 6}).window_seconds == 6 * 3600
    with pytest.raises(ConfigError):
        OnlineConfig.from_json({"K": 3})


def test_config_change_applies_next_window():
    det = OnlineDetector(configure(k=300, l=10))
    det.configure(configure(k=10, l=10))
    day1 = [det.process(r) for r in _recs("1.1.1.1", ["a"] * 50)]
    assert not any(day1)
    det.rotate()
    assert det.config.k == 10
    day2 = [det.process(r) for r in _recs("1.1.1.1", ["a"] * 50, start=T0 + 86400)]
    assert [a.views for a in day2 if a] == [11]


def test_out_of_window_record_rejected():
    det = OnlineDetector()
    det.process(ViewRecord(T0 + 10, "a", "1.1.1.1"))
    with pytest.raises(WindowError):
        det.process(ViewRecord(T0 + 86400, "a", "1.1.1.1"))
    with pytest.raises(WindowError):
        det.process(ViewRecord(T0 - 1, "a", "1.1.1.1"))


def test_hour_windows():
    cfg = configure(window_hours=2)
    assert cfg.window_of(T0 + 7199) == T0 and cfg.window_of(T0 + 7200) == T0 + 7200
    det = OnlineDetector(cfg)
    det.process(ViewRecord(T0 + 10, "a", "1.1.1.1"))
    assert not det.in_window(T0 + 7200)


def test_rotate_empty_and_totals():
    det = OnlineDetector()
    s = det.rotate()
    assert s.ips == {} and s.total_views == 0 and s.suspicious == []
    for r in _recs("1.1.1.1", ["a"] * 200) + _recs("2.2.2.2", ["a", "b"], start=T0 + 5):
        det.process(r)
    s = det.rotate()
    assert s.total_views == 202 and s.window == T0
    assert s.suspicious == ["1.1.1.1"]
    assert len(det) == 0


def test_run_rotates_and_rejects_late_records():
    det = OnlineDetector(configure(k=5, l=2))
    recs = _recs("1.1.1.1", ["a"] * 10) + _recs("1.1.1.1", ["a"] * 10, start=T0 + 86400)
    summaries = []
    alerts = list(det.run(recs, summaries))
    assert [a.window for a in alerts] == [T0, T0 + 86400]
    assert [s.total_views for s in summaries] == [10]
    with pytest.raises(WindowError):
        list(det.run([ViewRecord(T0, "a", "1.1.1.1")]))


def _random_stream(rng, n, n_ips=40, n_videos=80):
    ips = [f"10.0.{i // 256}.{i % 256}" for i in range(n_ips)]
    return [ViewRecord(T0 + i, f"v{rng.randrange(n_videos)}", rng.choice(ips)) for i in range(n)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3000))
def test_stream_batch_equivalence(seed, n):
    recs = _random_stream(random.Random(seed), n)
    det = OnlineDetector(configure(entropy_tier=True, distinct_cap=64))
    for r in recs:
        det.process(r)
    summary = det.rotate()
    batch = AccessMatrix.build(recs)
    assert set(summary.ips) == set(batch.rows)
    for ip, s in summary.ips.items():
        assert s.views == batch.row_totals[ip]
        if not s.saturated:
            row = batch.rows[ip]
            assert s.distinct == len(row)
            assert s.entropy == pytest.approx(entropy(list(row.values())), abs=1e-9)
        else:
            assert len(batch.rows[ip]) > 64 - 1 and s.distinct == 64


def test_distinct_cap_saturates():
    det = OnlineDetector(configure(distinct_cap=16, entropy_tier=True))
    for r in _recs("1.1.1.1", [f"v{i}" for i in range(40)]):
        det.process(r)
    s = det.rotate().ips["1.1.1.1"]
    assert s.saturated and s.distinct == 16 and s.views == 40 and s.entropy is None


def test_entropy_tier():
    cfg = configure(k=10_000, l=10, entropy_tier=True, eps_lo=0.3, w=100)
    det = OnlineDetector(cfg)
    # 95 views on one video then a handful of others: low entropy at view 100
    vids = ["a"] * 95 + ["b", "c", "d", "e", "f"] + ["a"] * 50
    alerts = [a for r in _recs("1.1.1.1", vids) if (a := det.process(r))]
    assert len(alerts) == 1 and alerts[0].rule is Rule.ENTROPY_RULE and alerts[0].views == 100
    # the tier is off by default
    det = OnlineDetector(configure(k=10_000))
    assert not [a for r in _recs("1.1.1.1", vids) if (a := det.process(r))]


def test_threshold_alerts_satisfy_rule():
    rng = random.Random(5)
    det = OnlineDetector(configure(k=30, l=4))
    recs = _random_stream(rng, 5000, n_ips=20, n_videos=3)
    for a in det.run(recs):
        assert a.views > 30 and a.videos < 4


def test_sharding_matches_single_detector():
    recs = _random_stream(random.Random(1), 4000, n_ips=60, n_videos=5)
    cfg = configure(k=40, l=4)
    single = OnlineDetector(cfg)
    sharded = ShardedDetector(4, cfg)
    a1 = [a for r in recs if (a := single.process(r))]
    a2 = [a for r in recs if (a := sharded.process(r))]
    assert a1 == a2
    s1, s2 = single.rotate(), sharded.rotate()
    assert s1 == s2
    assert all(0 <= shard_of(ip, 4) < 4 for ip in s1.ips)
    assert shard_of("1.2.3.4", 7) == shard_of("1.2.3.4", 7)
    with pytest.raises(ValueError):
        shard_of("1.2.3.4", 0)
